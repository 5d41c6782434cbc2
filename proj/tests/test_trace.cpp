#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "cltype/annotations.hpp"
#include "cltype/errors.hpp"
#include "cltype/eval.hpp"
#include "cltype/generator.hpp"
#include "cltype/lifter.hpp"
#include "cltype/oracle.hpp"
#include "cltype/taint.hpp"
#include "cltype/trace.hpp"
#include "support.hpp"

using namespace cltype;
using cltype::testing::data_path;
using cltype::testing::read_file;

namespace {

const char* kRegs =
    "eax=0x00000000 ebx=0x00000000 ecx=0x00000000 edx=0x00000000 esi=0x00000000 edi=0x00000000 ebp=0xbf000010 "
    "esp=0xbf000000";

std::string line(unsigned seq, const std::string& ins) {
    return "T " + std::to_string(seq) + " 0x08048000 " + ins + " | " + kRegs + "\n";
}

// ParseError's reported line for a bad text.
std::size_t error_line(const std::string& text) {
    try {
        parse_trace(text, "t.trace");
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

TraceRecord record_of(const std::string& ins, RegSnapshot regs = {}) {
    TraceRecord r;
    r.addr = 0x8048000;
    r.op = parse_instruction(ins);
    r.regs = regs;
    return r;
}

}  // namespace

TEST_CASE("parse a golden-style record") {
    const auto t = parse_trace(
        "T 0 0x0804961d mov eax,[ebp+0x8] | eax=0x0 ebx=0x0 ecx=0x0 edx=0x0 esi=0x0 edi=0x0 ebp=0xbf000010 esp=0x0\n");
    REQUIRE(t.size() == 1);
    CHECK(t[0].seq == 0);
    CHECK(t[0].addr == 0x804961d);
    CHECK(t[0].op.mnemonic == Mnemonic::mov);
    CHECK(t[0].op.op(1).is_mem());
    CHECK(t[0].regs[6] == 0xbf000010);
    const auto lifted = lift(t[0]);
    REQUIRE(lifted.stmts.size() == 1);
    const auto* ld = std::get_if<Load>(&lifted.stmts[0]);
    REQUIRE(ld != nullptr);
    CHECK(ld->addr == 0xbf000018);
}

TEST_CASE("empty and comment-only input") {
    CHECK(parse_trace("").empty());
    CHECK(parse_trace("# nothing\n\n").empty());
}

TEST_CASE("parse errors carry line numbers") {
    const std::string ok = line(0, "mov eax,ebx");
    CHECK(error_line(ok + line(2, "mov eax,ebx")) == 2);
    CHECK(error_line("# c\n" + ok + line(1, "frobnicate eax")) == 3);
    CHECK(error_line(ok + "T 1 0x08048004 mov eax,ebx\n") == 2);
    CHECK(error_line(ok + "T 1 0x08048004 mov eax,ebx | eax=0x0\n") == 2);
    CHECK(error_line("X 0 0x1 mov eax,ebx | " + std::string(kRegs) + "\n") == 1);
    CHECK(error_line(line(0, "mov [eax],[ebx]")) == 1);
    CHECK(error_line(line(0, "add eax")) == 1);
    try {
        parse_trace(ok + line(5, "mov eax,ebx"), "t.trace");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("non-contiguous sequence") != std::string::npos);
        CHECK(std::string(e.what()).find("t.trace:2") != std::string::npos);
    }
    try {
        parse_trace(line(0, "rdtsc"));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("rdtsc") != std::string::npos);
    }
}

TEST_CASE("serialize then parse is the identity") {
    std::vector<std::vector<TraceRecord>> traces{load_trace(data_path("golden.trace"))};
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        traces.push_back(materialize(gen_program(seed).program, 0, 0));
    }
    std::size_t records = 0;
    for (const auto& t : traces) {
        const auto text = serialize_trace(t);
        CHECK(parse_trace(text) == t);
        CHECK(serialize_trace(parse_trace(text)) == text);
        records += t.size();
    }
    CHECK(records > 500);
    for (const char* ins : {"mov byte ptr [eax+ebx*4+0x10],cl", "movsx eax,word ptr [esi-0x4]", "lea edi,[ecx*8]",
                            "cmovge edx,[0x5000]", "push dword ptr [ebp+0x8]", "imul eax,ebx,0x3", "div ecx"}) {
        const auto i = parse_instruction(ins);
        CHECK(parse_instruction(to_string(i)) == i);
    }
}

TEST_CASE("address resolution examples") {
    RegSnapshot r{};
    r[6] = 0xbf000010;
    CHECK(resolve_address(parse_instruction("mov eax,[ebp+0x8]").op(1).mem, r) == 0xbf000018);
    r = {};
    r[0] = 0x37;
    CHECK(resolve_address(parse_instruction("mov al,[eax+0x8110460]").op(1).mem, r) == 0x8110497);
    r = {};
    r[1] = 0x100;
    r[4] = 3;
    CHECK(resolve_address(parse_instruction("mov eax,[ebx+esi*4+0x10]").op(1).mem, r) == 0x11c);
}

TEST_CASE("address resolution matches a reference on random operands") {
    std::mt19937_64 rng(1234);
    const char* names[] = {"eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp"};
    for (int i = 0; i < 10000; ++i) {
        RegSnapshot regs;
        for (auto& v : regs) {
            v = static_cast<std::uint32_t>(rng());
        }
        const unsigned base = rng() % 9, index = rng() % 9;  // 8 = absent
        const unsigned scale = 1u << (rng() % 4);
        const std::uint32_t disp = static_cast<std::uint32_t>(rng());
        std::string text = "mov eax,[";
        std::uint64_t want = 0;
        bool any = false;
        if (base < 8) {
            text += names[base];
            want += regs[base];
            any = true;
        }
        if (index < 8) {
            text += std::string(any ? "+" : "") + names[index] + "*" + std::to_string(scale);
            want += std::uint64_t{regs[index]} * scale;
            any = true;
        }
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%x", disp);
        text += std::string(any ? "+" : "") + buf + "]";
        want += disp;
        const auto ins = parse_instruction(text);
        INFO(text);
        CHECK(resolve_address(ins.op(1).mem, regs) == static_cast<std::uint32_t>(want));
    }
}

TEST_CASE("lifting examples") {
    TypeEnv env;
    env.annotate(full(VarId::eax), SecurityType::SDD);

    auto lifted = lift(record_of("and eax,0xffff0000"));
    REQUIRE_FALSE(lifted.stmts.empty());
    const auto* a = std::get_if<Assign>(&lifted.stmts.back());
    REQUIRE(a != nullptr);
    CHECK(a->dst == full(VarId::eax));
    CHECK(std::any_of(lifted.stmts.begin(), lifted.stmts.end(), [](const Stmt& s) {
        const auto* f = std::get_if<Assign>(&s);
        return f != nullptr && f->dst == full(VarId::zf);
    }));
    TypeEnv e1 = exec_seq(lifted.stmts, env);
    CHECK(e1.read(full(VarId::eax)).display() == "{K}¹⁶{0}¹⁶:SDD");
    CHECK(e1.read(full(VarId::zf)).display() == "{K}:SDD");
    CHECK(e1.read(full(VarId::cf)) == mk_constant(0, 1));

    lifted = lift(record_of("shr eax,0x18"));
    CHECK(exec_seq(lifted.stmts, env).read(full(VarId::eax)).display() == "{0}²⁴{K}⁸:SDD");

    RegSnapshot regs{};
    regs[0] = 0x12;
    lifted = lift(record_of("mov al,[eax+0x8110460]", regs));
    REQUIRE(lifted.stmts.size() == 1);
    const auto* ld = std::get_if<Load>(&lifted.stmts[0]);
    REQUIRE(ld != nullptr);
    CHECK(ld->addr == 0x8110472);
    CHECK(ld->bytes == 1);
    CHECK(ld->dst == *var_by_name("al"));

    lifted = lift(record_of("je 0x8049661"));
    CHECK(lifted.stmts.empty());
    REQUIRE(lifted.branch.has_value());
    CHECK(lifted.branch->flag == VarId::zf);
    CHECK(lifted.branch->target == 0x8049661);

    lifted = lift(record_of("jmp 0x8049691"));
    CHECK(lifted.jump_target == 0x8049691);

    regs = {};
    regs[7] = 0x9000;
    lifted = lift(record_of("push eax", regs));
    bool stored = false;
    for (const auto& s : lifted.stmts) {
        if (const auto* st = std::get_if<Store>(&s)) {
            CHECK(st->addr == 0x8ffc);
            stored = true;
        }
    }
    CHECK(stored);
}

TEST_CASE("lifting is a pure function of the record") {
    const auto t = load_trace(data_path("golden.trace"));
    for (const auto& r : t) {
        const auto a = lift(r), b = lift(r);
        REQUIRE(a.stmts.size() == b.stmts.size());
        for (std::size_t i = 0; i < a.stmts.size(); ++i) {
            CHECK(to_string(a.stmts[i]) == to_string(b.stmts[i]));
        }
    }
}

TEST_CASE("annotation parsing") {
    const auto set = parse_annotations("# c\nSECRET reg eax @0\nRANDOM mem 0x2000 4 @5\n");
    REQUIRE(set.entries.size() == 2);
    CHECK(set.entries[0].kind == AnnotKind::Secret);
    CHECK(std::get<VarRef>(set.entries[0].target) == full(VarId::eax));
    CHECK(set.entries[1].kind == AnnotKind::Random);
    CHECK(std::get<ByteRange>(set.entries[1].target) == ByteRange{0x2000, 4});
    CHECK(set.entries[1].seq == 5);
    CHECK(parse_annotations(serialize_annotations(set)).entries == set.entries);

    const auto env = build_initial_env(set);
    CHECK(env.read(full(VarId::eax)) == mk_uniform(SecurityType::SDD, 32));
    CHECK_FALSE(env.tracked(0x2000));
    TypeEnv later = env;
    apply_annotations(later, set, 5);
    CHECK(later.read_mem(0x2000, 4) == mk_uniform(SecurityType::URA, 32));
}

TEST_CASE("annotation errors") {
    const auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse_annotations(text, "a.annot");
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("SECRET reg eax @0\nSECRET reg xmm0 @0\n") == 2);
    CHECK(line_of("PUBLIC reg eax @0\n") == 1);
    CHECK(line_of("SECRET mem 0x10 0 @0\n") == 1);
    CHECK(line_of("SECRET mem zz 4 @0\n") == 1);
    CHECK(line_of("SECRET reg eax 0\n") == 1);

    AnnotationSet dup;
    dup.entries.push_back({AnnotKind::Secret, full(VarId::eax), 0});
    dup.entries.push_back({AnnotKind::Random, *var_by_name("al"), 0});
    CHECK_THROWS_AS(build_initial_env(dup), std::invalid_argument);
    CHECK_THROWS_AS(dup.validate(1), std::invalid_argument);

    AnnotationSet late;
    late.entries.push_back({AnnotKind::Secret, full(VarId::eax), 3});
    CHECK_THROWS_AS(late.validate(3), std::invalid_argument);
    CHECK_NOTHROW(late.validate(4));
}

TEST_CASE("taint pass") {
    const auto t = load_trace(data_path("golden.trace"));
    const auto ann = load_annotations(data_path("golden.annot"));
    const auto st = taint_pass(t, ann);
    // Everything but the closing jmp, which reads no state at all.
    std::vector<std::uint64_t> want;
    for (const auto& r : t) {
        if (r.op.mnemonic != Mnemonic::jmp) {
            want.push_back(r.seq);
        }
    }
    CHECK(want.size() == t.size() - 1);
    CHECK(st.tainted_seqs == want);

    CHECK(taint_pass(t, AnnotationSet{}).tainted_seqs.empty());

    AnnotationSet esi;
    esi.entries.push_back({AnnotKind::Secret, full(VarId::esi), 0});
    const auto s2 = taint_pass(t, esi);
    CHECK(s2.tainted_seqs == std::vector<std::uint64_t>{0});
    CHECK(std::find(s2.tainted_regs.begin(), s2.tainted_regs.end(), full(VarId::esi)) != s2.tainted_regs.end());

    // Overwriting with a constant clears taint; a store of tainted data taints the bytes.
    const auto t3 = parse_trace(line(0, "mov ebx,eax") + line(1, "mov [0x100],ebx") + line(2, "mov eax,0x1") +
                                line(3, "mov ecx,edx"));
    AnnotationSet eax;
    eax.entries.push_back({AnnotKind::Secret, full(VarId::eax), 0});
    const auto s3 = taint_pass(t3, eax);
    CHECK(s3.tainted_seqs == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(s3.tainted_bytes == std::set<std::uint32_t>{0x100, 0x101, 0x102, 0x103});
    CHECK(std::find(s3.tainted_regs.begin(), s3.tainted_regs.end(), full(VarId::eax)) == s3.tainted_regs.end());
}

TEST_CASE("typed state stays inside the taint set") {
    CHECK(cltype::testing::containment_violations(load_trace(data_path("golden.trace")),
                                                  load_annotations(data_path("golden.annot")))
              .empty());
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto g = gen_program(seed);
        const auto v = cltype::testing::containment_violations(materialize(g.program, 0, 0),
                                                               program_annotations(g.program));
        INFO("seed " << seed);
        CHECK(v.empty());
    }
}
