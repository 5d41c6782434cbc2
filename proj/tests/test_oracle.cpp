#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "cltype/detector.hpp"
#include "cltype/errors.hpp"
#include "cltype/generator.hpp"
#include "cltype/oracle.hpp"
#include "support.hpp"

using namespace cltype;
using cltype::testing::data_path;

namespace {

const CacheGeometry L6 = CacheGeometry::make(6);

const std::string kRegs =
    "REGS eax=0x00000000 ebx=0x00000000 ecx=0x00000000 edx=0x00000000 esi=0x00000000 edi=0x00007000 "
    "ebp=0x00008ff0 esp=0x00008f00\n";

std::string slots(const char* kind, unsigned n, std::uint32_t byte) {
    std::string out;
    for (unsigned i = 0; i < n; ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "SLOT %s %u 0x%x %u\n", kind, i, byte + i / 8, i % 8);
        out += buf;
    }
    return out;
}

std::string body(std::initializer_list<const char*> ins) {
    std::string out;
    std::uint32_t a = 0x8048000;
    for (const char* i : ins) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "I 0x%x ", a);
        out += buf + std::string(i) + "\n";
        a += 4;
    }
    return out;
}

OracleProgram prog(const std::string& text) { return parse_program(kRegs + text, "p.prog"); }

std::size_t error_line(const std::string& text) {
    try {
        parse_program(text, "p.prog");
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

Report analyze_program(const OracleProgram& p, const BranchTable* t) {
    return analyze(materialize(p, 0, 0), program_annotations(p), t);
}

}  // namespace

TEST_CASE("program parsing") {
    const auto p = load_program(data_path("blind.prog"));
    CHECK(p.secret_bits() == 8);
    CHECK(p.random_bits() == 8);
    CHECK(p.records.size() == 5);
    CHECK(p.init.at(0x5000) == 0x5a);
    const auto again = parse_program(serialize_program(p));
    CHECK(materialize(again, 0x3c, 0x81) == materialize(p, 0x3c, 0x81));
    CHECK(again.slots == p.slots);
    CHECK(again.init == p.init);

    CHECK(error_line(kRegs + "SLOT secret 0 0x5000 0\nSLOT secret 1 0x5000 0\n") == 3);
    CHECK(error_line(kRegs + "SLOT secret 0 0x5000 0\nSLOT secret 0 0x5000 1\n") == 3);
    CHECK(error_line(kRegs + "SLOT secret 0 0x5000 8\n") == 2);
    CHECK(error_line(kRegs + "SLOT public 0 0x5000 1\n") == 2);
    CHECK(error_line(kRegs + "INIT 0x5000 0x100\n") == 2);
    CHECK(error_line("I 0x8048000 mov eax,ebx\n") == 1);
    CHECK(error_line(kRegs + "I 0x8048000 bogus eax\n") == 2);
    CHECK(error_line(kRegs + "WHAT\n") == 2);
}

TEST_CASE("bounds") {
    CHECK_THROWS_AS(enumerate_leakage(prog(slots("secret", 17, 0x5000) + body({"mov eax,[0x5000]"})), L6, nullptr),
                    OracleError);
    CHECK_THROWS_AS(enumerate_leakage(prog(slots("secret", 16, 0x5000) + slots("random", 9, 0x6000) +
                                           body({"mov eax,[0x5000]"})),
                                      L6, nullptr),
                    OracleError);
    CHECK_THROWS_AS(materialize(prog(body({"mov eax,0x0", "div eax"})), 0, 0), OracleError);
}

TEST_CASE("memory leakage examples") {
    // base + k*64
    const auto lines = prog(slots("secret", 1, 0x5000) + body({"movzx eax,byte ptr [0x5000]", "shl eax,0x6",
                                                                "mov ebx,[eax+0x10000]"}));
    auto g = enumerate_leakage(lines, L6, nullptr);
    CHECK(g.leaky_mem_sites == std::set<std::uint32_t>{0x8048008});

    // base + (k & 0x3f), base aligned
    const auto one_line = prog(slots("secret", 8, 0x5000) + body({"movzx eax,byte ptr [0x5000]", "and eax,0x3f",
                                                                   "mov ebx,[eax+0x10000]"}));
    g = enumerate_leakage(one_line, L6, nullptr);
    CHECK(g.leaky_mem_sites.empty());
    CHECK(g.first_seq.at(0x8048008) == 2);
}

TEST_CASE("branch leakage examples") {
    const auto masked = load_program(data_path("masked_cmp.prog"));
    const auto table = load_branch_table(data_path("cmp.bt"));
    CHECK(enumerate_leakage(masked, L6, &table).leaky_branch_sites.empty());
    const auto unmasked = load_program(data_path("unmasked_cmp.prog"));
    CHECK(enumerate_leakage(unmasked, L6, &table).leaky_branch_sites == std::set<std::uint32_t>{0x8048409});
    CHECK(enumerate_leakage(unmasked, L6, nullptr).leaky_branch_sites.size() == 1);

    // Both sides in one line: the direction differs but nobody can see it.
    BranchTable same;
    same.entries[0x8048409] = BranchEntry{0x8048409, 0x804840b, 0x8048410, 0x8048418, std::nullopt};
    CHECK(enumerate_leakage(unmasked, L6, &same).leaky_branch_sites.empty());
}

TEST_CASE("uniformity") {
    const std::string s = slots("secret", 4, 0x5000) + slots("random", 4, 0x6000);
    const auto load = "movzx eax,byte ptr [0x5000]";
    const auto rand = "movzx ebx,byte ptr [0x6000]";
    CHECK(check_uniform(prog(s + body({load, rand, "xor eax,ebx"})), full(VarId::eax), 3));
    CHECK_FALSE(check_uniform(prog(s + body({load, rand, "and eax,ebx"})), full(VarId::eax), 3));
    CHECK_FALSE(check_uniform(prog(s + body({load, rand, "xor eax,ebx", "xor eax,ebx"})), full(VarId::eax), 4));
    // Before the mask is applied the secret is in the clear.
    CHECK_FALSE(check_uniform(prog(s + body({load, rand, "xor eax,ebx"})), full(VarId::eax), 2));
    CHECK(check_uniform(prog(s + body({load, rand, "xor eax,ebx"})), *var_by_name("al"), 3));
    CHECK_THROWS_AS(check_uniform(prog(s + body({load})), full(VarId::eax), 5), OracleError);

    // No randomness: secret-dependent values are never uniform, constants always are.
    const std::string k = slots("secret", 4, 0x5000);
    CHECK_FALSE(check_uniform(prog(k + body({load, "add eax,0x3"})), full(VarId::eax), 2));
    CHECK(check_uniform(prog(k + body({load, "mov ecx,0x3"})), full(VarId::ecx), 2));
    CHECK(check_uniform(prog(k + body({load, "and eax,0x0"})), full(VarId::eax), 2));
}

TEST_CASE("relabelling the enumerated bits leaves the ground truth alone") {
    std::mt19937_64 rng(99);
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const auto g = gen_program(seed);
        const auto base = enumerate_leakage(g.program, L6, &g.table);
        auto perm = g.program;
        std::vector<unsigned> ps(g.program.secret_bits()), pr(g.program.random_bits());
        std::iota(ps.begin(), ps.end(), 0u);
        std::iota(pr.begin(), pr.end(), 0u);
        std::shuffle(ps.begin(), ps.end(), rng);
        std::shuffle(pr.begin(), pr.end(), rng);
        for (auto& s : perm.slots) {
            s.index = s.kind == AnnotKind::Secret ? ps[s.index] : pr[s.index];
        }
        const auto other = enumerate_leakage(perm, L6, &g.table);
        INFO("seed " << seed);
        CHECK(other.leaky_mem_sites == base.leaky_mem_sites);
        CHECK(other.leaky_branch_sites == base.leaky_branch_sites);
        CHECK(other.nonuniform_vars == base.nonuniform_vars);
        CHECK(other.first_seq == base.first_seq);
    }
}

TEST_CASE("concrete machine follows the recorded trace") {
    // The golden program with the upper half of the word set to 0x1234 reproduces the recorded snapshots up to the
    // table read (the table contents are not part of the program).
    const auto p = load_program(data_path("golden.prog"));
    const auto run = materialize(p, 0x1234, 0);
    const auto recorded = load_trace(data_path("golden.trace"));
    REQUIRE(run.size() == recorded.size());
    for (std::size_t i = 0; i <= 10; ++i) {
        CHECK(run[i] == recorded[i]);
    }

    const auto arith = prog(body({"mov eax,0xffffffff", "add eax,0x1", "mov ebx,0x7", "imul ebx,ebx,0x3",
                                  "mov eax,0x64", "mov edx,0x0", "mov ecx,0x7", "div ecx", "sar ebx,0x1",
                                  "neg ebx", "mov esi,ebx"}));
    const auto t = materialize(arith, 0, 0);
    CHECK(t[2].regs[0] == 0);            // 0xffffffff + 1
    CHECK(t[4].regs[1] == 21);           // 7 * 3
    CHECK(t[8].regs[0] == 14);           // 100 / 7
    CHECK(t[8].regs[3] == 2);            // 100 % 7
    CHECK(t[10].regs[1] == 0xfffffff6);  // -(21 >> 1)

    // Stepping by hand agrees with materialize.
    ConcreteMachine m(arith, 0, 0);
    for (const auto& rec : t) {
        CHECK(m.regs() == rec.regs);
        m.step(rec);
    }
}

TEST_CASE("compare") {
    const auto golden = load_program(data_path("golden.prog"));
    const auto table = load_branch_table(data_path("golden.bt"));
    const auto truth = enumerate_leakage(golden, L6, &table);
    CHECK(truth.leaky_branch_sites.size() == 2);
    CHECK(truth.leaky_mem_sites.size() == 1);
    const auto v = compare(analyze_program(golden, &table), truth);
    CHECK(v.sound);
    CHECK(v.false_negatives.empty());

    // An empty report misses all three.
    const auto empty = compare(Report{}, truth);
    CHECK_FALSE(empty.sound);
    CHECK(empty.false_negatives.size() == 3);
    for (const auto& fn : empty.false_negatives) {
        CHECK(fn.label == "unexplained");
    }
    CHECK_FALSE(empty.all_catalogued());

    // Layout-unknown findings cover leaky branches.
    const auto unknown = analyze_program(golden, nullptr);
    CHECK(compare(unknown, enumerate_leakage(golden, L6, nullptr)).sound);
}

TEST_CASE("mask reuse is a catalogued false negative") {
    const auto p = load_program(data_path("mask_reuse.prog"));
    REQUIRE(find_randomness_reuse(p).has_value());
    const auto truth = enumerate_leakage(p, L6, nullptr);
    CHECK(truth.leaky_mem_sites == std::set<std::uint32_t>{0x8048014});
    CHECK(truth.first_reuse_seq == 3);
    const auto v = compare(analyze_program(p, nullptr), truth);
    CHECK_FALSE(v.sound);
    REQUIRE(v.false_negatives.size() == 1);
    CHECK(v.false_negatives[0].label == "xor-mask-reuse");
    CHECK(v.all_catalogued());
    const auto& gaps = known_gaps();
    CHECK(std::any_of(gaps.begin(), gaps.end(), [](const KnownGap& g) { return g.label == "xor-mask-reuse"; }));
}

TEST_CASE("adding findings never costs soundness") {
    std::mt19937_64 rng(5);
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        const auto g = gen_program(seed);
        const auto truth = enumerate_leakage(g.program, L6, &g.table);
        auto r = analyze_program(g.program, &g.table);
        const bool before = compare(r, truth).sound;
        for (int k = 0; k < 5; ++k) {
            Finding f;
            f.kind = static_cast<FindingKind>(rng() % 3);
            f.site = g.program.records[rng() % g.program.records.size()].addr;
            r.findings.push_back(f);
            CHECK(compare(r, truth).sound >= before);
        }
    }
    // And adding the missed finding repairs the mask-reuse report.
    const auto p = load_program(data_path("mask_reuse.prog"));
    const auto truth = enumerate_leakage(p, L6, nullptr);
    auto r = analyze_program(p, nullptr);
    Finding f;
    f.site = 0x8048014;
    r.findings.push_back(f);
    CHECK(compare(r, truth).sound);
}

TEST_CASE("generated programs respect their options") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto g = gen_program(seed);
        INFO("seed " << seed);
        CHECK(g.program.records.size() <= 30);
        CHECK(g.program.secret_bits() >= 1);
        CHECK(g.program.secret_bits() <= 8);
        CHECK(g.program.random_bits() <= 4);
        CHECK_FALSE(find_randomness_reuse(g.program).has_value());
        const auto again = gen_program(seed);
        CHECK(again.program.records == g.program.records);
        CHECK(again.table.entries == g.table.entries);
    }
    GenOptions small;
    small.max_instructions = 12;
    small.max_secret_bits = 3;
    small.max_random_bits = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto g = gen_program(seed, small);
        CHECK(g.program.records.size() <= 12);
        CHECK(g.program.secret_bits() <= 3);
        CHECK(g.program.random_bits() == 0);
    }
}
