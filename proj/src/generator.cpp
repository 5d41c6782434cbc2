#include "cltype/generator.hpp"

#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "cltype/annotations.hpp"
#include "cltype/taint.hpp"

namespace cltype {

namespace {

constexpr std::uint32_t kSecretByte = 0x5000;
constexpr std::uint32_t kRandomByte = 0x6000;
constexpr std::uint32_t kScratch = 0x7000;
constexpr std::uint32_t kCodeBase = 0x08048000;

const char* const kRegs32[] = {"eax", "ebx", "ecx", "edx", "esi", "edi"};
const char* const kRegs16[] = {"ax", "bx", "cx", "dx", "si", "di"};
const char* const kRegs8[] = {"al", "bl", "cl", "dl"};  // esi/edi have no byte view

std::string hex(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

class Builder {
public:
    Builder(std::uint64_t seed, const GenOptions& opts) : rng_(seed), opts_(opts) {}

    GeneratedProgram build();

    // Loop body for long traces: straight-line code ending in a jump back to the start.
    std::vector<Instruction> body(unsigned size, BranchTable& table, std::vector<std::uint32_t>& addrs);

private:
    std::mt19937_64 rng_;
    GenOptions opts_;
    unsigned n_random_ = 0;
    std::vector<unsigned> hot_;  // registers currently holding secret or random data

    unsigned pick(unsigned n) { return static_cast<unsigned>(rng_() % n); }
    bool coin(unsigned percent) { return pick(100) < percent; }
    // Biased towards hot registers so secrets reach addresses and branches before being overwritten.
    unsigned reg() { return !hot_.empty() && coin(70) ? hot_[pick(static_cast<unsigned>(hot_.size()))] : pick(6); }
    unsigned other(unsigned r) {
        for (int i = 0; i < 4; ++i) {
            const unsigned o = reg();
            if (o != r) {
                return o;
            }
        }
        unsigned o = pick(5);
        return o >= r ? o + 1 : o;
    }
    void refresh_hot(const OracleProgram& p);

    std::uint32_t imm() {
        switch (pick(6)) {
        case 0: return pick(16);
        case 1: return 0xffU << (8 * pick(4));
        case 2: return (1U << (1 + pick(12))) - 1;
        case 3: return 0xffff0000U;
        case 4: return static_cast<std::uint32_t>(rng_());
        default: return pick(256);
        }
    }

    // One template instance: instruction text(s); a conditional jump is marked with `jcc`.
    struct Piece {
        std::vector<std::string> text;
        bool has_jcc = false;
    };
    Piece piece(bool allow_random_load);
};

Builder::Piece Builder::piece(bool allow_random_load) {
    static const char* const kBin[] = {"add", "sub", "and", "or", "xor"};
    static const char* const kCmpOps[] = {"cmp", "test"};
    static const char* const kJcc[] = {"je", "jne", "jb", "jae", "jl", "jge"};
    static const char* const kCmov[] = {"cmove", "cmovne", "cmovb", "cmovae", "cmovl", "cmovge"};
    static const char* const kShift[] = {"shl", "shr", "sar"};
    const unsigned r = reg(), s = other(r);
    const std::string R = kRegs32[r], S = kRegs32[s];
    Piece p;
    switch (pick(17)) {
    case 0: p.text = {"mov " + R + "," + hex(imm())}; break;
    case 1: p.text = {std::string(kBin[pick(5)]) + " " + R + "," + (coin(10) ? R : S)}; break;
    case 2: p.text = {std::string(kBin[pick(5)]) + " " + R + "," + hex(imm())}; break;
    case 3: p.text = {std::string(kShift[pick(3)]) + " " + R + "," + hex(1 + pick(31))}; break;
    case 4:
        switch (pick(3)) {
        case 0: p.text = {"imul " + R + "," + S}; break;
        case 1: p.text = {"imul " + R + "," + S + "," + hex(1 + pick(255))}; break;
        default: p.text = {"mul " + S}; break;
        }
        break;
    case 5: p.text = {std::string(coin(50) ? "not " : "neg ") + R}; break;
    case 6: {
        const bool byte = s < 4 && coin(60);
        p.text = {std::string(coin(50) ? "movzx " : "movsx ") + R + "," + (byte ? kRegs8[s] : kRegs16[s])};
        break;
    }
    case 7:
        // Partial write from another register.
        if (r < 4 && s < 4 && coin(50)) {
            p.text = {std::string("mov ") + kRegs8[r] + "," + kRegs8[s]};
        } else {
            p.text = {std::string("mov ") + kRegs16[r] + "," + kRegs16[s]};
        }
        break;
    case 8: {
        const unsigned t = pick(6);
        p.text = {"lea " + R + ",[" + S + "+" + kRegs32[t] + "*" + std::to_string(1U << pick(4)) + "+" + hex(pick(4096)) +
                  "]"};
        break;
    }
    case 9:
        p.text = {"and " + S + ",0x3fff",
                  coin(50) ? "mov " + R + ",[" + S + "+0x10000]" : "movzx " + R + ",byte ptr [" + S + "+0x10000]"};
        break;
    case 10: p.text = {"and " + S + ",0x3fff", "mov [" + S + "+0x20000]," + R}; break;
    case 11: {
        const std::string slot = "[" + hex(kScratch + 4 * pick(8)) + "]";
        switch (pick(3)) {
        case 0: p.text = {"mov " + slot + "," + R}; break;
        case 1: p.text = {"mov " + R + "," + slot}; break;
        default: p.text = {std::string(kBin[pick(5)]) + " " + R + "," + slot}; break;
        }
        break;
    }
    case 12:
        if (allow_random_load && n_random_ > 0 && coin(50)) {
            p.text = {"movzx " + R + ",byte ptr [" + hex(kRandomByte) + "]"};
        } else {
            p.text = {"movzx " + R + "," + (coin(50) ? "word" : "byte") + " ptr [" + hex(kSecretByte) + "]"};
        }
        break;
    case 13:
    case 14: {
        const std::string lhs = coin(50) ? std::string(kCmpOps[pick(2)]) + " " + R + "," + S
                                         : "cmp " + R + "," + hex(imm());
        p.text = {lhs, std::string(kJcc[pick(6)])};
        p.has_jcc = true;
        break;
    }
    case 15: {
        const unsigned t = pick(6);
        p.text = {"cmp " + R + "," + (coin(50) ? S : hex(imm())),
                  std::string(kCmov[pick(6)]) + " " + kRegs32[t] + "," + kRegs32[other(t)]};
        break;
    }
    default: p.text = {"push " + R, "pop " + S}; break;
    }
    return p;
}

void Builder::refresh_hot(const OracleProgram& p) {
    TaintTracker t;
    t.apply(program_annotations(p), 0);
    for (const auto& rec : materialize(p, 0, 0)) {
        t.step(lift(rec));
    }
    hot_.clear();
    for (unsigned i = 0; i < 6; ++i) {
        if (t.tainted(static_cast<VarId>(i))) {
            hot_.push_back(i);
        }
    }
}

GeneratedProgram Builder::build() {
    GeneratedProgram g;
    auto& p = g.program;
    const unsigned n_secret = 1 + pick(opts_.max_secret_bits);
    n_random_ = pick(opts_.max_random_bits + 1);
    // Secret bits spread over a 16-bit word so some of them land above the line offset.
    const unsigned stride = 16 / n_secret;
    const unsigned offset = pick(16 - stride * (n_secret - 1));
    for (unsigned i = 0; i < n_secret; ++i) {
        const unsigned pos = offset + i * stride;
        p.slots.push_back({AnnotKind::Secret, i, kSecretByte + pos / 8, pos % 8});
    }
    for (unsigned i = 0; i < n_random_; ++i) {
        p.slots.push_back({AnnotKind::Random, i, kRandomByte, i});
    }
    p.init[kSecretByte] = static_cast<std::uint8_t>(rng_());
    p.init[kSecretByte + 1] = static_cast<std::uint8_t>(rng_());
    p.init[kRandomByte] = static_cast<std::uint8_t>(rng_());

    RegSnapshot regs{};
    for (unsigned i = 0; i < 6; ++i) {
        regs[i] = coin(50) ? pick(0x4000) : static_cast<std::uint32_t>(rng_());
    }
    regs[static_cast<unsigned>(VarId::ebp)] = kScratch;
    regs[static_cast<unsigned>(VarId::esp)] = 0x9000;

    std::uint32_t addr = kCodeBase;
    const auto append = [&](const std::string& text, std::uint32_t target_if_jump) {
        TraceRecord rec;
        rec.seq = p.records.size();
        rec.addr = addr;
        rec.op = parse_instruction(text + (target_if_jump != 0 ? " " + hex(target_if_jump) : ""));
        if (rec.seq == 0) {
            rec.regs = regs;
        }
        addr += 2 + pick(5);
        p.records.push_back(std::move(rec));
    };

    // Prologue: a secret in a register and, when there is one, the random byte in another.
    const unsigned rs = reg();
    append("movzx " + std::string(kRegs32[rs]) + ",word ptr [" + hex(kSecretByte) + "]", 0);
    if (n_random_ > 0) {
        append("movzx " + std::string(kRegs32[other(rs)]) + ",byte ptr [" + hex(kRandomByte) + "]", 0);
    }

    const unsigned target = 8 + pick(opts_.max_instructions - 7);
    unsigned attempts = 0;
    while (p.records.size() < target && attempts++ < 500) {
        refresh_hot(p);
        const Piece pc = piece(true);
        if (p.records.size() + pc.text.size() > target) {
            continue;
        }
        const std::size_t mark = p.records.size();
        const std::uint32_t mark_addr = addr;
        for (std::size_t i = 0; i < pc.text.size(); ++i) {
            const bool jcc = pc.has_jcc && i + 1 == pc.text.size();
            // A jump's fallthrough is only known after its own size is chosen.
            if (jcc) {
                const std::uint32_t size = 2 + pick(5);
                append(pc.text[i], addr + size);
                addr = p.records.back().op.op(0).imm;
            } else {
                append(pc.text[i], 0);
            }
        }
        if (find_randomness_reuse(p)) {
            p.records.resize(mark);
            addr = mark_addr;
            continue;
        }
        if (pc.has_jcc && coin(90)) {
            const auto& j = p.records.back();
            BranchEntry e;
            e.cond_addr = j.addr;
            e.a = j.op.op(0).imm;
            e.b = e.a + 1 + pick(120);
            e.c = e.b + pick(120);
            g.table.entries[e.cond_addr] = e;
        }
    }
    return g;
}

std::vector<Instruction> Builder::body(unsigned size, BranchTable& table, std::vector<std::uint32_t>& addrs) {
    n_random_ = 1;
    std::vector<Instruction> out;
    std::uint32_t addr = kCodeBase;
    const auto push = [&](const std::string& text) {
        out.push_back(parse_instruction(text));
        addrs.push_back(addr);
    };
    const auto jcc = [&](const std::string& text) {
        const std::uint32_t len = 2;
        push(text + " " + hex(addr + len));
        BranchEntry e;
        e.cond_addr = addr;
        e.a = addr + len;
        e.b = e.a + 1 + pick(120);
        e.c = e.b + pick(120);
        table.entries[e.cond_addr] = e;
        addr += len;
    };
    // Fixed kernel: a secret-indexed table load and a secret-dependent branch.
    for (const char* text : {"movzx eax,byte ptr [0x5000]", "shl eax,0x6", "mov ebx,[eax+0x10000]", "cmp eax,0x1000"}) {
        push(text);
        addr += 3;
    }
    jcc("jb");
    hot_ = {0, 1};
    while (out.size() + 1 < size) {
        const Piece pc = piece(true);
        if (out.size() + pc.text.size() + 1 > size) {
            continue;
        }
        for (std::size_t i = 0; i < pc.text.size(); ++i) {
            const std::uint32_t len = 2 + pick(5);
            if (pc.has_jcc && i + 1 == pc.text.size()) {
                jcc(pc.text[i]);
            } else {
                push(pc.text[i]);
                addr += len;
            }
        }
    }
    push("jmp " + hex(kCodeBase));
    return out;
}

}  // namespace

GeneratedProgram gen_program(std::uint64_t seed, const GenOptions& opts) {
    if (opts.max_instructions < 8 || opts.max_secret_bits == 0 || opts.max_secret_bits > 8 ||
        opts.max_random_bits > 8) {
        throw std::invalid_argument("gen_program: options out of range");
    }
    return Builder(seed, opts).build();
}

TraceArtifacts gen_trace(std::uint64_t length, unsigned body_size, std::uint64_t seed, std::ostream& out) {
    if (length > kMaxTraceLength) {
        throw std::invalid_argument("trace length " + std::to_string(length) + " exceeds " +
                                    std::to_string(kMaxTraceLength));
    }
    if (body_size < 6) {
        throw std::invalid_argument("loop body needs at least 6 instructions");
    }
    TraceArtifacts art;
    BranchTable table;
    std::vector<std::uint32_t> addrs;
    const auto body = Builder(seed, {}).body(body_size, table, addrs);

    OracleProgram seed_prog;
    TraceRecord first;
    for (unsigned i = 0; i < 6; ++i) {
        first.regs[i] = static_cast<std::uint32_t>(std::mt19937_64(seed + i)() % 0x4000);
    }
    first.regs[static_cast<unsigned>(VarId::ebp)] = kScratch;
    first.regs[static_cast<unsigned>(VarId::esp)] = 0x9000;
    seed_prog.records.push_back(first);
    ConcreteMachine m(seed_prog, 0, 0);

    TraceRecord rec;
    for (std::uint64_t i = 0; i < length; ++i) {
        const std::size_t k = i % body.size();
        rec.seq = i;
        rec.addr = addrs[k];
        rec.op = body[k];
        rec.regs = m.regs();
        m.step(rec);
        out << serialize_record(rec) << '\n';
    }

    AnnotationSet ann;
    if (length > 0) {
        ann.entries.push_back({AnnotKind::Secret, ByteRange{kSecretByte, 1}, 0});
        ann.entries.push_back({AnnotKind::Random, ByteRange{kRandomByte, 1}, 0});
    }
    art.annotations = serialize_annotations(ann);
    art.branch_table = serialize_branch_table(table);
    return art;
}

}  // namespace cltype
