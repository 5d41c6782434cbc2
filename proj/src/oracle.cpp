#include "cltype/oracle.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "cltype/errors.hpp"

namespace cltype {

namespace {

std::uint32_t width_mask(unsigned w) { return w >= 32 ? 0xffffffffU : (1U << w) - 1; }

std::uint32_t sext(std::uint32_t v, unsigned w) {
    if (w >= 32) {
        return v;
    }
    const std::uint32_t sign = 1U << (w - 1);
    return ((v & width_mask(w)) ^ sign) - sign;
}

struct Obs {
    std::uint32_t site;
    bool branch;
    std::uint32_t value;  // byte address for memory, 0/1 for branches
};

// Concrete execution of one instruction at a time. Four architectural flags; jl/jge use sf != of.
class Machine {
public:
    Machine(const OracleProgram& p, std::uint32_t secret, std::uint32_t random)
        : Machine(p.init, p.records.empty() ? RegSnapshot{} : p.records.front().regs, p.slots, secret, random) {}

    Machine(const std::map<std::uint32_t, std::uint8_t>& init, const RegSnapshot& regs, const std::vector<Slot>& slots,
            std::uint32_t secret, std::uint32_t random)
        : init_(init), regs_(regs) {
        for (const auto& s : slots) {
            const std::uint32_t bits = s.kind == AnnotKind::Secret ? secret : random;
            std::uint8_t b = byte(s.byte_addr);
            b = static_cast<std::uint8_t>((b & ~(1U << s.bit)) | (((bits >> s.index) & 1U) << s.bit));
            mem_[s.byte_addr] = b;
        }
    }

    const RegSnapshot& regs() const { return regs_; }

    std::uint32_t get(VarRef r) const {
        if (!is_gpr(r.id)) {
            throw OracleError("oracle: only general-purpose registers are observable");
        }
        return (regs_[static_cast<unsigned>(r.id)] >> r.lo) & width_mask(r.width);
    }

    void step(const TraceRecord& rec, std::vector<Obs>* obs);

private:
    const std::map<std::uint32_t, std::uint8_t>& init_;
    RegSnapshot regs_{};
    std::unordered_map<std::uint32_t, std::uint8_t> mem_;
    bool zf_ = false, cf_ = false, sf_ = false, of_ = false;
    const TraceRecord* rec_ = nullptr;
    std::vector<Obs>* obs_ = nullptr;

    std::uint8_t byte(std::uint32_t a) const {
        if (const auto it = mem_.find(a); it != mem_.end()) {
            return it->second;
        }
        if (const auto it = init_.find(a); it != init_.end()) {
            return it->second;
        }
        return public_byte(a);
    }

    void set(VarRef r, std::uint32_t v) {
        auto& reg = regs_[static_cast<unsigned>(r.id)];
        const std::uint32_t m = width_mask(r.width) << r.lo;
        reg = (reg & ~m) | ((v << r.lo) & m);
    }

    void observe_mem(std::uint32_t a) {
        if (obs_ != nullptr) {
            obs_->push_back({rec_->addr, false, a});
        }
    }

    std::uint32_t load(std::uint32_t a, unsigned bytes) {
        observe_mem(a);
        std::uint32_t v = 0;
        for (unsigned i = 0; i < bytes; ++i) {
            v |= std::uint32_t{byte(a + i)} << (8 * i);
        }
        return v;
    }

    void store(std::uint32_t a, std::uint32_t v, unsigned bytes) {
        observe_mem(a);
        for (unsigned i = 0; i < bytes; ++i) {
            mem_[a + i] = static_cast<std::uint8_t>(v >> (8 * i));
        }
    }

    std::uint32_t read(const Operand& o, unsigned w) {
        switch (o.kind) {
        case Operand::Kind::Reg: return get(o.reg);
        case Operand::Kind::Imm: return o.imm & width_mask(w);
        case Operand::Kind::Mem: return load(resolve_address(o.mem, regs_), w / 8);
        case Operand::Kind::None: break;
        }
        throw OracleError("oracle: missing operand");
    }

    void write(const Operand& o, std::uint32_t v, unsigned w) {
        if (o.is_reg()) {
            set(o.reg, v);
        } else if (o.is_mem()) {
            store(resolve_address(o.mem, regs_), v, w / 8);
        } else {
            throw OracleError("oracle: bad destination");
        }
    }

    void result_flags(std::uint32_t r, unsigned w) {
        zf_ = (r & width_mask(w)) == 0;
        sf_ = ((r >> (w - 1)) & 1U) != 0;
    }

    bool condition(Mnemonic m) const {
        switch (m) {
        case Mnemonic::je:
        case Mnemonic::cmove: return zf_;
        case Mnemonic::jne:
        case Mnemonic::cmovne: return !zf_;
        case Mnemonic::jb:
        case Mnemonic::cmovb: return cf_;
        case Mnemonic::jae:
        case Mnemonic::cmovae: return !cf_;
        case Mnemonic::jl:
        case Mnemonic::cmovl: return sf_ != of_;
        case Mnemonic::jge:
        case Mnemonic::cmovge: return sf_ == of_;
        default: return false;
        }
    }
};

void Machine::step(const TraceRecord& rec, std::vector<Obs>* obs) {
    rec_ = &rec;
    obs_ = obs;
    const Instruction& ins = rec.op;
    const auto m = ins.mnemonic;
    const auto op = [&](unsigned i) -> const Operand& { return ins.op(i); };
    const auto w = [&](unsigned i) { return operand_width(ins, i); };
    auto& esp = regs_[static_cast<unsigned>(VarId::esp)];

    switch (m) {
    case Mnemonic::mov: write(op(0), read(op(1), w(0)), w(0)); break;
    case Mnemonic::movzx: set(op(0).reg, read(op(1), w(1))); break;
    case Mnemonic::movsx: set(op(0).reg, sext(read(op(1), w(1)), w(1))); break;
    case Mnemonic::lea: set(op(0).reg, resolve_address(op(1).mem, regs_)); break;
    case Mnemonic::add:
    case Mnemonic::sub:
    case Mnemonic::cmp:
    case Mnemonic::and_:
    case Mnemonic::or_:
    case Mnemonic::xor_:
    case Mnemonic::test: {
        const unsigned n = w(0);
        const std::uint32_t mask = width_mask(n);
        const std::uint32_t a = read(op(0), n);
        const std::uint32_t b = read(op(1), n);
        std::uint32_t r = 0;
        if (m == Mnemonic::add) {
            r = (a + b) & mask;
            cf_ = r < a;
            of_ = (((~(a ^ b)) & (r ^ a)) >> (n - 1) & 1U) != 0;
        } else if (m == Mnemonic::sub || m == Mnemonic::cmp) {
            r = (a - b) & mask;
            cf_ = a < b;
            of_ = (((a ^ b) & (r ^ a)) >> (n - 1) & 1U) != 0;
        } else {
            r = m == Mnemonic::or_ ? (a | b) : m == Mnemonic::xor_ ? (a ^ b) : (a & b);
            cf_ = of_ = false;
        }
        result_flags(r, n);
        if (m != Mnemonic::cmp && m != Mnemonic::test) {
            write(op(0), r, n);
        }
        break;
    }
    case Mnemonic::not_: write(op(0), ~read(op(0), w(0)), w(0)); break;
    case Mnemonic::neg: {
        const unsigned n = w(0);
        const std::uint32_t a = read(op(0), n);
        const std::uint32_t r = (0U - a) & width_mask(n);
        result_flags(r, n);
        cf_ = a != 0;
        of_ = a == (1U << (n - 1));
        write(op(0), r, n);
        break;
    }
    case Mnemonic::shl:
    case Mnemonic::shr:
    case Mnemonic::sar: {
        const unsigned n = w(0);
        const unsigned count = (op(1).is_imm() ? op(1).imm : get(op(1).reg)) & 0x1f;
        const std::uint32_t a = read(op(0), n);
        const auto bit = [&](unsigned i) { return ((a >> i) & 1U) != 0; };
        std::uint64_t r = 0;
        if (m == Mnemonic::shl) {
            r = (std::uint64_t{a} << count) & width_mask(n);
        } else if (m == Mnemonic::shr) {
            r = a >> count;
        } else {
            r = static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(sext(a, n))) >> count) &
                width_mask(n);
        }
        if (count != 0) {
            result_flags(static_cast<std::uint32_t>(r), n);
            if (m == Mnemonic::shl) {
                cf_ = count <= n && bit(n - count);
                of_ = (((r >> (n - 1)) & 1U) != 0) != cf_;
            } else {
                cf_ = count <= n ? bit(count - 1) : (m == Mnemonic::sar && bit(n - 1));
                of_ = m == Mnemonic::shr && bit(n - 1);
            }
        }
        write(op(0), static_cast<std::uint32_t>(r), n);
        break;
    }
    case Mnemonic::mul:
    case Mnemonic::imul: {
        std::uint32_t x = 0, y = 0;
        if (ins.nops == 1) {
            x = get(full(VarId::eax));
            y = read(op(0), 32);
        } else if (ins.nops == 2) {
            x = get(op(0).reg);
            y = read(op(1), 32);
        } else {
            x = read(op(1), 32);
            y = read(op(2), 32);
        }
        std::uint64_t p = 0;
        bool overflow = false;
        if (m == Mnemonic::imul) {
            const std::int64_t sp = std::int64_t{static_cast<std::int32_t>(x)} * static_cast<std::int32_t>(y);
            p = static_cast<std::uint64_t>(sp);
            overflow = sp != static_cast<std::int32_t>(sp);
        } else {
            p = std::uint64_t{x} * y;
            overflow = (p >> 32) != 0;
        }
        cf_ = of_ = overflow;
        if (ins.nops == 1) {
            set(full(VarId::edx), static_cast<std::uint32_t>(p >> 32));
            set(full(VarId::eax), static_cast<std::uint32_t>(p));
        } else {
            set(op(0).reg, static_cast<std::uint32_t>(p));
        }
        break;
    }
    case Mnemonic::div: {
        const std::uint32_t d = read(op(0), 32);
        if (d == 0) {
            throw OracleError("oracle: division by zero at " + to_string(ins));
        }
        const std::uint64_t n = (std::uint64_t{get(full(VarId::edx))} << 32) | get(full(VarId::eax));
        set(full(VarId::edx), static_cast<std::uint32_t>(n % d));
        set(full(VarId::eax), static_cast<std::uint32_t>(n / d));
        break;
    }
    case Mnemonic::jmp: break;
    case Mnemonic::je:
    case Mnemonic::jne:
    case Mnemonic::jb:
    case Mnemonic::jae:
    case Mnemonic::jl:
    case Mnemonic::jge:
        if (obs_ != nullptr) {
            obs_->push_back({rec.addr, true, condition(m) ? 1U : 0U});
        }
        break;
    case Mnemonic::cmove:
    case Mnemonic::cmovne:
    case Mnemonic::cmovb:
    case Mnemonic::cmovae:
    case Mnemonic::cmovl:
    case Mnemonic::cmovge: {
        // The source is read whether or not the move happens.
        const std::uint32_t v = read(op(1), w(0));
        if (condition(m)) {
            set(op(0).reg, v);
        }
        break;
    }
    case Mnemonic::push: {
        const std::uint32_t v = read(op(0), 32);
        store(esp - 4, v, 4);
        esp -= 4;
        break;
    }
    case Mnemonic::pop: {
        const std::uint32_t v = load(esp, 4);
        esp += 4;
        write(op(0), v, 32);
        break;
    }
    }
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= h >> 31;
    h *= 0xbf58476d1ce4e5b9ULL;
    return h ^ (h >> 29);
}

void check_bounds(const OracleProgram& p) {
    if (p.records.size() > kStepBudget) {
        throw OracleError("oracle: step budget exceeded (" + std::to_string(p.records.size()) + " records)");
    }
    const unsigned s = p.secret_bits(), r = p.random_bits();
    if (s > kMaxSecretBits || r > kMaxRandomBits || s + r > kMaxAssignmentBits) {
        throw OracleError("oracle: " + std::to_string(s) + " secret and " + std::to_string(r) +
                          " random bits exceed the enumeration bound");
    }
}

std::vector<Obs> run(const OracleProgram& p, Machine& m) {
    std::vector<Obs> obs;
    for (const auto& rec : p.records) {
        m.step(rec, &obs);
    }
    return obs;
}

// Random-bit dependencies per register and byte. Coarse on purpose: it only labels false negatives.
class ReuseTracker {
public:
    explicit ReuseTracker(const OracleProgram& p) {
        for (const auto& s : p.slots) {
            if (s.kind == AnnotKind::Random) {
                mem_[s.byte_addr] |= 1U << s.index;
            }
        }
    }

    // `regs` are the concrete values before `rec`.
    bool step(const TraceRecord& rec, const RegSnapshot& regs) {
        const Instruction& ins = rec.op;
        const auto m = ins.mnemonic;
        const auto src = [&](unsigned i) -> std::uint32_t {
            const Operand& o = ins.op(i);
            if (o.is_reg()) {
                return reg(o.reg.id);
            }
            if (o.is_mem()) {
                return addr_deps(o.mem) | bytes(resolve_address(o.mem, regs), operand_width(ins, i) / 8);
            }
            return 0;
        };
        const auto dst = [&](unsigned i, std::uint32_t d) {
            const Operand& o = ins.op(i);
            if (o.is_reg()) {
                auto& r = regs_[static_cast<unsigned>(o.reg.id)];
                r = o.reg.width == 32 ? d : (r | d);
            } else if (o.is_mem()) {
                const std::uint32_t a = resolve_address(o.mem, regs);
                for (unsigned b = 0; b < operand_width(ins, i) / 8; ++b) {
                    mem_[a + b] = d;
                }
            }
        };
        const bool same = ins.nops >= 2 && ins.ops[0].is_reg() && ins.ops[1].is_reg() && ins.ops[0].reg == ins.ops[1].reg;
        bool reuse = false;
        switch (m) {
        case Mnemonic::add:
        case Mnemonic::sub:
        case Mnemonic::cmp:
        case Mnemonic::and_:
        case Mnemonic::or_:
        case Mnemonic::xor_:
        case Mnemonic::test: {
            const std::uint32_t a = src(0), b = src(1);
            reuse = (a & b) != 0 && (!same || m == Mnemonic::add);
            const std::uint32_t d = (same && (m == Mnemonic::xor_ || m == Mnemonic::sub)) ? 0 : (a | b);
            flags_ = d;
            if (m != Mnemonic::cmp && m != Mnemonic::test) {
                dst(0, d);
            }
            break;
        }
        case Mnemonic::mul:
        case Mnemonic::imul: {
            std::uint32_t a = 0, b = 0;
            if (ins.nops == 1) {
                a = reg(VarId::eax);
                b = src(0);
            } else if (ins.nops == 2) {
                a = src(0);
                b = src(1);
            } else {
                a = src(1);
                b = src(2);
            }
            reuse = (a & b) != 0;  // includes imul r,r
            flags_ = a | b;
            if (ins.nops == 1) {
                regs_[static_cast<unsigned>(VarId::eax)] = regs_[static_cast<unsigned>(VarId::edx)] = a | b;
            } else {
                dst(0, a | b);
            }
            break;
        }
        case Mnemonic::div: {
            const std::uint32_t d = src(0) | reg(VarId::eax) | reg(VarId::edx);
            regs_[static_cast<unsigned>(VarId::eax)] = regs_[static_cast<unsigned>(VarId::edx)] = d;
            break;
        }
        case Mnemonic::mov:
        case Mnemonic::movzx:
        case Mnemonic::movsx: dst(0, src(1)); break;
        case Mnemonic::lea: dst(0, addr_deps(ins.op(1).mem)); break;
        case Mnemonic::not_: dst(0, src(0)); break;
        case Mnemonic::neg:
        case Mnemonic::shl:
        case Mnemonic::shr:
        case Mnemonic::sar: {
            const std::uint32_t d = src(0) | (ins.nops > 1 ? src(1) : 0);
            flags_ |= d;
            dst(0, d);
            break;
        }
        case Mnemonic::cmove:
        case Mnemonic::cmovne:
        case Mnemonic::cmovb:
        case Mnemonic::cmovae:
        case Mnemonic::cmovl:
        case Mnemonic::cmovge: dst(0, src(0) | src(1) | flags_); break;
        case Mnemonic::push: {
            const std::uint32_t d = src(0);
            const std::uint32_t a = regs[static_cast<unsigned>(VarId::esp)] - 4;
            for (unsigned b = 0; b < 4; ++b) {
                mem_[a + b] = d;
            }
            break;
        }
        case Mnemonic::pop: {
            const std::uint32_t d = bytes(regs[static_cast<unsigned>(VarId::esp)], 4);
            if (ins.op(0).is_reg()) {
                dst(0, d);
            } else {
                RegSnapshot after = regs;
                after[static_cast<unsigned>(VarId::esp)] += 4;
                const std::uint32_t a = resolve_address(ins.op(0).mem, after);
                for (unsigned b = 0; b < 4; ++b) {
                    mem_[a + b] = d;
                }
            }
            break;
        }
        default: break;
        }
        return reuse;
    }

private:
    std::array<std::uint32_t, kNumGpr> regs_{};
    std::uint32_t flags_ = 0;
    std::unordered_map<std::uint32_t, std::uint32_t> mem_;

    std::uint32_t reg(VarId id) const { return is_gpr(id) ? regs_[static_cast<unsigned>(id)] : 0; }

    std::uint32_t addr_deps(const MemOperand& m) const {
        return (m.base ? reg(*m.base) : 0) | (m.index ? reg(*m.index) : 0);
    }

    std::uint32_t bytes(std::uint32_t a, unsigned n) const {
        std::uint32_t d = 0;
        for (unsigned i = 0; i < n; ++i) {
            if (const auto it = mem_.find(a + i); it != mem_.end()) {
                d |= it->second;
            }
        }
        return d;
    }
};

std::string hex(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%x", v);
    return buf;
}

std::uint32_t parse_hex(std::string_view tok, const std::string& file, std::size_t lineno) {
    if (tok.size() < 3 || tok[0] != '0' || (tok[1] != 'x' && tok[1] != 'X')) {
        throw ParseError(file, lineno, "expected a 0x number, got '" + std::string(tok) + "'");
    }
    std::uint64_t v = 0;
    for (char c : tok.substr(2)) {
        int d = 0;
        if (c >= '0' && c <= '9') {
            d = c - '0';
        } else if (c >= 'a' && c <= 'f') {
            d = c - 'a' + 10;
        } else if (c >= 'A' && c <= 'F') {
            d = c - 'A' + 10;
        } else {
            throw ParseError(file, lineno, "bad hex digit in '" + std::string(tok) + "'");
        }
        v = v * 16 + static_cast<unsigned>(d);
        if (v > 0xffffffffULL) {
            throw ParseError(file, lineno, "number out of range: " + std::string(tok));
        }
    }
    return static_cast<std::uint32_t>(v);
}

}  // namespace

unsigned OracleProgram::secret_bits() const {
    unsigned n = 0;
    for (const auto& s : slots) {
        if (s.kind == AnnotKind::Secret) {
            n = std::max(n, s.index + 1);
        }
    }
    return n;
}

unsigned OracleProgram::random_bits() const {
    unsigned n = 0;
    for (const auto& s : slots) {
        if (s.kind == AnnotKind::Random) {
            n = std::max(n, s.index + 1);
        }
    }
    return n;
}

std::uint8_t public_byte(std::uint32_t addr) noexcept {
    return static_cast<std::uint8_t>(mix(0x5eed, addr) >> 24);
}

OracleProgram parse_program(std::string_view text, const std::string& file) {
    OracleProgram p;
    std::set<std::pair<std::uint32_t, unsigned>> used_bits;
    std::set<std::pair<AnnotKind, unsigned>> used_slots;
    std::size_t lineno = 0;
    std::optional<RegSnapshot> initial;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos || line[first] == '#') {
            continue;
        }
        line.remove_prefix(first);
        if (line.starts_with("T ")) {
            auto rec = parse_record(line, file, lineno);
            if (rec.seq != p.records.size()) {
                throw ParseError(file, lineno,
                                 "non-contiguous sequence: expected " + std::to_string(p.records.size()) + ", got " +
                                     std::to_string(rec.seq));
            }
            p.records.push_back(std::move(rec));
            continue;
        }
        if (line.starts_with("I ")) {
            // Instruction without seq or snapshot: "I 0x<addr> <instruction>".
            auto rest = line.substr(2);
            const auto a = rest.find_first_not_of(" \t");
            rest = a == std::string_view::npos ? std::string_view{} : rest.substr(a);
            const auto sp = rest.find(' ');
            TraceRecord rec;
            rec.seq = p.records.size();
            rec.addr = parse_hex(rest.substr(0, sp), file, lineno);
            if (sp == std::string_view::npos) {
                throw ParseError(file, lineno, "missing instruction");
            }
            try {
                rec.op = parse_instruction(rest.substr(sp + 1));
            } catch (const ParseError& e) {
                const std::string msg = e.what();
                throw ParseError(file, lineno, msg.substr(msg.find(": ") + 2));
            }
            if (rec.seq == 0) {
                if (!initial) {
                    throw ParseError(file, lineno, "an I line needs a REGS line before it");
                }
                rec.regs = *initial;
            }
            p.records.push_back(std::move(rec));
            continue;
        }
        if (line.starts_with("REGS ")) {
            if (!p.records.empty()) {
                throw ParseError(file, lineno, "REGS must come before the first instruction");
            }
            try {
                initial = parse_snapshot(line.substr(5));
            } catch (const ParseError& e) {
                const std::string msg = e.what();
                throw ParseError(file, lineno, msg.substr(msg.find(": ") + 2));
            }
            continue;
        }
        std::istringstream in{std::string(line)};
        std::string kw;
        in >> kw;
        if (kw == "SLOT") {
            std::string kind, addr;
            long index = -1, bit = -1;
            if (!(in >> kind >> index >> addr >> bit) || (kind != "secret" && kind != "random") || index < 0 ||
                index >= 32 || bit < 0 || bit > 7) {
                throw ParseError(file, lineno, "expected SLOT secret|random <bit-index> 0x<addr> <bit 0-7>");
            }
            Slot s{kind == "secret" ? AnnotKind::Secret : AnnotKind::Random, static_cast<unsigned>(index),
                   parse_hex(addr, file, lineno), static_cast<unsigned>(bit)};
            if (!used_bits.insert({s.byte_addr, s.bit}).second) {
                throw ParseError(file, lineno, "memory bit bound twice");
            }
            if (!used_slots.insert({s.kind, s.index}).second) {
                throw ParseError(file, lineno, kind + " bit " + std::to_string(index) + " bound twice");
            }
            p.slots.push_back(s);
        } else if (kw == "INIT") {
            std::string addr, value;
            if (!(in >> addr >> value)) {
                throw ParseError(file, lineno, "expected INIT 0x<addr> 0x<byte>");
            }
            const auto v = parse_hex(value, file, lineno);
            if (v > 0xff) {
                throw ParseError(file, lineno, "INIT value is not a byte");
            }
            p.init[parse_hex(addr, file, lineno)] = static_cast<std::uint8_t>(v);
        } else {
            throw ParseError(file, lineno, "unknown line kind '" + kw + "'");
        }
        std::string rest;
        if (in >> rest) {
            throw ParseError(file, lineno, "trailing text '" + rest + "'");
        }
    }
    return p;
}

OracleProgram load_program(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_program(ss.str(), path);
}

std::string serialize_program(const OracleProgram& p) {
    std::string out;
    for (const auto& [a, v] : p.init) {
        out += "INIT " + hex(a) + " " + hex(v) + "\n";
    }
    for (const auto& s : p.slots) {
        out += std::string("SLOT ") + (s.kind == AnnotKind::Secret ? "secret " : "random ") + std::to_string(s.index) +
               " " + hex(s.byte_addr) + " " + std::to_string(s.bit) + "\n";
    }
    // Snapshots of the all-zero assignment, so the file is also a valid trace of one run.
    for (const auto& r : materialize(p, 0, 0)) {
        out += serialize_record(r) + "\n";
    }
    return out;
}

std::vector<TraceRecord> materialize(const OracleProgram& p, std::uint32_t secret, std::uint32_t random) {
    check_bounds(p);
    Machine m(p, secret, random);
    std::vector<TraceRecord> out;
    out.reserve(p.records.size());
    for (std::size_t i = 0; i < p.records.size(); ++i) {
        TraceRecord r = p.records[i];
        r.seq = i;
        r.regs = m.regs();
        m.step(r, nullptr);
        out.push_back(std::move(r));
    }
    return out;
}

AnnotationSet program_annotations(const OracleProgram& p) {
    std::map<std::pair<AnnotKind, std::uint32_t>, std::uint64_t> masks;
    for (const auto& s : p.slots) {
        masks[{s.kind, s.byte_addr}] |= std::uint64_t{1} << s.bit;
    }
    AnnotationSet set;
    for (const auto& [key, mask] : masks) {
        set.entries.push_back({key.first, ByteRange{key.second, 1}, 0, mask});
    }
    return set;
}

GroundTruth enumerate_leakage(const OracleProgram& p, CacheGeometry g, const BranchTable* table) {
    check_bounds(p);
    GroundTruth truth;
    const std::uint32_t n_secret = 1U << p.secret_bits();
    const std::uint32_t n_random = 1U << p.random_bits();

    // Straight-line programs produce the same observation layout on every run.
    std::vector<std::uint32_t> sites;
    std::vector<bool> is_branch;
    std::vector<std::size_t> slot_site;
    {
        Machine m0(p, 0, 0);
        const auto obs = run(p, m0);
        std::map<std::uint32_t, std::size_t> index;
        std::uint64_t seq = 0;
        std::size_t k = 0;
        Machine m(p, 0, 0);
        ReuseTracker reuse(p);
        for (const auto& rec : p.records) {
            if (reuse.step(rec, m.regs())) {
                truth.reuse_sites.insert(rec.addr);
                if (!truth.first_reuse_seq) {
                    truth.first_reuse_seq = seq;
                }
            }
            std::vector<Obs> here;
            m.step(rec, &here);
            for (const auto& o : here) {
                auto [it, fresh] = index.emplace(o.site, sites.size());
                if (fresh) {
                    sites.push_back(o.site);
                    is_branch.push_back(o.branch);
                    truth.first_seq.emplace(o.site, seq);
                }
                slot_site.push_back(it->second);
                ++k;
            }
            ++seq;
        }
        if (k != obs.size()) {
            throw OracleError("oracle: inconsistent observation layout");
        }
    }

    const auto value = [&](const Obs& o) -> std::uint64_t {
        return o.branch ? o.value : cache_line(o.value, g);
    };
    std::vector<std::vector<std::uint64_t>> reference(sites.size()), current(sites.size());
    std::vector<bool> leaky(sites.size(), false);
    std::vector<std::vector<std::uint32_t>> final_ref(kNumGpr), final_cur(kNumGpr);
    std::vector<bool> nonuniform(kNumGpr, false);

    for (std::uint32_t s = 0; s < n_secret; ++s) {
        for (auto& v : current) {
            v.clear();
        }
        for (auto& v : final_cur) {
            v.clear();
        }
        for (std::uint32_t r = 0; r < n_random; ++r) {
            Machine m(p, s, r);
            const auto obs = run(p, m);
            if (obs.size() != slot_site.size()) {
                throw OracleError("oracle: observation count changed between runs");
            }
            std::vector<std::uint64_t> h(sites.size(), 0);
            for (std::size_t k = 0; k < obs.size(); ++k) {
                auto& hv = h[slot_site[k]];
                hv = mix(hv, value(obs[k]));
            }
            for (std::size_t i = 0; i < sites.size(); ++i) {
                current[i].push_back(h[i]);
            }
            for (unsigned v = 0; v < kNumGpr; ++v) {
                final_cur[v].push_back(m.regs()[v]);
            }
        }
        for (auto& v : current) {
            std::sort(v.begin(), v.end());
        }
        for (auto& v : final_cur) {
            std::sort(v.begin(), v.end());
        }
        if (s == 0) {
            reference.swap(current);
            final_ref.swap(final_cur);
            continue;
        }
        for (std::size_t i = 0; i < sites.size(); ++i) {
            if (current[i] != reference[i]) {
                leaky[i] = true;
            }
        }
        for (unsigned v = 0; v < kNumGpr; ++v) {
            if (final_cur[v] != final_ref[v]) {
                nonuniform[v] = true;
            }
        }
    }

    for (std::size_t i = 0; i < sites.size(); ++i) {
        if (!leaky[i]) {
            continue;
        }
        if (!is_branch[i]) {
            truth.leaky_mem_sites.insert(sites[i]);
            continue;
        }
        const BranchEntry* e = table != nullptr ? table->find(sites[i]) : nullptr;
        if (e == nullptr || distinguishable(*e, g)) {
            truth.leaky_branch_sites.insert(sites[i]);
        }
    }
    for (unsigned v = 0; v < kNumGpr; ++v) {
        if (nonuniform[v]) {
            truth.nonuniform_vars.push_back(static_cast<VarId>(v));
        }
    }
    return truth;
}

bool check_uniform(const OracleProgram& p, VarRef var, std::uint64_t at_seq) {
    check_bounds(p);
    if (at_seq > p.records.size()) {
        throw OracleError("oracle: seq " + std::to_string(at_seq) + " is past the end of the program");
    }
    const std::uint32_t n_secret = 1U << p.secret_bits();
    const std::uint32_t n_random = 1U << p.random_bits();
    std::vector<std::uint32_t> reference, current;
    for (std::uint32_t s = 0; s < n_secret; ++s) {
        current.clear();
        for (std::uint32_t r = 0; r < n_random; ++r) {
            Machine m(p, s, r);
            for (std::uint64_t i = 0; i < at_seq; ++i) {
                m.step(p.records[i], nullptr);
            }
            current.push_back(m.get(var));
        }
        std::sort(current.begin(), current.end());
        if (s == 0) {
            reference = current;
        } else if (current != reference) {
            return false;
        }
    }
    return true;
}

struct ConcreteMachine::Impl {
    std::map<std::uint32_t, std::uint8_t> init;  // owned here, the machine keeps a reference
    Machine machine;
    Impl(const OracleProgram& p, std::uint32_t s, std::uint32_t r)
        : init(p.init), machine(init, p.records.empty() ? RegSnapshot{} : p.records.front().regs, p.slots, s, r) {}
};

ConcreteMachine::ConcreteMachine(const OracleProgram& p, std::uint32_t secret, std::uint32_t random)
    : impl_(std::make_unique<Impl>(p, secret, random)) {}
ConcreteMachine::~ConcreteMachine() = default;
ConcreteMachine::ConcreteMachine(ConcreteMachine&&) noexcept = default;

const RegSnapshot& ConcreteMachine::regs() const { return impl_->machine.regs(); }
void ConcreteMachine::step(const TraceRecord& rec) { impl_->machine.step(rec, nullptr); }

std::optional<std::uint64_t> find_randomness_reuse(const OracleProgram& p) {
    Machine m(p, 0, 0);
    ReuseTracker reuse(p);
    for (std::size_t i = 0; i < p.records.size(); ++i) {
        if (reuse.step(p.records[i], m.regs())) {
            return i;
        }
        m.step(p.records[i], nullptr);
    }
    return std::nullopt;
}

const std::vector<KnownGap>& known_gaps() {
    static const std::vector<KnownGap> gaps = {
        {"xor-mask-reuse",
         "a random mask is xored in twice, so it cancels, but XOR.II still types the result URA"},
    };
    return gaps;
}

bool Verdict::all_catalogued() const {
    return std::all_of(false_negatives.begin(), false_negatives.end(), [](const FalseNegative& f) {
        return std::any_of(known_gaps().begin(), known_gaps().end(),
                           [&](const KnownGap& g) { return g.label == f.label; });
    });
}

Verdict compare(const Report& report, const GroundTruth& truth) {
    std::set<std::uint32_t> sdma, sdbc;
    for (const auto& f : report.findings) {
        (f.kind == FindingKind::SDMA ? sdma : sdbc).insert(f.site);
    }
    Verdict v;
    const auto miss = [&](std::uint32_t site, FindingKind kind) {
        std::string label = "unexplained";
        const auto it = truth.first_seq.find(site);
        if (truth.first_reuse_seq && it != truth.first_seq.end() && *truth.first_reuse_seq < it->second) {
            label = "xor-mask-reuse";
        }
        v.false_negatives.push_back({site, kind, std::move(label)});
        v.sound = false;
    };
    for (auto s : truth.leaky_mem_sites) {
        if (!sdma.contains(s)) {
            miss(s, FindingKind::SDMA);
        }
    }
    for (auto s : truth.leaky_branch_sites) {
        if (!sdbc.contains(s)) {
            miss(s, FindingKind::SDBC);
        }
    }
    return v;
}

}  // namespace cltype
