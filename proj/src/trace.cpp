#include "cltype/trace.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "cltype/errors.hpp"

namespace cltype {

namespace {

struct MnemonicName {
    std::string_view name;
    Mnemonic m;
};

constexpr MnemonicName kMnemonics[] = {
    {"mov", Mnemonic::mov},       {"movzx", Mnemonic::movzx},   {"movsx", Mnemonic::movsx},
    {"lea", Mnemonic::lea},       {"add", Mnemonic::add},       {"sub", Mnemonic::sub},
    {"mul", Mnemonic::mul},       {"imul", Mnemonic::imul},     {"div", Mnemonic::div},
    {"and", Mnemonic::and_},      {"or", Mnemonic::or_},        {"xor", Mnemonic::xor_},
    {"not", Mnemonic::not_},      {"neg", Mnemonic::neg},       {"shl", Mnemonic::shl},
    {"shr", Mnemonic::shr},       {"sar", Mnemonic::sar},       {"test", Mnemonic::test},
    {"cmp", Mnemonic::cmp},       {"jmp", Mnemonic::jmp},       {"je", Mnemonic::je},
    {"jne", Mnemonic::jne},       {"jb", Mnemonic::jb},         {"jae", Mnemonic::jae},
    {"jl", Mnemonic::jl},         {"jge", Mnemonic::jge},       {"cmove", Mnemonic::cmove},
    {"cmovne", Mnemonic::cmovne}, {"cmovb", Mnemonic::cmovb},   {"cmovae", Mnemonic::cmovae},
    {"cmovl", Mnemonic::cmovl},   {"cmovge", Mnemonic::cmovge}, {"push", Mnemonic::push},
    {"pop", Mnemonic::pop},
};

constexpr std::string_view kRegOrder[kNumGpr] = {"eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

[[noreturn]] void fail(const std::string& msg) { throw ParseError({}, 0, msg); }

std::string hex(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string hex8(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

// Hex with at most 8 digits after an optional "0x".
std::optional<std::uint32_t> parse_hex32(std::string_view s, bool need_prefix) {
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        s.remove_prefix(2);
    } else if (need_prefix) {
        return std::nullopt;
    }
    if (s.empty() || s.size() > 8) {
        return std::nullopt;
    }
    std::uint32_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (ec != std::errc() || p != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

// Signed integer literal: "-0x4", "0x10", "12". Result is taken modulo 2^32.
std::optional<std::uint32_t> parse_number(std::string_view s) {
    bool neg = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        neg = s[0] == '-';
        s.remove_prefix(1);
    }
    std::optional<std::uint32_t> v;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        v = parse_hex32(s, true);
    } else if (!s.empty()) {
        std::uint64_t d = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d, 10);
        if (ec == std::errc() && p == s.data() + s.size() && d <= 0xffffffffULL) {
            v = static_cast<std::uint32_t>(d);
        }
    }
    if (!v) {
        return std::nullopt;
    }
    if (neg) {
        if (*v > 0x80000000U) {
            return std::nullopt;
        }
        return static_cast<std::uint32_t>(0U - *v);
    }
    return v;
}

std::optional<VarId> parse_gpr32(std::string_view s) {
    const auto r = var_by_name(s);
    if (r && is_gpr(r->id) && r->width == 32) {
        return r->id;
    }
    return std::nullopt;
}

MemOperand parse_mem(std::string_view body) {
    MemOperand m;
    std::size_t i = 0;
    bool first = true;
    while (i < body.size()) {
        bool neg = false;
        if (body[i] == '+' || body[i] == '-') {
            neg = body[i] == '-';
            ++i;
        } else if (!first) {
            fail("malformed memory operand '[" + std::string(body) + "]'");
        }
        std::size_t j = i;
        while (j < body.size() && body[j] != '+' && body[j] != '-') {
            ++j;
        }
        const auto term = trim(body.substr(i, j - i));
        i = j;
        first = false;
        if (term.empty()) {
            fail("empty term in memory operand");
        }
        const auto star = term.find('*');
        if (star != std::string_view::npos) {
            auto reg = trim(term.substr(0, star));
            auto sc = trim(term.substr(star + 1));
            if (!parse_gpr32(reg)) {
                std::swap(reg, sc);
            }
            const auto r = parse_gpr32(reg);
            const auto s = parse_number(sc);
            if (!r || !s || (*s != 1 && *s != 2 && *s != 4 && *s != 8) || neg || m.index) {
                fail("bad scaled index '" + std::string(term) + "'");
            }
            m.index = *r;
            m.scale = static_cast<std::uint8_t>(*s);
        } else if (const auto r = parse_gpr32(term)) {
            if (neg) {
                fail("negated register in memory operand");
            }
            if (!m.base) {
                m.base = *r;
            } else if (!m.index) {
                m.index = *r;
            } else {
                fail("too many registers in memory operand");
            }
        } else if (const auto n = parse_number(term)) {
            m.disp += neg ? 0U - *n : *n;
        } else {
            fail("bad term '" + std::string(term) + "' in memory operand");
        }
    }
    return m;
}

Operand parse_operand(std::string_view s, bool jump_target) {
    s = trim(s);
    std::uint8_t size = 0;
    bool had_ptr = false;
    for (const auto& [word, bytes] : {std::pair{std::string_view("byte"), 1}, std::pair{std::string_view("word"), 2},
                                      std::pair{std::string_view("dword"), 4}}) {
        if (s.starts_with(word) && s.size() > word.size() && (s[word.size()] == ' ' || s[word.size()] == '[')) {
            size = static_cast<std::uint8_t>(bytes);
            s = trim(s.substr(word.size()));
            break;
        }
    }
    if (s.starts_with("ptr") && s.size() > 3 && (s[3] == ' ' || s[3] == '[')) {
        had_ptr = true;
        s = trim(s.substr(3));
    }
    if (!s.empty() && s.front() == '[') {
        if (s.back() != ']') {
            fail("unterminated memory operand '" + std::string(s) + "'");
        }
        auto m = parse_mem(trim(s.substr(1, s.size() - 2)));
        m.size = size;
        return Operand::of_mem(m);
    }
    if (size != 0 || had_ptr) {
        fail("size prefix without memory operand");
    }
    if (const auto r = var_by_name(s); r && is_gpr(r->id)) {
        return Operand::of_reg(*r);
    }
    if (jump_target) {
        if (const auto v = parse_hex32(s, false)) {
            return Operand::of_imm(*v);
        }
    } else if (const auto v = parse_number(s)) {
        return Operand::of_imm(*v);
    }
    fail("bad operand '" + std::string(s) + "'");
}

bool rm(const Operand& o) { return o.is_reg() || o.is_mem(); }
bool rm32(const Instruction& ins, unsigned i) { return rm(ins.op(i)) && operand_width(ins, i) == 32; }

void check_shape(const Instruction& ins) {
    const auto name = std::string(to_string(ins.mnemonic));
    const auto bad = [&]() { fail("invalid operands for '" + name + "': " + to_string(ins)); };
    const auto n = ins.nops;
    const auto& a = ins.ops[0];
    const auto& b = ins.ops[1];
    const auto same_width = [&] { return operand_width(ins, 0) == operand_width(ins, 1); };
    const auto imm_fits = [&](unsigned i) {
        const unsigned w = operand_width(ins, i);
        const std::uint32_t v = ins.ops[i].imm;
        // Accept both the unsigned and the sign-extended spelling of a narrow immediate.
        return w >= 32 || v < (1U << w) || v >= 0U - (1U << (w - 1));
    };
    switch (ins.mnemonic) {
    case Mnemonic::mov:
    case Mnemonic::add:
    case Mnemonic::sub:
    case Mnemonic::and_:
    case Mnemonic::or_:
    case Mnemonic::xor_:
    case Mnemonic::cmp:
    case Mnemonic::test:
        if (n != 2 || !rm(a) || (a.is_mem() && b.is_mem())) bad();
        if (b.is_imm() ? !imm_fits(1) : !same_width()) bad();
        break;
    case Mnemonic::movzx:
    case Mnemonic::movsx:
        if (n != 2 || !a.is_reg() || !rm(b)) bad();
        if (b.is_mem() && b.mem.size == 0) fail("'" + name + "' needs an explicit byte/word size");
        if (operand_width(ins, 1) >= operand_width(ins, 0) || operand_width(ins, 0) < 16) bad();
        break;
    case Mnemonic::lea:
        if (n != 2 || !a.is_reg() || a.reg.width != 32 || !b.is_mem()) bad();
        break;
    case Mnemonic::mul:
    case Mnemonic::div:
        if (n != 1 || !rm32(ins, 0)) bad();
        break;
    case Mnemonic::imul:
        if (n == 1) {
            if (!rm32(ins, 0)) bad();
        } else if (n == 2) {
            if (!a.is_reg() || a.reg.width != 32 || !(rm32(ins, 1) || b.is_imm())) bad();
        } else if (n == 3) {
            if (!a.is_reg() || a.reg.width != 32 || !rm32(ins, 1) || !ins.ops[2].is_imm()) bad();
        } else {
            bad();
        }
        break;
    case Mnemonic::not_:
    case Mnemonic::neg:
        if (n != 1 || !rm(a)) bad();
        break;
    case Mnemonic::shl:
    case Mnemonic::shr:
    case Mnemonic::sar:
        if (n != 2 || !rm(a)) bad();
        if (!(b.is_imm() && b.imm < 256) && !(b.is_reg() && b.reg == *var_by_name("cl"))) bad();
        break;
    case Mnemonic::jmp:
    case Mnemonic::je:
    case Mnemonic::jne:
    case Mnemonic::jb:
    case Mnemonic::jae:
    case Mnemonic::jl:
    case Mnemonic::jge:
        if (n != 1 || !a.is_imm()) bad();
        break;
    case Mnemonic::cmove:
    case Mnemonic::cmovne:
    case Mnemonic::cmovb:
    case Mnemonic::cmovae:
    case Mnemonic::cmovl:
    case Mnemonic::cmovge:
        if (n != 2 || !a.is_reg() || a.reg.width == 8 || !rm(b) || !same_width()) bad();
        break;
    case Mnemonic::push:
        if (n != 1 || !(rm32(ins, 0) || a.is_imm())) bad();
        break;
    case Mnemonic::pop:
        if (n != 1 || !rm32(ins, 0) || (a.is_reg() && a.reg.id == VarId::esp)) bad();
        break;
    }
}

}  // namespace

std::string_view to_string(Mnemonic m) noexcept {
    for (const auto& e : kMnemonics) {
        if (e.m == m) {
            return e.name;
        }
    }
    return "?";
}

std::optional<Mnemonic> parse_mnemonic(std::string_view s) noexcept {
    for (const auto& e : kMnemonics) {
        if (e.name == s) {
            return e.m;
        }
    }
    return std::nullopt;
}

bool is_cond_jump(Mnemonic m) noexcept { return m >= Mnemonic::je && m <= Mnemonic::jge; }
bool is_cmov(Mnemonic m) noexcept { return m >= Mnemonic::cmove && m <= Mnemonic::cmovge; }

unsigned operand_width(const Instruction& ins, unsigned i) {
    const auto& o = ins.op(i);
    if (o.is_reg()) {
        return o.reg.width;
    }
    if (o.is_mem() && o.mem.size != 0) {
        return 8U * o.mem.size;
    }
    if (ins.mnemonic == Mnemonic::lea || ins.mnemonic == Mnemonic::push || ins.mnemonic == Mnemonic::pop ||
        ins.mnemonic == Mnemonic::mul || ins.mnemonic == Mnemonic::imul || ins.mnemonic == Mnemonic::div) {
        return 32;
    }
    if (ins.mnemonic == Mnemonic::movzx || ins.mnemonic == Mnemonic::movsx) {
        return i == 1 && o.is_mem() ? 8 : 32;
    }
    // Shift counts do not size the shifted operand.
    const bool shift = ins.mnemonic == Mnemonic::shl || ins.mnemonic == Mnemonic::shr || ins.mnemonic == Mnemonic::sar;
    for (unsigned j = 0; j < ins.nops; ++j) {
        if (j == i || (shift && j == 1)) {
            continue;
        }
        const auto& other = ins.ops[j];
        if (other.is_reg()) {
            return other.reg.width;
        }
        if (other.is_mem() && other.mem.size != 0) {
            return 8U * other.mem.size;
        }
    }
    return 32;
}

std::string to_string(const Operand& o) {
    switch (o.kind) {
    case Operand::Kind::None: return "";
    case Operand::Kind::Reg: return var_name(o.reg);
    case Operand::Kind::Imm: return hex(o.imm);
    case Operand::Kind::Mem: break;
    }
    const auto& m = o.mem;
    std::string out;
    if (m.size == 1) {
        out = "byte ptr ";
    } else if (m.size == 2) {
        out = "word ptr ";
    } else if (m.size == 4) {
        out = "dword ptr ";
    }
    out += '[';
    bool any = false;
    if (m.base) {
        out += var_name(full(*m.base));
        any = true;
    }
    if (m.index) {
        if (any) {
            out += '+';
        }
        out += var_name(full(*m.index));
        if (m.scale != 1) {
            out += '*' + std::to_string(m.scale);
        }
        any = true;
    }
    if (!any) {
        out += hex(m.disp);
    } else if (m.disp != 0) {
        out += m.disp >= 0x80000000U ? "-" + hex(0U - m.disp) : "+" + hex(m.disp);
    }
    out += ']';
    return out;
}

std::string to_string(const Instruction& ins) {
    std::string out(to_string(ins.mnemonic));
    for (unsigned i = 0; i < ins.nops; ++i) {
        out += i == 0 ? " " : ",";
        out += to_string(ins.ops[i]);
    }
    return out;
}

Instruction parse_instruction(std::string_view text) {
    text = trim(text);
    const auto sp = text.find_first_of(" \t");
    const auto mn = text.substr(0, sp);
    const auto m = parse_mnemonic(mn);
    if (!m) {
        fail("unknown mnemonic '" + std::string(mn) + "'");
    }
    Instruction ins;
    ins.mnemonic = *m;
    auto rest = sp == std::string_view::npos ? std::string_view{} : trim(text.substr(sp));
    const bool jump = *m == Mnemonic::jmp || is_cond_jump(*m);
    while (!rest.empty()) {
        if (ins.nops == 3) {
            fail("too many operands");
        }
        const auto comma = rest.find(',');
        ins.ops[ins.nops++] = parse_operand(rest.substr(0, comma), jump);
        if (comma == std::string_view::npos) {
            break;
        }
        rest = trim(rest.substr(comma + 1));
        if (rest.empty()) {
            fail("trailing comma");
        }
    }
    check_shape(ins);
    return ins;
}

std::uint32_t reg_value(VarRef r, const RegSnapshot& regs) noexcept {
    const std::uint32_t v = regs[static_cast<unsigned>(r.id)] >> r.lo;
    return r.width >= 32 ? v : v & ((1U << r.width) - 1);
}

std::uint32_t resolve_address(const MemOperand& m, const RegSnapshot& regs) noexcept {
    std::uint32_t a = m.disp;
    if (m.base) {
        a += regs[static_cast<unsigned>(*m.base)];
    }
    if (m.index) {
        a += regs[static_cast<unsigned>(*m.index)] * m.scale;
    }
    return a;
}

RegSnapshot parse_snapshot(std::string_view text) {
    RegSnapshot out{};
    auto regs = trim(text);
    for (unsigned i = 0; i < kNumGpr; ++i) {
        const auto end = regs.find_first_of(" \t");
        const auto tok = regs.substr(0, end);
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos || tok.substr(0, eq) != kRegOrder[i]) {
            fail("expected '" + std::string(kRegOrder[i]) + "=0x...' in register snapshot");
        }
        const auto v = parse_hex32(tok.substr(eq + 1), true);
        if (!v) {
            fail("bad value for " + std::string(kRegOrder[i]));
        }
        out[i] = *v;
        regs = end == std::string_view::npos ? std::string_view{} : trim(regs.substr(end));
    }
    if (!regs.empty()) {
        fail("trailing text after register snapshot");
    }
    return out;
}

TraceRecord parse_record(std::string_view line, const std::string& file, std::size_t lineno) {
    try {
        line = trim(line);
        if (!line.starts_with("T ")) {
            fail("expected a 'T' record");
        }
        line.remove_prefix(2);
        line = trim(line);
        TraceRecord r;
        auto sp = line.find(' ');
        const auto seq = line.substr(0, sp);
        const auto [p, ec] = std::from_chars(seq.data(), seq.data() + seq.size(), r.seq, 10);
        if (ec != std::errc() || p != seq.data() + seq.size()) {
            fail("bad sequence number '" + std::string(seq) + "'");
        }
        line = trim(line.substr(sp == std::string_view::npos ? line.size() : sp));
        sp = line.find(' ');
        const auto addr = parse_hex32(line.substr(0, sp), true);
        if (!addr) {
            fail("bad instruction address '" + std::string(line.substr(0, sp)) + "'");
        }
        r.addr = *addr;
        line = trim(line.substr(sp == std::string_view::npos ? line.size() : sp));
        const auto bar = line.find('|');
        if (bar == std::string_view::npos) {
            fail("missing register snapshot");
        }
        r.op = parse_instruction(line.substr(0, bar));
        r.regs = parse_snapshot(line.substr(bar + 1));
        return r;
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        throw ParseError(file, lineno, msg.substr(msg.find(": ") + 2));
    }
}

namespace {

template <typename NextLine>
std::vector<TraceRecord> parse_lines(NextLine&& next, const std::string& file) {
    std::vector<TraceRecord> out;
    std::string_view line;
    std::size_t lineno = 0;
    while (next(line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        auto r = parse_record(t, file, lineno);
        if (r.seq != out.size()) {
            throw ParseError(file, lineno,
                             "non-contiguous sequence: expected " + std::to_string(out.size()) + ", got " +
                                 std::to_string(r.seq));
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

std::vector<TraceRecord> parse_trace(std::string_view text, const std::string& file) {
    std::size_t pos = 0;
    return parse_lines(
        [&](std::string_view& line) {
            if (pos >= text.size()) {
                return false;
            }
            auto nl = text.find('\n', pos);
            if (nl == std::string_view::npos) {
                nl = text.size();
            }
            line = text.substr(pos, nl - pos);
            pos = nl + 1;
            return true;
        },
        file);
}

std::vector<TraceRecord> parse_trace(std::istream& in, const std::string& file) {
    std::string buf;
    return parse_lines(
        [&](std::string_view& line) {
            if (!std::getline(in, buf)) {
                return false;
            }
            line = buf;
            return true;
        },
        file);
}

std::vector<TraceRecord> load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return parse_trace(in, path);
}

std::string serialize_record(const TraceRecord& r) {
    std::string out = "T " + std::to_string(r.seq) + ' ' + hex8(r.addr) + ' ' + to_string(r.op) + " |";
    for (unsigned i = 0; i < kNumGpr; ++i) {
        out += ' ';
        out += kRegOrder[i];
        out += '=';
        out += hex8(r.regs[i]);
    }
    return out;
}

std::string serialize_trace(const std::vector<TraceRecord>& trace) {
    std::string out;
    for (const auto& r : trace) {
        out += serialize_record(r);
        out += '\n';
    }
    return out;
}

}  // namespace cltype
