#ifndef CLTYPE_TRACE_HPP
#define CLTYPE_TRACE_HPP

// Textual micro-x86 trace format.
//
//   T <seq> 0x<addr> <mnemonic> <operands> | eax=0x.. ebx=0x.. ecx=0x.. edx=0x.. esi=0x.. edi=0x.. ebp=0x.. esp=0x..
//
// Registers are the values before the instruction executes. Lines starting with '#' are comments.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cltype/ir.hpp"

namespace cltype {

enum class Mnemonic : std::uint8_t {
    mov, movzx, movsx, lea,
    add, sub, mul, imul, div,
    and_, or_, xor_, not_, neg,
    shl, shr, sar,
    test, cmp,
    jmp, je, jne, jb, jae, jl, jge,
    cmove, cmovne, cmovb, cmovae, cmovl, cmovge,
    push, pop,
};

std::string_view to_string(Mnemonic m) noexcept;
std::optional<Mnemonic> parse_mnemonic(std::string_view s) noexcept;
bool is_cond_jump(Mnemonic m) noexcept;
bool is_cmov(Mnemonic m) noexcept;

struct MemOperand {
    std::optional<VarId> base, index;  // 32-bit general-purpose registers
    std::uint8_t scale = 1;            // 1, 2, 4 or 8
    std::uint32_t disp = 0;
    std::uint8_t size = 0;  // bytes from an explicit byte/word/dword prefix, 0 when absent

    friend bool operator==(const MemOperand&, const MemOperand&) = default;
};

struct Operand {
    enum class Kind : std::uint8_t { None, Reg, Imm, Mem };
    Kind kind = Kind::None;
    VarRef reg{};
    std::uint32_t imm = 0;
    MemOperand mem{};

    static Operand of_reg(VarRef r) { return {Kind::Reg, r, 0, {}}; }
    static Operand of_imm(std::uint32_t v) { return {Kind::Imm, {}, v, {}}; }
    static Operand of_mem(MemOperand m) { return {Kind::Mem, {}, 0, m}; }

    bool is_reg() const noexcept { return kind == Kind::Reg; }
    bool is_imm() const noexcept { return kind == Kind::Imm; }
    bool is_mem() const noexcept { return kind == Kind::Mem; }

    friend bool operator==(const Operand&, const Operand&) = default;
};

struct Instruction {
    Mnemonic mnemonic = Mnemonic::mov;
    std::array<Operand, 3> ops{};
    std::uint8_t nops = 0;

    const Operand& op(unsigned i) const { return ops.at(i); }
    friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Width in bits of operand `i`: registers by their view, memory by prefix or the other operand
/// (32 when nothing says otherwise), immediates by the other operand.
unsigned operand_width(const Instruction& ins, unsigned i);

std::string to_string(const Operand& o);
std::string to_string(const Instruction& ins);

/// Parses "<mnemonic> <operands>" and checks the operand shapes the mnemonic accepts.
/// Throws ParseError (line 0) on failure.
Instruction parse_instruction(std::string_view text);

using RegSnapshot = std::array<std::uint32_t, kNumGpr>;  // eax, ebx, ecx, edx, esi, edi, ebp, esp

struct TraceRecord {
    std::uint64_t seq = 0;
    std::uint32_t addr = 0;
    Instruction op;
    RegSnapshot regs{};

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// base + index*scale + disp modulo 2^32.
std::uint32_t resolve_address(const MemOperand& m, const RegSnapshot& regs) noexcept;
std::uint32_t reg_value(VarRef r, const RegSnapshot& regs) noexcept;

/// "eax=0x.. ebx=0x.. ... esp=0x.." in the fixed order. Throws ParseError (line 0).
RegSnapshot parse_snapshot(std::string_view text);

/// Parses one `T` line (no comment handling). `lineno` is only used in error messages.
TraceRecord parse_record(std::string_view line, const std::string& file = {}, std::size_t lineno = 0);

/// Whole trace. Records must be numbered 0, 1, 2, ... in file order.
std::vector<TraceRecord> parse_trace(std::string_view text, const std::string& file = {});
std::vector<TraceRecord> parse_trace(std::istream& in, const std::string& file = {});
std::vector<TraceRecord> load_trace(const std::string& path);

std::string serialize_record(const TraceRecord& r);
std::string serialize_trace(const std::vector<TraceRecord>& trace);

}  // namespace cltype

#endif
