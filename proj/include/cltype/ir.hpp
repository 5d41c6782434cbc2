#ifndef CLTYPE_IR_HPP
#define CLTYPE_IR_HPP

// Bit-level expression/statement IR that lifted instructions are expressed in.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cltype/security.hpp"

namespace cltype {

// Storage locations that are not memory. Registers are 32 bits, flags 1 bit, temporaries 64 bits.
enum class VarId : std::uint8_t {
    eax, ebx, ecx, edx, esi, edi, ebp, esp,
    zf, cf, sf, of,
    slt,  // sf != of, kept as its own flag so signed comparisons can be decided from operand intervals
    t0, t1, t2,
};

inline constexpr unsigned kNumGpr = 8;
inline constexpr unsigned kNumVars = 16;

constexpr bool is_gpr(VarId id) noexcept { return static_cast<unsigned>(id) < kNumGpr; }
constexpr bool is_flag(VarId id) noexcept { return id >= VarId::zf && id <= VarId::slt; }
constexpr bool is_temp(VarId id) noexcept { return id >= VarId::t0; }
unsigned storage_width(VarId id) noexcept;

/// A view `[lo, lo+width)` of a storage location, e.g. `al` = eax[0..8), `ah` = eax[8..16).
struct VarRef {
    VarId id = VarId::eax;
    std::uint8_t lo = 0;
    std::uint8_t width = 32;

    friend constexpr bool operator==(const VarRef&, const VarRef&) = default;
};

VarRef full(VarId id) noexcept;
/// Register, sub-register or flag by assembler name ("eax", "ax", "al", "ah", "zf", ...).
std::optional<VarRef> var_by_name(std::string_view name) noexcept;
std::string var_name(const VarRef& v);

enum class BinOp : std::uint8_t {
    And, Or, Xor,
    Add, Sub, Mul, MulHigh, SMulHigh, Div, Rem,
    Lt, Le, Gt, Ge, Eq, Ne,  // unsigned order
    Slt, Sle, Sgt, Sge,      // signed order
};

enum class OpClass : std::uint8_t { Logic, Arith, Comp };
OpClass op_class(BinOp op) noexcept;
std::string_view to_string(BinOp op) noexcept;

enum class ShiftKind : std::uint8_t { Left, RightLogical, RightArith };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct ConstExpr { TypedBitvector value; };
struct VarExpr { VarRef var; };
struct NotExpr { ExprPtr operand; };
struct BinExpr {
    BinOp op;
    ExprPtr lhs, rhs;
    bool same_operand;  // both sides are the syntactically identical source operand
};
struct CondExpr { ExprPtr cond, if_true, if_false; };
struct ConcatExpr { ExprPtr hi, lo; };
struct ExtractExpr { unsigned lo, hi; ExprPtr operand; };
struct ShiftExpr { ShiftKind kind; ExprPtr operand, amount; };
struct ExtendExpr { ExprPtr operand; unsigned width; bool is_signed; };

struct Expr {
    std::variant<ConstExpr, VarExpr, NotExpr, BinExpr, CondExpr, ConcatExpr, ExtractExpr, ShiftExpr, ExtendExpr>
        node;
    unsigned width;
};

// Factories validate width contracts and throw std::invalid_argument on violation.
ExprPtr constant(std::uint64_t value, unsigned width);
ExprPtr constant(TypedBitvector value);
ExprPtr var(VarRef v);
ExprPtr var(VarId id);
ExprPtr bnot(ExprPtr e);
ExprPtr binop(BinOp op, ExprPtr lhs, ExprPtr rhs, bool same_operand = false);
ExprPtr cond(ExprPtr c, ExprPtr if_true, ExprPtr if_false);
ExprPtr concat(ExprPtr hi, ExprPtr lo);
ExprPtr extract(unsigned lo, unsigned hi, ExprPtr e);
ExprPtr shift(ShiftKind kind, ExprPtr e, ExprPtr amount);
ExprPtr extend(ExprPtr e, unsigned width, bool is_signed);

std::string to_string(const Expr& e);

// Statements. Memory operands are split into a base and an index expression and carry the
// concrete address resolved from the trace's register snapshot.
struct Assign {
    VarRef dst;
    ExprPtr value;
};
struct Load {
    VarRef dst;
    ExprPtr base, index;
    std::uint32_t addr;
    unsigned bytes;
};
struct Store {
    ExprPtr base, index;
    std::uint32_t addr;
    ExprPtr value;  // width = 8 * bytes
};

using Stmt = std::variant<Assign, Load, Store>;
/// A sequence `s1; s2; ...`, executed left to right.
using StmtSeq = std::vector<Stmt>;

std::string to_string(const Stmt& s);

}  // namespace cltype

#endif
