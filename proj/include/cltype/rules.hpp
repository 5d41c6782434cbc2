#ifndef CLTYPE_RULES_HPP
#define CLTYPE_RULES_HPP

// Bit and bitvector inference rules. Every infer_* function is pure; the optional RuleSet
// collects the names of the rules that fired.

#include <cstdint>
#include <string>
#include <vector>

#include "cltype/ir.hpp"
#include "cltype/security.hpp"

namespace cltype {

// Declaration order is the display order used in logs.
enum class Rule : std::uint8_t {
    LogicI, LogicII, Extraction,
    ArithI, ArithII1, ArithII2, Comp, CondI, CondII,
    ConcatI, ConcatII1, ConcatII2,
    ConjDisjI, ConjDisjII, XorI, XorII, XorIII, XorIV, NegI, NegII, NegIII,
    ConstConjI, ConstConjII, ConstDisjI, ConstDisjII, ConstFold,
    AssignI, AssignII, LoadI, LoadII, LoadIII, StoreI, StoreII,
    Count_,
};

std::string_view rule_name(Rule r) noexcept;

class RuleSet {
public:
    void add(Rule r) noexcept { bits_ |= bit(r); }
    void merge(const RuleSet& o) noexcept { bits_ |= o.bits_; }
    bool contains(Rule r) const noexcept { return (bits_ & bit(r)) != 0; }
    bool empty() const noexcept { return bits_ == 0; }
    void clear() noexcept { bits_ = 0; }

    /// Names in display order; Const-Conj.I with Const-Conj.II prints as "Const-Conj.I&II"
    /// (same for Const-Disj).
    std::vector<std::string> names() const;
    /// names() joined with ", ".
    std::string to_string() const;

    friend bool operator==(const RuleSet&, const RuleSet&) = default;

private:
    static constexpr std::uint64_t bit(Rule r) noexcept { return std::uint64_t{1} << static_cast<unsigned>(r); }
    std::uint64_t bits_ = 0;
};

// One-bit rules.
RefinedBit infer_bit_logic(BinOp op, RefinedBit a, RefinedBit b, RuleSet* log = nullptr);
RefinedBit infer_bit_xor(RefinedBit a, RefinedBit b, bool same_operand, RuleSet* log = nullptr);
RefinedBit infer_neg(RefinedBit b, RuleSet* log = nullptr);

// Vector rules.
TypedBitvector infer_concat(const TypedBitvector& hi, const TypedBitvector& lo, RuleSet* log = nullptr);
TypedBitvector infer_extract(unsigned lo, unsigned hi, const TypedBitvector& v, RuleSet* log = nullptr);
/// Zero or sign extension to `width`, typed as a concatenation.
TypedBitvector infer_extend(const TypedBitvector& v, unsigned width, bool is_signed, RuleSet* log = nullptr);
/// `amount` is the shift distance already resolved to a constant; amounts >= width shift everything out.
TypedBitvector infer_shift(const TypedBitvector& v, unsigned amount, ShiftKind kind, RuleSet* log = nullptr);
/// Same, but takes the typed amount and throws AnalysisError("unsupported secret shift") unless
/// it is a fully known constant.
TypedBitvector infer_shift(const TypedBitvector& v, const TypedBitvector& amount, ShiftKind kind,
                           RuleSet* log = nullptr);
TypedBitvector infer_logic_vec(BinOp op, const TypedBitvector& a, const TypedBitvector& b,
                               bool same_operand = false, RuleSet* log = nullptr);
TypedBitvector infer_not_vec(const TypedBitvector& v, RuleSet* log = nullptr);
/// Throws AnalysisError on a constant zero divisor.
TypedBitvector infer_arith(BinOp op, const TypedBitvector& a, const TypedBitvector& b,
                           bool same_operand = false, RuleSet* log = nullptr);
TypedBitvector infer_comp(BinOp op, const TypedBitvector& a, const TypedBitvector& b,
                          bool same_operand = false, RuleSet* log = nullptr);
TypedBitvector infer_cond(const TypedBitvector& c, const TypedBitvector& if_true, const TypedBitvector& if_false,
                          RuleSet* log = nullptr);

/// Two's-complement machine semantics of `op` on `width`-bit operands, the reference the
/// folding rules are checked against. Div/Rem by zero throw AnalysisError.
std::uint64_t fold_binop(BinOp op, std::uint64_t a, std::uint64_t b, unsigned width);

}  // namespace cltype

#endif
