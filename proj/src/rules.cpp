#include "cltype/rules.hpp"

#include <algorithm>
#include <array>
#include <bit>

#include "cltype/errors.hpp"

namespace cltype {

namespace {

constexpr std::array<std::string_view, static_cast<unsigned>(Rule::Count_)> kRuleNames = {
    "Logic.I",     "Logic.II",    "Extraction",  "Arith.I",       "Arith.II-1",    "Arith.II-2", "Comp",
    "Cond.I",      "Cond.II",     "Concat.I",    "Concat.II-1",   "Concat.II-2",   "Conj&Disj.I", "Conj&Disj.II",
    "XOR.I",       "XOR.II",      "XOR.III",     "XOR.IV",        "Neg.I",         "Neg.II",     "Neg.III",
    "Const-Conj.I", "Const-Conj.II", "Const-Disj.I", "Const-Disj.II", "Const-Fold", "Assign-I",  "Assign-II",
    "Load-I",      "Load-II",     "Load-III",    "Store-I",       "Store-II",
};

void note(RuleSet* log, Rule r) {
    if (log != nullptr) {
        log->add(r);
    }
}

std::uint64_t width_mask(unsigned width) {
    return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

std::int64_t as_signed(std::uint64_t v, unsigned width) {
    if (width >= 64) {
        return static_cast<std::int64_t>(v);
    }
    const std::uint64_t sign = std::uint64_t{1} << (width - 1);
    return static_cast<std::int64_t>(v ^ sign) - static_cast<std::int64_t>(sign);
}

void require_same_width(const TypedBitvector& a, const TypedBitvector& b, const char* what) {
    if (a.width() != b.width() || a.empty()) {
        throw std::invalid_argument(std::string(what) + ": operand widths differ");
    }
}

// Highest level among the bits, with URA counted as WRA when `demote_ura` is set.
SecurityType max_level(const TypedBitvector& v, bool demote_ura = false) {
    SecurityType out = SecurityType::CST;
    for (const auto& b : v) {
        out = join(out, demote_ura && b.sec == SecurityType::URA ? SecurityType::WRA : b.sec);
    }
    return out;
}

bool all_cst_known(const TypedBitvector& v) {
    return std::all_of(v.begin(), v.end(), [](const RefinedBit& b) { return b.sec == SecurityType::CST && b.known(); });
}

// Length of the run of URA bits starting at bit 0.
unsigned low_ura_run(const TypedBitvector& v) {
    unsigned n = 0;
    while (n < v.width() && v[n].sec == SecurityType::URA) {
        ++n;
    }
    return n;
}

// Replicated copies of a sign bit. A random sign bit copied many times is no longer uniform as a
// vector, so the copies are only weakly random.
RefinedBit sign_copy(const RefinedBit& b) {
    return b.sec == SecurityType::URA ? RefinedBit::of(SecurityType::WRA) : b;
}

bool is_mul(BinOp op) { return op == BinOp::Mul; }

}  // namespace

std::string_view rule_name(Rule r) noexcept {
    const auto i = static_cast<unsigned>(r);
    return i < kRuleNames.size() ? kRuleNames[i] : "?";
}

std::vector<std::string> RuleSet::names() const {
    std::vector<std::string> out;
    for (unsigned i = 0; i < static_cast<unsigned>(Rule::Count_); ++i) {
        const auto r = static_cast<Rule>(i);
        if (!contains(r)) {
            continue;
        }
        if (r == Rule::ConstConjII && contains(Rule::ConstConjI)) {
            continue;
        }
        if (r == Rule::ConstDisjII && contains(Rule::ConstDisjI)) {
            continue;
        }
        if (r == Rule::ConstConjI && contains(Rule::ConstConjII)) {
            out.emplace_back("Const-Conj.I&II");
        } else if (r == Rule::ConstDisjI && contains(Rule::ConstDisjII)) {
            out.emplace_back("Const-Disj.I&II");
        } else {
            out.emplace_back(rule_name(r));
        }
    }
    return out;
}

std::string RuleSet::to_string() const {
    std::string out;
    for (const auto& n : names()) {
        if (!out.empty()) {
            out += ", ";
        }
        out += n;
    }
    return out;
}

std::uint64_t fold_binop(BinOp op, std::uint64_t a, std::uint64_t b, unsigned width) {
    const std::uint64_t m = width_mask(width);
    a &= m;
    b &= m;
    using u128 = unsigned __int128;
    using i128 = __int128;
    switch (op) {
    case BinOp::And: return a & b;
    case BinOp::Or: return a | b;
    case BinOp::Xor: return a ^ b;
    case BinOp::Add: return (a + b) & m;
    case BinOp::Sub: return (a - b) & m;
    case BinOp::Mul: return (a * b) & m;
    case BinOp::MulHigh: return static_cast<std::uint64_t>((u128{a} * u128{b}) >> width) & m;
    case BinOp::SMulHigh:
        return static_cast<std::uint64_t>((i128{as_signed(a, width)} * i128{as_signed(b, width)}) >> width) & m;
    case BinOp::Div:
    case BinOp::Rem:
        if (b == 0) {
            throw AnalysisError("division by constant zero");
        }
        return op == BinOp::Div ? a / b : a % b;
    case BinOp::Lt: return a < b;
    case BinOp::Le: return a <= b;
    case BinOp::Gt: return a > b;
    case BinOp::Ge: return a >= b;
    case BinOp::Eq: return a == b;
    case BinOp::Ne: return a != b;
    case BinOp::Slt: return as_signed(a, width) < as_signed(b, width);
    case BinOp::Sle: return as_signed(a, width) <= as_signed(b, width);
    case BinOp::Sgt: return as_signed(a, width) > as_signed(b, width);
    case BinOp::Sge: return as_signed(a, width) >= as_signed(b, width);
    }
    return 0;
}

// ---- one-bit rules ------------------------------------------------------------------------

RefinedBit infer_bit_logic(BinOp op, RefinedBit a, RefinedBit b, RuleSet* log) {
    if (op != BinOp::And && op != BinOp::Or) {
        throw std::invalid_argument("infer_bit_logic: operator must be AND or OR");
    }
    const bool conj = op == BinOp::And;
    // Constant operands first: the absorbing element decides, the neutral one passes the other through.
    const bool absorbing = !conj;
    if (a.is_const(absorbing) || b.is_const(absorbing)) {
        note(log, conj ? Rule::ConstConjI : Rule::ConstDisjII);
        return RefinedBit::constant(absorbing);
    }
    if (a.is_const(!absorbing) || b.is_const(!absorbing)) {
        const RefinedBit& other = a.is_const(!absorbing) ? b : a;
        note(log, conj ? Rule::ConstConjII : Rule::ConstDisjI);
        if (other.sec != SecurityType::CST) {
            note(log, Rule::ConjDisjI);
        }
        return other;
    }
    if (a.sec == SecurityType::URA && b.sec == SecurityType::URA) {
        note(log, Rule::ConjDisjII);
        return RefinedBit::of(SecurityType::WRA);
    }
    note(log, Rule::ConjDisjI);
    SecurityType t = join(a.sec, b.sec);
    // A random bit combined with an unknown constant is biased whenever that constant absorbs.
    if (t == SecurityType::URA) {
        t = SecurityType::WRA;
    }
    return RefinedBit::of(t);
}

RefinedBit infer_bit_xor(RefinedBit a, RefinedBit b, bool same_operand, RuleSet* log) {
    if (same_operand) {
        note(log, Rule::XorIV);
        return RefinedBit::constant(false);
    }
    if (a.sec == SecurityType::CST && b.sec == SecurityType::CST && a.known() && b.known()) {
        note(log, Rule::XorIII);
        return RefinedBit::constant(*a.value != *b.value);
    }
    if (a.sec == SecurityType::URA || b.sec == SecurityType::URA) {
        note(log, Rule::XorII);
        return RefinedBit::of(SecurityType::URA);
    }
    note(log, Rule::XorI);
    return RefinedBit::of(join(a.sec, b.sec));
}

RefinedBit infer_neg(RefinedBit b, RuleSet* log) {
    if (!b.known()) {
        note(log, Rule::NegI);
        return b;
    }
    note(log, *b.value ? Rule::NegIII : Rule::NegII);
    return {b.sec, !*b.value};
}

// ---- vector rules -------------------------------------------------------------------------

TypedBitvector infer_concat(const TypedBitvector& hi, const TypedBitvector& lo, RuleSet* log) {
    if (hi.empty() || lo.empty() || hi.width() + lo.width() > TypedBitvector::kMaxWidth) {
        throw std::invalid_argument("infer_concat: bad operand widths");
    }
    const auto th = vector_type(hi);
    const auto tl = vector_type(lo);
    if (th == SecurityType::URA || tl == SecurityType::URA) {
        note(log, th == SecurityType::SDD || tl == SecurityType::SDD ? Rule::ConcatII2 : Rule::ConcatII1);
    } else {
        note(log, Rule::ConcatI);
    }
    TypedBitvector out = lo;
    for (const auto& b : hi) {
        out.push_back(b);
    }
    return out;
}

TypedBitvector infer_extract(unsigned lo, unsigned hi, const TypedBitvector& v, RuleSet* log) {
    if (lo > hi || hi >= v.width()) {
        throw std::out_of_range("infer_extract: indices out of range");
    }
    note(log, Rule::Extraction);
    TypedBitvector out;
    for (unsigned i = lo; i <= hi; ++i) {
        out.push_back(v[i]);
    }
    return out;
}

TypedBitvector infer_extend(const TypedBitvector& v, unsigned width, bool is_signed, RuleSet* log) {
    if (width < v.width() || width > TypedBitvector::kMaxWidth || v.empty()) {
        throw std::invalid_argument("infer_extend: bad target width");
    }
    if (width == v.width()) {
        return v;
    }
    const unsigned n = width - v.width();
    const TypedBitvector fill =
        is_signed ? TypedBitvector(n, sign_copy(v[v.width() - 1])) : mk_constant(0, n);
    return infer_concat(fill, v, log);
}

TypedBitvector infer_shift(const TypedBitvector& v, unsigned amount, ShiftKind kind, RuleSet* log) {
    const unsigned w = v.width();
    if (w == 0) {
        throw std::invalid_argument("infer_shift: empty operand");
    }
    if (amount == 0) {
        return v;
    }
    if (kind == ShiftKind::RightArith) {
        const RefinedBit fill = sign_copy(v[w - 1]);
        if (amount >= w) {
            return TypedBitvector(w, fill);
        }
        return infer_concat(TypedBitvector(amount, fill), infer_extract(amount, w - 1, v, log), log);
    }
    if (amount >= w) {
        return mk_constant(0, w);
    }
    if (kind == ShiftKind::Left) {
        return infer_concat(infer_extract(0, w - 1 - amount, v, log), mk_constant(0, amount), log);
    }
    return infer_concat(mk_constant(0, amount), infer_extract(amount, w - 1, v, log), log);
}

TypedBitvector infer_shift(const TypedBitvector& v, const TypedBitvector& amount, ShiftKind kind, RuleSet* log) {
    const auto k = amount.known_value();
    if (!k || !all_cst_known(amount)) {
        throw AnalysisError("unsupported secret shift");
    }
    return infer_shift(v, static_cast<unsigned>(std::min<std::uint64_t>(*k, 64)), kind, log);
}

TypedBitvector infer_logic_vec(BinOp op, const TypedBitvector& a, const TypedBitvector& b, bool same_operand,
                               RuleSet* log) {
    require_same_width(a, b, "infer_logic_vec");
    if (op_class(op) != OpClass::Logic) {
        throw std::invalid_argument("infer_logic_vec: not a logic operator");
    }
    note(log, Rule::LogicI);
    TypedBitvector out;
    for (unsigned i = 0; i < a.width(); ++i) {
        out.push_back(op == BinOp::Xor ? infer_bit_xor(a[i], b[i], same_operand, log)
                                       : infer_bit_logic(op, a[i], b[i], log));
    }
    return out;
}

TypedBitvector infer_not_vec(const TypedBitvector& v, RuleSet* log) {
    note(log, Rule::LogicII);
    TypedBitvector out;
    for (const auto& b : v) {
        out.push_back(infer_neg(b, log));
    }
    return out;
}

namespace {

// Bits of an Add/Sub/Mul result that are identical for every concretisation of the operands.
// Returns the lowest such bit index (w when none) and the result's value at the top bits.
struct CarryWindow {
    unsigned first_stable;
    std::uint64_t value;
};

CarryWindow carry_window(BinOp op, const TypedBitvector& a, const TypedBitvector& b) {
    const unsigned w = a.width();
    using i128 = __int128;
    using u128 = unsigned __int128;
    i128 lo = 0, hi = 0;
    const u128 amin = a.min_unsigned(), amax = a.max_unsigned();
    const u128 bmin = b.min_unsigned(), bmax = b.max_unsigned();
    switch (op) {
    case BinOp::Add:
        lo = static_cast<i128>(amin + bmin);
        hi = static_cast<i128>(amax + bmax);
        break;
    case BinOp::Sub:
        lo = static_cast<i128>(amin) - static_cast<i128>(bmax);
        hi = static_cast<i128>(amax) - static_cast<i128>(bmin);
        break;
    case BinOp::Mul: {
        const u128 plo = amin * bmin, phi = amax * bmax;
        // Both products of two <=64-bit values fit in 128 bits, but we need a signed
        // representation for the floor comparison below; products above 2^127 only occur at w=64.
        if ((phi >> 126) != 0) {
            return {w, 0};
        }
        lo = static_cast<i128>(plo);
        hi = static_cast<i128>(phi);
        break;
    }
    default: return {w, 0};
    }
    // Results in different 2^w blocks mean wrap-around somewhere inside the interval.
    if ((lo >> w) != (hi >> w)) {
        return {w, 0};
    }
    const std::uint64_t m = width_mask(w);
    const std::uint64_t ulo = static_cast<std::uint64_t>(lo) & m;
    const std::uint64_t uhi = static_cast<std::uint64_t>(hi) & m;
    const std::uint64_t diff = ulo ^ uhi;
    const unsigned first = diff == 0 ? 0 : 64 - static_cast<unsigned>(std::countl_zero(diff));
    return {first, ulo};
}

}  // namespace

TypedBitvector infer_arith(BinOp op, const TypedBitvector& a, const TypedBitvector& b, bool same_operand,
                           RuleSet* log) {
    require_same_width(a, b, "infer_arith");
    if (op_class(op) != OpClass::Arith) {
        throw std::invalid_argument("infer_arith: not an arithmetic operator");
    }
    const unsigned w = a.width();
    if (same_operand && op == BinOp::Sub) {
        note(log, Rule::ConstFold);
        return mk_constant(0, w);
    }
    if ((op == BinOp::Div || op == BinOp::Rem) && all_cst_known(b) && b.min_unsigned() == 0) {
        throw AnalysisError("division by a constant zero");
    }
    if (all_cst_known(a) && all_cst_known(b)) {
        note(log, Rule::ConstFold);
        return mk_constant(fold_binop(op, a.min_unsigned(), b.min_unsigned(), w), w);
    }
    // Result bits that no concretisation can change stay constant whichever rule types the rest.
    const auto cw = carry_window(op, a, b);
    const auto keep_stable = [&](TypedBitvector out) {
        for (unsigned i = cw.first_stable; i < w; ++i) {
            out[i] = RefinedBit::constant(((cw.value >> i) & 1U) != 0);
        }
        if (cw.first_stable > 0 && cw.first_stable < w) {
            note(log, Rule::ConcatI);
        }
        return out;
    };
    const auto ta = vector_type(a);
    const auto tb = vector_type(b);
    if (ta == SecurityType::URA || tb == SecurityType::URA) {
        if (ta == SecurityType::SDD || tb == SecurityType::SDD) {
            note(log, Rule::ArithII2);
            return keep_stable(mk_uniform(SecurityType::SDD, w));
        }
        note(log, Rule::ArithII1);
        // Low bits of a sum/difference stay uniform as long as one operand's low bits are
        // uniform: x -> x + c is a bijection modulo 2^m. Same for multiplication by an odd constant.
        unsigned run = 0;
        if (op == BinOp::Add || op == BinOp::Sub) {
            if (ta == SecurityType::URA) {
                run = low_ura_run(a);
            }
            if (tb == SecurityType::URA) {
                run = std::max(run, low_ura_run(b));
            }
        } else if (is_mul(op)) {
            if (ta == SecurityType::URA && all_cst_known(b) && (b.min_unsigned() & 1U) != 0) {
                run = low_ura_run(a);
            } else if (tb == SecurityType::URA && all_cst_known(a) && (a.min_unsigned() & 1U) != 0) {
                run = low_ura_run(b);
            }
        }
        const SecurityType rest = join(SecurityType::WRA, join(max_level(a, true), max_level(b, true)));
        TypedBitvector out(w, RefinedBit::of(rest));
        for (unsigned i = 0; i < run; ++i) {
            out[i] = RefinedBit::of(SecurityType::URA);
        }
        return keep_stable(std::move(out));
    }
    note(log, Rule::ArithI);
    const SecurityType level = join(max_level(a), max_level(b));
    return keep_stable(TypedBitvector(w, RefinedBit::of(level)));
}

TypedBitvector infer_comp(BinOp op, const TypedBitvector& a, const TypedBitvector& b, bool same_operand,
                          RuleSet* log) {
    require_same_width(a, b, "infer_comp");
    if (op_class(op) != OpClass::Comp) {
        throw std::invalid_argument("infer_comp: not a comparison operator");
    }
    note(log, Rule::Comp);
    const auto forced = [&]() -> std::optional<bool> {
        if (same_operand) {
            return op == BinOp::Eq || op == BinOp::Le || op == BinOp::Ge || op == BinOp::Sle || op == BinOp::Sge;
        }
        if (op == BinOp::Eq || op == BinOp::Ne) {
            const bool ne_known = [&] {
                for (unsigned i = 0; i < a.width(); ++i) {
                    if (a[i].known() && b[i].known() && *a[i].value != *b[i].value) {
                        return true;
                    }
                }
                return a.max_unsigned() < b.min_unsigned() || b.max_unsigned() < a.min_unsigned();
            }();
            std::optional<bool> eq;
            if (ne_known) {
                eq = false;
            } else if (a.fully_known() && b.fully_known()) {
                eq = a.min_unsigned() == b.min_unsigned();
            }
            if (!eq) {
                return std::nullopt;
            }
            return op == BinOp::Eq ? *eq : !*eq;
        }
        // Order comparisons: decide a < b (or a <= b) from the operand intervals.
        bool is_signed = op == BinOp::Slt || op == BinOp::Sle || op == BinOp::Sgt || op == BinOp::Sge;
        using i128 = __int128;
        const i128 amin = is_signed ? i128{a.min_signed()} : i128{a.min_unsigned()};
        const i128 amax = is_signed ? i128{a.max_signed()} : i128{a.max_unsigned()};
        const i128 bmin = is_signed ? i128{b.min_signed()} : i128{b.min_unsigned()};
        const i128 bmax = is_signed ? i128{b.max_signed()} : i128{b.max_unsigned()};
        switch (op) {
        case BinOp::Lt:
        case BinOp::Slt:
            if (amax < bmin) return true;
            if (amin >= bmax) return false;
            break;
        case BinOp::Le:
        case BinOp::Sle:
            if (amax <= bmin) return true;
            if (amin > bmax) return false;
            break;
        case BinOp::Gt:
        case BinOp::Sgt:
            if (amin > bmax) return true;
            if (amax <= bmin) return false;
            break;
        case BinOp::Ge:
        case BinOp::Sge:
            if (amin >= bmax) return true;
            if (amax < bmin) return false;
            break;
        default: break;
        }
        return std::nullopt;
    }();
    if (forced) {
        return mk_constant(*forced ? 1 : 0, 1);
    }
    // A comparison against random data is a biased bit, never a uniform one.
    return mk_uniform(join(max_level(a, true), max_level(b, true)), 1);
}

TypedBitvector infer_cond(const TypedBitvector& c, const TypedBitvector& if_true, const TypedBitvector& if_false,
                          RuleSet* log) {
    if (c.width() != 1) {
        throw std::invalid_argument("infer_cond: condition must be one bit");
    }
    require_same_width(if_true, if_false, "infer_cond");
    const RefinedBit& cb = c[0];
    if (cb.known()) {
        note(log, Rule::CondII);
        return *cb.value ? if_true : if_false;
    }
    if (cb.sec == SecurityType::SDD) {
        note(log, Rule::CondI);
        return mk_uniform(SecurityType::SDD, if_true.width());
    }
    note(log, Rule::CondII);
    const SecurityType cl = cb.sec == SecurityType::URA ? SecurityType::WRA : cb.sec;
    TypedBitvector out;
    for (unsigned i = 0; i < if_true.width(); ++i) {
        const auto& x = if_true[i];
        const auto& y = if_false[i];
        if (x.sec == SecurityType::CST && y.sec == SecurityType::CST && x.known() && x == y) {
            out.push_back(x);
            continue;
        }
        SecurityType t = join(cl, join(x.sec, y.sec));
        if (t == SecurityType::URA) {
            t = SecurityType::WRA;
        }
        out.push_back(RefinedBit::of(t));
    }
    return out;
}

}  // namespace cltype
