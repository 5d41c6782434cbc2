#include "cltype/ir.hpp"

#include <array>
#include <sstream>
#include <stdexcept>

namespace cltype {

namespace {

constexpr std::array<std::string_view, kNumVars> kStorageNames = {
    "eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp", "zf", "cf", "sf", "of", "slt", "t0", "t1", "t2",
};

struct SubReg {
    std::string_view name;
    VarId id;
    std::uint8_t lo;
    std::uint8_t width;
};

constexpr std::array<SubReg, 16> kSubRegs = {{
    {"ax", VarId::eax, 0, 16}, {"bx", VarId::ebx, 0, 16}, {"cx", VarId::ecx, 0, 16}, {"dx", VarId::edx, 0, 16},
    {"si", VarId::esi, 0, 16}, {"di", VarId::edi, 0, 16}, {"bp", VarId::ebp, 0, 16}, {"sp", VarId::esp, 0, 16},
    {"al", VarId::eax, 0, 8},  {"bl", VarId::ebx, 0, 8},  {"cl", VarId::ecx, 0, 8},  {"dl", VarId::edx, 0, 8},
    {"ah", VarId::eax, 8, 8},  {"bh", VarId::ebx, 8, 8},  {"ch", VarId::ecx, 8, 8},  {"dh", VarId::edx, 8, 8},
}};

void require(bool ok, const char* what) {
    if (!ok) {
        throw std::invalid_argument(what);
    }
}

ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

}  // namespace

unsigned storage_width(VarId id) noexcept {
    if (is_gpr(id)) {
        return 32;
    }
    if (is_flag(id)) {
        return 1;
    }
    return 64;
}

VarRef full(VarId id) noexcept { return {id, 0, static_cast<std::uint8_t>(storage_width(id))}; }

std::optional<VarRef> var_by_name(std::string_view name) noexcept {
    for (unsigned i = 0; i < kNumVars; ++i) {
        if (kStorageNames[i] == name) {
            return full(static_cast<VarId>(i));
        }
    }
    for (const auto& s : kSubRegs) {
        if (s.name == name) {
            return VarRef{s.id, s.lo, s.width};
        }
    }
    return std::nullopt;
}

std::string var_name(const VarRef& v) {
    if (v == full(v.id)) {
        return std::string(kStorageNames[static_cast<unsigned>(v.id)]);
    }
    for (const auto& s : kSubRegs) {
        if (s.id == v.id && s.lo == v.lo && s.width == v.width) {
            return std::string(s.name);
        }
    }
    std::ostringstream os;
    os << kStorageNames[static_cast<unsigned>(v.id)] << '[' << unsigned{v.lo} << ':'
       << unsigned{v.lo} + v.width - 1 << ']';
    return os.str();
}

OpClass op_class(BinOp op) noexcept {
    switch (op) {
    case BinOp::And:
    case BinOp::Or:
    case BinOp::Xor: return OpClass::Logic;
    case BinOp::Add:
    case BinOp::Sub:
    case BinOp::Mul:
    case BinOp::MulHigh:
    case BinOp::SMulHigh:
    case BinOp::Div:
    case BinOp::Rem: return OpClass::Arith;
    default: return OpClass::Comp;
    }
}

std::string_view to_string(BinOp op) noexcept {
    switch (op) {
    case BinOp::And: return "&";
    case BinOp::Or: return "|";
    case BinOp::Xor: return "^";
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::MulHigh: return "*hi";
    case BinOp::SMulHigh: return "*shi";
    case BinOp::Div: return "/";
    case BinOp::Rem: return "%";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Slt: return "<s";
    case BinOp::Sle: return "<=s";
    case BinOp::Sgt: return ">s";
    case BinOp::Sge: return ">=s";
    }
    return "?";
}

ExprPtr constant(std::uint64_t value, unsigned width) { return constant(mk_constant(value, width)); }

ExprPtr constant(TypedBitvector value) {
    require(!value.empty(), "constant: empty bitvector");
    const unsigned w = value.width();
    return make({ConstExpr{std::move(value)}, w});
}

ExprPtr var(VarRef v) {
    require(v.width > 0 && v.lo + v.width <= storage_width(v.id), "var: view exceeds storage");
    return make({VarExpr{v}, v.width});
}

ExprPtr var(VarId id) { return var(full(id)); }

ExprPtr bnot(ExprPtr e) {
    const unsigned w = e->width;
    return make({NotExpr{std::move(e)}, w});
}

ExprPtr binop(BinOp op, ExprPtr lhs, ExprPtr rhs, bool same_operand) {
    require(lhs->width == rhs->width, "binop: operand widths differ");
    const unsigned w = op_class(op) == OpClass::Comp ? 1 : lhs->width;
    return make({BinExpr{op, std::move(lhs), std::move(rhs), same_operand}, w});
}

ExprPtr cond(ExprPtr c, ExprPtr if_true, ExprPtr if_false) {
    require(c->width == 1, "cond: condition must be one bit");
    require(if_true->width == if_false->width, "cond: branch widths differ");
    const unsigned w = if_true->width;
    return make({CondExpr{std::move(c), std::move(if_true), std::move(if_false)}, w});
}

ExprPtr concat(ExprPtr hi, ExprPtr lo) {
    const unsigned w = hi->width + lo->width;
    require(w <= TypedBitvector::kMaxWidth, "concat: result wider than 64 bits");
    return make({ConcatExpr{std::move(hi), std::move(lo)}, w});
}

ExprPtr extract(unsigned lo, unsigned hi, ExprPtr e) {
    require(lo <= hi && hi < e->width, "extract: indices out of range");
    return make({ExtractExpr{lo, hi, std::move(e)}, hi - lo + 1});
}

ExprPtr shift(ShiftKind kind, ExprPtr e, ExprPtr amount) {
    const unsigned w = e->width;
    return make({ShiftExpr{kind, std::move(e), std::move(amount)}, w});
}

ExprPtr extend(ExprPtr e, unsigned width, bool is_signed) {
    require(width >= e->width && width <= TypedBitvector::kMaxWidth, "extend: bad target width");
    return make({ExtendExpr{std::move(e), width, is_signed}, width});
}

namespace {

struct ExprPrinter {
    std::ostream& os;

    void operator()(const ConstExpr& c) const {
        if (auto v = c.value.known_value()) {
            os << "0x" << std::hex << *v << std::dec;
        } else {
            os << c.value.display();
        }
    }
    void operator()(const VarExpr& v) const { os << var_name(v.var); }
    void operator()(const NotExpr& n) const {
        os << "~";
        print(*n.operand);
    }
    void operator()(const BinExpr& b) const {
        os << '(';
        print(*b.lhs);
        os << ' ' << to_string(b.op) << ' ';
        print(*b.rhs);
        os << ')';
    }
    void operator()(const CondExpr& c) const {
        os << '(';
        print(*c.cond);
        os << " ? ";
        print(*c.if_true);
        os << " : ";
        print(*c.if_false);
        os << ')';
    }
    void operator()(const ConcatExpr& c) const {
        os << '(';
        print(*c.hi);
        os << " # ";
        print(*c.lo);
        os << ')';
    }
    void operator()(const ExtractExpr& e) const {
        os << '[' << e.lo << ':' << e.hi << "]/";
        print(*e.operand);
    }
    void operator()(const ShiftExpr& s) const {
        static constexpr const char* kOps[] = {"<<", ">>", ">>s"};
        os << '(';
        print(*s.operand);
        os << ' ' << kOps[static_cast<unsigned>(s.kind)] << ' ';
        print(*s.amount);
        os << ')';
    }
    void operator()(const ExtendExpr& e) const {
        os << (e.is_signed ? "sext" : "zext") << e.width << '(';
        print(*e.operand);
        os << ')';
    }
    void print(const Expr& e) const { std::visit(*this, e.node); }
};

}  // namespace

std::string to_string(const Expr& e) {
    std::ostringstream os;
    ExprPrinter{os}.print(e);
    return os.str();
}

std::string to_string(const Stmt& s) {
    std::ostringstream os;
    std::visit(
        [&](const auto& st) {
            using T = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<T, Assign>) {
                os << var_name(st.dst) << " <- " << to_string(*st.value);
            } else if constexpr (std::is_same_v<T, Load>) {
                os << var_name(st.dst) << " <- " << to_string(*st.base) << '[' << to_string(*st.index) << "] @0x"
                   << std::hex << st.addr << std::dec;
            } else {
                os << to_string(*st.base) << '[' << to_string(*st.index) << "] @0x" << std::hex << st.addr
                   << std::dec << " <- " << to_string(*st.value);
            }
        },
        s);
    return os.str();
}

}  // namespace cltype
