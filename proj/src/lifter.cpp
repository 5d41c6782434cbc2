#include "cltype/lifter.hpp"

#include "cltype/errors.hpp"

namespace cltype {

namespace {

VarRef temp(VarId id, unsigned width) { return {id, 0, static_cast<std::uint8_t>(width)}; }

ExprPtr bit(const ExprPtr& e, unsigned i) { return extract(i, i, e); }
ExprPtr msb(const ExprPtr& e) { return bit(e, e->width - 1); }
ExprPtr zero(unsigned w) { return constant(0, w); }

class Lifter {
public:
    explicit Lifter(const TraceRecord& rec) : rec_(rec), ins_(rec.op) {}

    LiftedRecord run();

private:
    const TraceRecord& rec_;
    const Instruction& ins_;
    LiftedRecord out_;

    void emit(Stmt s) { out_.stmts.push_back(std::move(s)); }
    void assign(VarRef dst, ExprPtr e) { emit(Assign{dst, std::move(e)}); }
    void set_flag(VarId f, ExprPtr e) { assign(full(f), std::move(e)); }

    unsigned width(unsigned i) const { return operand_width(ins_, i); }

    std::pair<ExprPtr, ExprPtr> address_parts(const MemOperand& m) const {
        ExprPtr index;
        if (m.base) {
            index = var(*m.base);
        }
        if (m.index) {
            ExprPtr scaled = var(*m.index);
            if (m.scale != 1) {
                scaled = binop(BinOp::Mul, scaled, constant(m.scale, 32));
            }
            index = index ? binop(BinOp::Add, index, scaled) : scaled;
        }
        return {constant(m.disp, 32), index ? index : zero(32)};
    }

    // Value of operand i at `w` bits; memory is loaded into `tmp` first.
    ExprPtr read(unsigned i, unsigned w, VarId tmp = VarId::t1) {
        const auto& o = ins_.op(i);
        if (o.is_reg()) {
            return var(o.reg);
        }
        if (o.is_imm()) {
            const std::uint64_t mask = w >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << w) - 1;
            // Narrow immediates are sign-extended to the operand width.
            std::uint64_t v = o.imm;
            if ((v & 0x80000000U) != 0) {
                v |= 0xffffffff00000000ULL;
            }
            return constant(v & mask, w);
        }
        const auto [base, index] = address_parts(o.mem);
        const auto t = temp(tmp, w);
        emit(Load{t, base, index, resolve_address(o.mem, rec_.regs), w / 8});
        return var(t);
    }

    void write(unsigned i, ExprPtr value) {
        const auto& o = ins_.op(i);
        if (o.is_reg()) {
            assign(o.reg, std::move(value));
            return;
        }
        if (!o.is_mem()) {
            throw LiftError("destination is not a register or memory operand: " + to_string(ins_));
        }
        const auto [base, index] = address_parts(o.mem);
        emit(Store{base, index, resolve_address(o.mem, rec_.regs), std::move(value)});
    }

    bool same_operands() const {
        return ins_.nops >= 2 && ins_.ops[0].is_reg() && ins_.ops[1].is_reg() && ins_.ops[0].reg == ins_.ops[1].reg;
    }

    void result_flags(const ExprPtr& t) {
        set_flag(VarId::zf, binop(BinOp::Eq, t, zero(t->width)));
        set_flag(VarId::sf, msb(t));
    }

    void binary();
    void shift();
    void multiply();
    void divide();
    void branch(VarId flag, bool negate);
    void cmov(VarId flag, bool negate);
};

void Lifter::binary() {
    const auto m = ins_.mnemonic;
    const unsigned w = width(0);
    const bool same = same_operands();
    const ExprPtr a = read(0, w);
    const ExprPtr b = same ? a : read(1, w);
    BinOp op = BinOp::And;
    switch (m) {
    case Mnemonic::add: op = BinOp::Add; break;
    case Mnemonic::sub:
    case Mnemonic::cmp: op = BinOp::Sub; break;
    case Mnemonic::and_:
    case Mnemonic::test: op = BinOp::And; break;
    case Mnemonic::or_: op = BinOp::Or; break;
    case Mnemonic::xor_: op = BinOp::Xor; break;
    default: throw LiftError("not a binary operation");
    }
    const auto t = var(temp(VarId::t0, w));
    assign(temp(VarId::t0, w), binop(op, a, b, same));
    if (op == BinOp::Add || op == BinOp::Sub) {
        const auto sa = msb(a), sb = msb(b), sr = msb(t);
        if (op == BinOp::Add) {
            result_flags(t);
            set_flag(VarId::cf, binop(BinOp::Lt, t, a));
            set_flag(VarId::of, binop(BinOp::And, bnot(binop(BinOp::Xor, sa, sb, same)), binop(BinOp::Xor, sr, sa)));
            set_flag(VarId::slt, binop(BinOp::Xor, var(VarId::sf), var(VarId::of)));
        } else {
            set_flag(VarId::zf, binop(BinOp::Eq, a, b, same));
            set_flag(VarId::sf, sr);
            set_flag(VarId::cf, binop(BinOp::Lt, a, b, same));
            set_flag(VarId::of, binop(BinOp::And, binop(BinOp::Xor, sa, sb, same), binop(BinOp::Xor, sr, sa)));
            set_flag(VarId::slt, binop(BinOp::Slt, a, b, same));
        }
    } else {
        result_flags(t);
        set_flag(VarId::cf, zero(1));
        set_flag(VarId::of, zero(1));
        set_flag(VarId::slt, var(VarId::sf));
    }
    if (m != Mnemonic::cmp && m != Mnemonic::test) {
        write(0, t);
    }
}

void Lifter::shift() {
    const auto m = ins_.mnemonic;
    const unsigned w = width(0);
    const auto& c = ins_.op(1);
    unsigned n = 0;
    ExprPtr amount;
    if (c.is_imm()) {
        n = c.imm & 0x1f;
        amount = constant(n, 8);
    } else {
        n = rec_.regs[static_cast<unsigned>(VarId::ecx)] & 0x1f;
        amount = binop(BinOp::And, var(c.reg), constant(0x1f, 8));
    }
    const ExprPtr a = read(0, w);
    const ShiftKind kind = m == Mnemonic::shl   ? ShiftKind::Left
                           : m == Mnemonic::shr ? ShiftKind::RightLogical
                                                : ShiftKind::RightArith;
    const auto t = var(temp(VarId::t0, w));
    assign(temp(VarId::t0, w), cltype::shift(kind, a, amount));
    if (n != 0) {
        result_flags(t);
        ExprPtr cf;
        if (kind == ShiftKind::Left) {
            cf = n <= w ? bit(a, w - n) : zero(1);
        } else if (n <= w) {
            cf = bit(a, n - 1);
        } else {
            cf = kind == ShiftKind::RightArith ? msb(a) : zero(1);
        }
        set_flag(VarId::cf, cf);
        if (kind == ShiftKind::Left) {
            set_flag(VarId::of, binop(BinOp::Xor, msb(t), var(VarId::cf)));
        } else if (kind == ShiftKind::RightLogical) {
            set_flag(VarId::of, msb(a));
        } else {
            set_flag(VarId::of, zero(1));
        }
        set_flag(VarId::slt, binop(BinOp::Xor, var(VarId::sf), var(VarId::of)));
    }
    write(0, t);
}

void Lifter::multiply() {
    const auto m = ins_.mnemonic;
    const bool is_signed = m == Mnemonic::imul;
    const auto wide = [&](ExprPtr e) { return extend(std::move(e), 64, is_signed); };
    ExprPtr x, y;
    if (ins_.nops == 1) {
        x = var(VarId::eax);
        y = read(0, 32);
    } else if (ins_.nops == 2) {
        x = var(ins_.op(0).reg);
        y = read(1, 32);
    } else {
        x = read(1, 32);
        y = read(2, 32);
    }
    const auto t0 = temp(VarId::t0, 64);
    assign(t0, binop(BinOp::Mul, wide(x), wide(y)));
    const auto lo = extract(0, 31, var(t0));
    const auto hi = extract(32, 63, var(t0));
    // cf = of = the high half is not the extension of the low half.
    const auto overflow = is_signed ? binop(BinOp::Ne, var(t0), extend(lo, 64, true)) : binop(BinOp::Ne, hi, zero(32));
    set_flag(VarId::cf, overflow);
    set_flag(VarId::of, var(VarId::cf));
    set_flag(VarId::slt, binop(BinOp::Xor, var(VarId::sf), var(VarId::of)));
    if (ins_.nops == 1) {
        assign(full(VarId::edx), hi);
        assign(full(VarId::eax), lo);
    } else {
        assign(ins_.op(0).reg, lo);
    }
}

void Lifter::divide() {
    const auto divisor = read(0, 32);
    const auto t0 = temp(VarId::t0, 64);
    const auto t1 = temp(VarId::t1, 64);
    const auto t2 = temp(VarId::t2, 64);
    assign(t1, extend(divisor, 64, false));
    assign(t0, concat(var(VarId::edx), var(VarId::eax)));
    assign(t2, binop(BinOp::Div, var(t0), var(t1)));
    assign(full(VarId::edx), extract(0, 31, binop(BinOp::Rem, var(t0), var(t1))));
    assign(full(VarId::eax), extract(0, 31, var(t2)));
}

void Lifter::branch(VarId flag, bool negate) {
    ExprPtr c = var(flag);
    if (negate) {
        c = bnot(c);
    }
    out_.branch = BranchEvent{rec_.addr, ins_.op(0).imm, flag, c};
}

void Lifter::cmov(VarId flag, bool negate) {
    const unsigned w = width(0);
    const ExprPtr src = read(1, w);
    const ExprPtr dst = var(ins_.op(0).reg);
    ExprPtr c = var(flag);
    if (negate) {
        c = bnot(c);
    }
    assign(ins_.op(0).reg, cond(c, src, dst));
}

LiftedRecord Lifter::run() {
    switch (ins_.mnemonic) {
    case Mnemonic::mov: {
        const unsigned w = width(0);
        const auto& d = ins_.op(0);
        const auto& s = ins_.op(1);
        if (d.is_reg() && s.is_mem()) {
            const auto [base, index] = address_parts(s.mem);
            emit(Load{d.reg, base, index, resolve_address(s.mem, rec_.regs), w / 8});
        } else {
            write(0, read(1, w));
        }
        break;
    }
    case Mnemonic::movzx:
    case Mnemonic::movsx: {
        const auto src = read(1, width(1));
        assign(ins_.op(0).reg, extend(src, width(0), ins_.mnemonic == Mnemonic::movsx));
        break;
    }
    case Mnemonic::lea: {
        const auto [base, index] = address_parts(ins_.op(1).mem);
        assign(ins_.op(0).reg, binop(BinOp::Add, base, index));
        break;
    }
    case Mnemonic::add:
    case Mnemonic::sub:
    case Mnemonic::and_:
    case Mnemonic::or_:
    case Mnemonic::xor_:
    case Mnemonic::cmp:
    case Mnemonic::test: binary(); break;
    case Mnemonic::not_: write(0, bnot(read(0, width(0)))); break;
    case Mnemonic::neg: {
        const unsigned w = width(0);
        const auto a = read(0, w);
        const auto t = var(temp(VarId::t0, w));
        assign(temp(VarId::t0, w), binop(BinOp::Sub, zero(w), a));
        result_flags(t);
        set_flag(VarId::cf, binop(BinOp::Ne, a, zero(w)));
        set_flag(VarId::of, binop(BinOp::Eq, a, constant(std::uint64_t{1} << (w - 1), w)));
        set_flag(VarId::slt, binop(BinOp::Xor, var(VarId::sf), var(VarId::of)));
        write(0, t);
        break;
    }
    case Mnemonic::shl:
    case Mnemonic::shr:
    case Mnemonic::sar: shift(); break;
    case Mnemonic::mul:
    case Mnemonic::imul: multiply(); break;
    case Mnemonic::div: divide(); break;
    case Mnemonic::jmp: out_.jump_target = ins_.op(0).imm; break;
    case Mnemonic::je: branch(VarId::zf, false); break;
    case Mnemonic::jne: branch(VarId::zf, true); break;
    case Mnemonic::jb: branch(VarId::cf, false); break;
    case Mnemonic::jae: branch(VarId::cf, true); break;
    case Mnemonic::jl: branch(VarId::slt, false); break;
    case Mnemonic::jge: branch(VarId::slt, true); break;
    case Mnemonic::cmove: cmov(VarId::zf, false); break;
    case Mnemonic::cmovne: cmov(VarId::zf, true); break;
    case Mnemonic::cmovb: cmov(VarId::cf, false); break;
    case Mnemonic::cmovae: cmov(VarId::cf, true); break;
    case Mnemonic::cmovl: cmov(VarId::slt, false); break;
    case Mnemonic::cmovge: cmov(VarId::slt, true); break;
    case Mnemonic::push: {
        const auto value = read(0, 32);
        const std::uint32_t esp = rec_.regs[static_cast<unsigned>(VarId::esp)];
        emit(Store{constant(0xfffffffcU, 32), var(VarId::esp), esp - 4, value});
        assign(full(VarId::esp), binop(BinOp::Sub, var(VarId::esp), constant(4, 32)));
        break;
    }
    case Mnemonic::pop: {
        const std::uint32_t esp = rec_.regs[static_cast<unsigned>(VarId::esp)];
        const auto& d = ins_.op(0);
        if (d.is_reg()) {
            emit(Load{d.reg, zero(32), var(VarId::esp), esp, 4});
        } else {
            emit(Load{temp(VarId::t1, 32), zero(32), var(VarId::esp), esp, 4});
        }
        assign(full(VarId::esp), binop(BinOp::Add, var(VarId::esp), constant(4, 32)));
        if (d.is_mem()) {
            // The destination address is computed with the incremented esp.
            RegSnapshot after = rec_.regs;
            after[static_cast<unsigned>(VarId::esp)] = esp + 4;
            const auto [base, index] = address_parts(d.mem);
            emit(Store{base, index, resolve_address(d.mem, after), var(temp(VarId::t1, 32))});
        }
        break;
    }
    }
    return std::move(out_);
}

}  // namespace

LiftedRecord lift(const TraceRecord& rec) { return Lifter(rec).run(); }

}  // namespace cltype
