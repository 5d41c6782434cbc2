#include "cltype/eval.hpp"

#include <algorithm>

namespace cltype {

namespace {

struct Evaluator {
    const TypeEnv& env;
    RuleSet* log;

    TypedBitvector operator()(const ConstExpr& c) const { return c.value; }
    TypedBitvector operator()(const VarExpr& v) const { return env.read(v.var); }
    TypedBitvector operator()(const NotExpr& n) const { return infer_not_vec(run(*n.operand), log); }
    TypedBitvector operator()(const BinExpr& b) const {
        const auto l = run(*b.lhs);
        const auto r = b.same_operand ? l : run(*b.rhs);
        switch (op_class(b.op)) {
        case OpClass::Logic: return infer_logic_vec(b.op, l, r, b.same_operand, log);
        case OpClass::Arith: return infer_arith(b.op, l, r, b.same_operand, log);
        case OpClass::Comp: return infer_comp(b.op, l, r, b.same_operand, log);
        }
        return {};
    }
    TypedBitvector operator()(const CondExpr& c) const {
        return infer_cond(run(*c.cond), run(*c.if_true), run(*c.if_false), log);
    }
    TypedBitvector operator()(const ConcatExpr& c) const { return infer_concat(run(*c.hi), run(*c.lo), log); }
    TypedBitvector operator()(const ExtractExpr& e) const { return infer_extract(e.lo, e.hi, run(*e.operand), log); }
    TypedBitvector operator()(const ShiftExpr& s) const {
        return infer_shift(run(*s.operand), run(*s.amount), s.kind, log);
    }
    TypedBitvector operator()(const ExtendExpr& e) const {
        return infer_extend(run(*e.operand), e.width, e.is_signed, log);
    }

    TypedBitvector run(const Expr& e) const { return std::visit(*this, e.node); }
};

SecurityType max_bit_level(const TypeEnv::ByteBits& bits) {
    SecurityType t = SecurityType::CST;
    for (const auto& b : bits) {
        t = join(t, b.sec);
    }
    return t;
}

bool any_known(const TypedBitvector& v) {
    for (const auto& b : v) {
        if (b.known()) {
            return true;
        }
    }
    return false;
}

bool any_unknown(const TypedBitvector& v) {
    for (const auto& b : v) {
        if (!b.known()) {
            return true;
        }
    }
    return false;
}

bool random_address(SecurityType t) { return t == SecurityType::URA || t == SecurityType::WRA; }

void exec_load(const Load& ld, TypeEnv& env, StmtTrace& tr) {
    auto addr = eval_address(*ld.base, *ld.index, env, &tr.addr_rules);
    const auto t = vector_type(addr);
    const unsigned width = 8 * ld.bytes;
    TypedBitvector value;
    if (t == SecurityType::SDD) {
        // Which cell is read depends on the secret, so the value does too.
        value = mk_uniform(SecurityType::SDD, width);
        tr.stmt_rules.add(Rule::LoadIII);
    } else if (random_address(t)) {
        // Any cell in the reachable range may be read; untracked cells are SID.
        SecurityType level = SecurityType::SID;
        const std::uint64_t lo = addr.min_unsigned();
        const std::uint64_t hi = std::min<std::uint64_t>(addr.max_unsigned() + ld.bytes - 1, 0xffffffffULL);
        const auto& mem = env.memory();
        for (auto it = mem.lower_bound(static_cast<std::uint32_t>(lo)); it != mem.end() && it->first <= hi; ++it) {
            level = join(level, max_bit_level(it->second));
        }
        value = mk_uniform(level, width);
        tr.stmt_rules.add(Rule::LoadIII);
    } else {
        value = env.read_mem(ld.addr, ld.bytes);
        bool untracked = false;
        for (unsigned b = 0; b < ld.bytes; ++b) {
            untracked = untracked || !env.tracked(ld.addr + b);
        }
        if (untracked) {
            tr.stmt_rules.add(Rule::LoadIII);
        }
        if (any_known(value)) {
            tr.stmt_rules.add(Rule::LoadI);
        }
        if (!untracked && any_unknown(value)) {
            tr.stmt_rules.add(Rule::LoadII);
        }
    }
    if (value.width() != ld.dst.width) {
        throw std::invalid_argument("load: destination width does not match access size");
    }
    env.write(ld.dst, value);
    tr.address = std::move(addr);
    tr.value = std::move(value);
}

void exec_store(const Store& st, TypeEnv& env, StmtTrace& tr) {
    auto value = eval(*st.value, env, &tr.rules);
    auto addr = eval_address(*st.base, *st.index, env, &tr.addr_rules);
    if (value.width() % 8 != 0) {
        throw std::invalid_argument("store: value is not a whole number of bytes");
    }
    const auto t = vector_type(addr);
    if (t == SecurityType::SDD || random_address(t)) {
        // The concrete cell is only one of the possible targets: mix the new bits with what was there.
        const auto old = env.read_mem(st.addr, value.width() / 8);
        const SecurityType floor = t == SecurityType::SDD ? SecurityType::SDD : SecurityType::WRA;
        for (unsigned i = 0; i < value.width(); ++i) {
            value[i] = RefinedBit::of(join(floor, join(value[i].sec, old[i].sec)));
        }
        tr.stmt_rules.add(Rule::StoreII);
    } else {
        if (any_known(value)) {
            tr.stmt_rules.add(Rule::StoreI);
        }
        if (any_unknown(value)) {
            tr.stmt_rules.add(Rule::StoreII);
        }
    }
    env.write_mem(st.addr, value);
    tr.address = std::move(addr);
    tr.value = std::move(value);
}

}  // namespace

TypedBitvector eval(const Expr& e, const TypeEnv& env, RuleSet* log) { return Evaluator{env, log}.run(e); }

TypedBitvector eval_address(const Expr& base, const Expr& index, const TypeEnv& env, RuleSet* log) {
    return infer_arith(BinOp::Add, eval(base, env, log), eval(index, env, log), false, log);
}

void exec_in_place(const Stmt& s, TypeEnv& env, StmtTrace* trace) {
    StmtTrace local;
    StmtTrace& tr = trace != nullptr ? *trace : local;
    if (const auto* a = std::get_if<Assign>(&s)) {
        auto v = eval(*a->value, env, &tr.rules);
        tr.stmt_rules.add(any_known(v) ? Rule::AssignI : Rule::AssignII);
        env.write(a->dst, v);
        tr.value = std::move(v);
    } else if (const auto* ld = std::get_if<Load>(&s)) {
        exec_load(*ld, env, tr);
    } else {
        exec_store(std::get<Store>(s), env, tr);
    }
}

TypeEnv exec_stmt(const Stmt& s, TypeEnv env) {
    exec_in_place(s, env);
    return env;
}

TypeEnv exec_seq(const StmtSeq& seq, TypeEnv env) {
    for (const auto& s : seq) {
        exec_in_place(s, env);
    }
    return env;
}

}  // namespace cltype
