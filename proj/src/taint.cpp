#include "cltype/taint.hpp"

namespace cltype {

void collect_vars(const Expr& e, std::array<bool, kNumVars>& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, VarExpr>) {
                out[static_cast<unsigned>(n.var.id)] = true;
            } else if constexpr (std::is_same_v<T, NotExpr>) {
                collect_vars(*n.operand, out);
            } else if constexpr (std::is_same_v<T, BinExpr>) {
                collect_vars(*n.lhs, out);
                collect_vars(*n.rhs, out);
            } else if constexpr (std::is_same_v<T, CondExpr>) {
                collect_vars(*n.cond, out);
                collect_vars(*n.if_true, out);
                collect_vars(*n.if_false, out);
            } else if constexpr (std::is_same_v<T, ConcatExpr>) {
                collect_vars(*n.hi, out);
                collect_vars(*n.lo, out);
            } else if constexpr (std::is_same_v<T, ExtractExpr>) {
                collect_vars(*n.operand, out);
            } else if constexpr (std::is_same_v<T, ShiftExpr>) {
                collect_vars(*n.operand, out);
                collect_vars(*n.amount, out);
            } else if constexpr (std::is_same_v<T, ExtendExpr>) {
                collect_vars(*n.operand, out);
            }
        },
        e.node);
}

bool TaintTracker::apply(const AnnotationSet& set, std::uint64_t seq) {
    bool any = false;
    for (const auto& e : set.entries) {
        if (e.seq != seq) {
            continue;
        }
        any = true;
        if (const auto* r = std::get_if<VarRef>(&e.target)) {
            vars_[static_cast<unsigned>(r->id)] = true;
        } else {
            const auto& m = std::get<ByteRange>(e.target);
            for (std::uint32_t i = 0; i < m.length; ++i) {
                bytes_.insert(m.start + i);
            }
        }
    }
    return any;
}

bool TaintTracker::step(const LiftedRecord& rec) {
    bool touched = false;
    const auto reads_tainted = [&](const std::array<bool, kNumVars>& used) {
        for (unsigned i = 0; i < kNumVars; ++i) {
            if (used[i] && vars_[i]) {
                return true;
            }
        }
        return false;
    };
    for (const auto& s : rec.stmts) {
        std::array<bool, kNumVars> used{};
        if (const auto* a = std::get_if<Assign>(&s)) {
            collect_vars(*a->value, used);
            const bool t = reads_tainted(used);
            auto& dst = vars_[static_cast<unsigned>(a->dst.id)];
            touched = touched || t || dst;
            // Temporaries are always read back through the view just written; a partial write of a
            // real register keeps whatever taint the untouched bits had.
            const bool partial = !is_temp(a->dst.id) && a->dst.width < storage_width(a->dst.id);
            dst = t || (partial && dst);
        } else if (const auto* ld = std::get_if<Load>(&s)) {
            collect_vars(*ld->base, used);
            collect_vars(*ld->index, used);
            bool t = reads_tainted(used);
            for (unsigned b = 0; b < ld->bytes; ++b) {
                t = t || bytes_.contains(ld->addr + b);
            }
            auto& dst = vars_[static_cast<unsigned>(ld->dst.id)];
            touched = touched || t || dst;
            const bool partial = !is_temp(ld->dst.id) && ld->dst.width < storage_width(ld->dst.id);
            dst = t || (partial && dst);
        } else {
            const auto& st = std::get<Store>(s);
            collect_vars(*st.value, used);
            collect_vars(*st.base, used);
            collect_vars(*st.index, used);
            const bool t = reads_tainted(used);
            touched = touched || t;
            for (unsigned b = 0; b < st.value->width / 8; ++b) {
                const std::uint32_t addr = st.addr + b;
                if (t) {
                    bytes_.insert(addr);
                } else if (bytes_.erase(addr) != 0) {
                    touched = true;
                }
            }
        }
    }
    if (rec.branch) {
        std::array<bool, kNumVars> used{};
        collect_vars(*rec.branch->condition, used);
        touched = touched || reads_tainted(used);
    }
    return touched;
}

TaintState taint_pass(const std::vector<TraceRecord>& trace, const AnnotationSet& ann) {
    TaintTracker tracker;
    TaintState out;
    for (const auto& r : trace) {
        const bool annotated = tracker.apply(ann, r.seq);
        const bool t = tracker.step(lift(r));
        if (annotated || t) {
            out.tainted_seqs.push_back(r.seq);
        }
    }
    for (unsigned i = 0; i < kNumVars; ++i) {
        const auto id = static_cast<VarId>(i);
        if (!is_temp(id) && tracker.tainted(id)) {
            out.tainted_regs.push_back(full(id));
        }
    }
    out.tainted_bytes.insert(tracker.bytes().begin(), tracker.bytes().end());
    return out;
}

}  // namespace cltype
