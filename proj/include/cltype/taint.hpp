#ifndef CLTYPE_TAINT_HPP
#define CLTYPE_TAINT_HPP

// Forward explicit-flow taint over whole registers and single bytes. It only decides which
// records are worth inspecting; all precision lives in the type system.

#include <array>
#include <cstdint>
#include <set>
#include <unordered_set>
#include <vector>

#include "cltype/annotations.hpp"
#include "cltype/lifter.hpp"
#include "cltype/trace.hpp"

namespace cltype {

class TaintTracker {
public:
    /// Marks the targets of the entries for `seq` as tainted. Returns true if there were any.
    bool apply(const AnnotationSet& set, std::uint64_t seq);
    /// Propagates through one lifted record. Returns true iff the record reads or overwrites
    /// tainted state (for conditional jumps: consumes a tainted flag).
    bool step(const LiftedRecord& rec);

    bool tainted(VarId v) const noexcept { return vars_[static_cast<unsigned>(v)]; }
    bool tainted_byte(std::uint32_t addr) const { return bytes_.contains(addr); }
    const std::unordered_set<std::uint32_t>& bytes() const noexcept { return bytes_; }

private:
    std::array<bool, kNumVars> vars_{};
    std::unordered_set<std::uint32_t> bytes_;
};

struct TaintState {
    std::vector<VarRef> tainted_regs;        // whole storage locations, after the last record
    std::set<std::uint32_t> tainted_bytes;   // after the last record
    std::vector<std::uint64_t> tainted_seqs; // ascending
};

TaintState taint_pass(const std::vector<TraceRecord>& trace, const AnnotationSet& ann);

/// Storage locations an expression reads.
void collect_vars(const Expr& e, std::array<bool, kNumVars>& out);

}  // namespace cltype

#endif
