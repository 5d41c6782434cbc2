#ifndef CLTYPE_LIFTER_HPP
#define CLTYPE_LIFTER_HPP

#include <cstdint>
#include <optional>

#include "cltype/ir.hpp"
#include "cltype/trace.hpp"

namespace cltype {

/// A conditional jump: no state change, just the one-bit condition it consumes.
struct BranchEvent {
    std::uint32_t cond_addr = 0;
    std::uint32_t target = 0;
    VarId flag = VarId::zf;
    ExprPtr condition;  // width 1, true when the jump is taken
};

struct LiftedRecord {
    StmtSeq stmts;
    std::optional<BranchEvent> branch;
    std::optional<std::uint32_t> jump_target;  // unconditional jmp
};

/// Pure function of the record. Memory operands carry the address resolved from `rec.regs`.
/// Flags follow two's-complement rules: zf = (result == 0), sf = msb, cf/of per operation, plus the
/// auxiliary `slt` flag (sf != of) consumed by jl/jge/cmovl/cmovge. Logic ops clear cf and of;
/// shifts by a count of zero leave every flag untouched; mul/imul/div leave zf and sf untouched.
/// Throws LiftError for operand forms the IR cannot express.
LiftedRecord lift(const TraceRecord& rec);

}  // namespace cltype

#endif
