#ifndef CLTYPE_EVAL_HPP
#define CLTYPE_EVAL_HPP

#include <optional>

#include "cltype/env.hpp"
#include "cltype/ir.hpp"
#include "cltype/rules.hpp"

namespace cltype {

/// What one statement did, for logs and detectors.
struct StmtTrace {
    RuleSet rules;       // expression rules of the value
    RuleSet addr_rules;  // rules of the address computation
    RuleSet stmt_rules;  // Assign-*, Load-*, Store-*
    std::optional<TypedBitvector> address;  // typed address of a Load or Store
    TypedBitvector value;                   // bits written to the destination
};

TypedBitvector eval(const Expr& e, const TypeEnv& env, RuleSet* log = nullptr);

/// Typed address `base + index` of a memory operand.
TypedBitvector eval_address(const Expr& base, const Expr& index, const TypeEnv& env, RuleSet* log = nullptr);

void exec_in_place(const Stmt& s, TypeEnv& env, StmtTrace* trace = nullptr);

/// Applies `s` to a copy of `env`.
TypeEnv exec_stmt(const Stmt& s, TypeEnv env);
/// `s1; s2; ...` threaded left to right.
TypeEnv exec_seq(const StmtSeq& seq, TypeEnv env);

}  // namespace cltype

#endif
