#ifndef CLTYPE_REPORT_HPP
#define CLTYPE_REPORT_HPP

#include <string>

#include "cltype/detector.hpp"

namespace cltype {

/// Deterministic JSON: findings[], units[], stats{}, diagnostics[]. Key order is fixed.
std::string report_to_json(const Report& r, bool include_elapsed = true);

/// Findings only, one line each.
std::string render_findings(const Report& r);

/// Verbose inference log: record, refinement types, applied rules, control flow and cache lines.
std::string render_log(const Report& r);

}  // namespace cltype

#endif
