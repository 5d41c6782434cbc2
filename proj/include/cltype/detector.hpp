#ifndef CLTYPE_DETECTOR_HPP
#define CLTYPE_DETECTOR_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cltype/annotations.hpp"
#include "cltype/layout.hpp"
#include "cltype/security.hpp"
#include "cltype/trace.hpp"

namespace cltype {

enum class FindingKind : std::uint8_t { SDMA, SDBC, SDBCLayoutUnknown };

std::string_view to_string(FindingKind k) noexcept;

struct Finding {
    FindingKind kind = FindingKind::SDMA;
    std::uint32_t site = 0;  // static instruction address
    std::uint64_t seq = 0;   // first record where it was seen
    std::string evidence;    // display form of the offending vector
    std::vector<std::uint32_t> lines;
    std::uint64_t hits = 1;
    // SDBC only: lines of each side of the branch.
    std::vector<std::uint32_t> if_lines, else_lines;
};

struct LeakageUnit {
    std::uint32_t representative = 0;
    std::vector<std::uint32_t> members;
};

/// One row of the verbose inference log.
struct LogRow {
    std::uint64_t seq = 0;
    std::uint32_t addr = 0;
    std::string instruction;
    bool tainted = false;
    std::vector<std::string> types;  // "eax={K}³²:SDD", ...
    std::string rules;               // rules of the value computations
    std::string flag_rules;          // rules of the flag updates
    std::string stmt_rules;          // Assign/Load/Store rules
    std::string control;             // BC/MA/BR column
};

struct ReportStats {
    std::uint64_t trace_length = 0;
    std::uint64_t tainted_records = 0;
    std::uint64_t sdma = 0, sdbc = 0, sdbc_layout_unknown = 0;
    std::uint64_t units = 0;
    std::uint64_t containment_violations = 0;
    double elapsed_ms = 0;
};

struct Report {
    std::vector<Finding> findings;  // sorted by site, then kind
    std::vector<LeakageUnit> units;
    ReportStats stats;
    std::vector<std::string> diagnostics;
    std::vector<std::string> containment;  // "seq N: var" pairs typed SDD/URA but not tainted
    std::vector<LogRow> log;               // verbose only
};

struct AnalysisOptions {
    CacheGeometry geometry{};
    std::uint32_t unit_gap = 32;
    bool verbose = false;
};

/// SDMA iff the line-index bits [L, 31] of the typed address have vector type SDD.
std::optional<Finding> check_sdma(const TypedBitvector& addr_vec, CacheGeometry g, std::uint32_t concrete_addr = 0);

/// `table` may be null (no layout information at all).
std::optional<Finding> check_sdbc(const TypedBitvector& flag, std::uint32_t cond_addr, const BranchTable* table,
                                  CacheGeometry g);

/// Dedupe sites, sort, and merge neighbours at most `gap` bytes apart.
std::vector<LeakageUnit> group_units(const std::vector<Finding>& findings, std::uint32_t gap = 32);

/// Full pass over the trace. Throws AnalysisError (with the record) when a record cannot be typed.
Report analyze(const std::vector<TraceRecord>& trace, const AnnotationSet& ann, const BranchTable* table,
               const AnalysisOptions& opts = {});

}  // namespace cltype

#endif
