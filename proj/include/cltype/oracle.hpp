#ifndef CLTYPE_ORACLE_HPP
#define CLTYPE_ORACLE_HPP

// Brute-force ground truth. A program is a straight-line list of instructions (the trace format;
// register values of record 0 are the initial state, later snapshots are ignored) plus slot lines
// binding enumerated bits to memory. Instructions may also be written without seq and snapshot,
// after an initial register line:
//
//   REGS eax=0x.. ebx=0x.. ecx=0x.. edx=0x.. esi=0x.. edi=0x.. ebp=0x.. esp=0x..
//   I 0x<addr> <instruction>
//   SLOT secret <bit-index> 0x<byte-addr> <bit-in-byte>
//   SLOT random <bit-index> 0x<byte-addr> <bit-in-byte>
//   INIT 0x<byte-addr> 0x<byte>
//
// Memory that is neither INIT nor a slot holds a fixed public byte derived from its address.
// Conditional jumps are observed but execution always continues with the next record.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cltype/annotations.hpp"
#include "cltype/detector.hpp"
#include "cltype/layout.hpp"
#include "cltype/trace.hpp"

namespace cltype {

struct Slot {
    AnnotKind kind = AnnotKind::Secret;
    unsigned index = 0;  // bit of the secret or random assignment
    std::uint32_t byte_addr = 0;
    unsigned bit = 0;  // 0..7 inside the byte
    friend bool operator==(const Slot&, const Slot&) = default;
};

struct OracleProgram {
    std::vector<TraceRecord> records;
    std::vector<Slot> slots;
    std::map<std::uint32_t, std::uint8_t> init;

    unsigned secret_bits() const;
    unsigned random_bits() const;
};

inline constexpr unsigned kMaxSecretBits = 16;
inline constexpr unsigned kMaxRandomBits = 16;
inline constexpr unsigned kMaxAssignmentBits = 24;
inline constexpr std::size_t kStepBudget = 1'000'000;

OracleProgram parse_program(std::string_view text, const std::string& file = {});
OracleProgram load_program(const std::string& path);
std::string serialize_program(const OracleProgram& p);

/// The fixed public byte standing in for memory nobody initialised.
std::uint8_t public_byte(std::uint32_t addr) noexcept;

/// Step-by-step concrete execution, for callers that stream long runs.
class ConcreteMachine {
public:
    ConcreteMachine(const OracleProgram& p, std::uint32_t secret, std::uint32_t random);
    ~ConcreteMachine();
    ConcreteMachine(ConcreteMachine&&) noexcept;
    ConcreteMachine& operator=(ConcreteMachine&&) = delete;

    const RegSnapshot& regs() const;
    void step(const TraceRecord& rec);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// First record that combines two operands depending on a common random bit (also `add r,r`-style
/// self-combination of random data), if any.
std::optional<std::uint64_t> find_randomness_reuse(const OracleProgram& p);

/// One concrete run rendered as a trace (snapshots filled in) for the given assignment.
std::vector<TraceRecord> materialize(const OracleProgram& p, std::uint32_t secret, std::uint32_t random);

/// Slot bytes as bit-masked SECRET/RANDOM annotations at seq 0.
AnnotationSet program_annotations(const OracleProgram& p);

struct GroundTruth {
    std::set<std::uint32_t> leaky_mem_sites;
    std::set<std::uint32_t> leaky_branch_sites;
    std::map<std::uint32_t, std::uint64_t> first_seq;  // every observed site -> first record
    std::vector<VarId> nonuniform_vars;                // registers whose final distribution depends on the secret
    // Instructions combining two operands that depend on a common random bit.
    std::set<std::uint32_t> reuse_sites;
    std::optional<std::uint64_t> first_reuse_seq;
};

/// A site leaks when, for two secrets, the multiset of its observation sequences over all random
/// assignments differs. Observations are cache lines for memory sites and directions for branches;
/// a branch also needs a distinguishable (or missing) table entry.
GroundTruth enumerate_leakage(const OracleProgram& p, CacheGeometry g, const BranchTable* table);

/// True iff the distribution of `var` before record `at_seq` (at_seq == size: after the last one)
/// over the random bits is the same for every secret.
bool check_uniform(const OracleProgram& p, VarRef var, std::uint64_t at_seq);

struct KnownGap {
    std::string label;
    std::string description;
};
const std::vector<KnownGap>& known_gaps();

struct FalseNegative {
    std::uint32_t site = 0;
    FindingKind kind = FindingKind::SDMA;
    std::string label;  // a known_gaps() label, or "unexplained"
};

struct Verdict {
    bool sound = true;
    std::vector<FalseNegative> false_negatives;
    bool all_catalogued() const;
};

/// Layout-unknown SDBC findings count as covering a leaky branch.
Verdict compare(const Report& report, const GroundTruth& truth);

}  // namespace cltype

#endif
