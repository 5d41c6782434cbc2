#ifndef CLTYPE_GENERATOR_HPP
#define CLTYPE_GENERATOR_HPP

// Random micro-x86 programs for the oracle suite and long synthetic traces for timing.
//
// Memory map: secret bits in the byte at 0x5000, random bits in the byte at 0x6000, public scratch
// words at 0x7000, table reads at [idx+0x10000] and write-only sinks at [idx+0x20000] after
// `and idx,0x3fff`. Conditional jumps target their own fallthrough, so every run takes one path.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "cltype/layout.hpp"
#include "cltype/oracle.hpp"

namespace cltype {

struct GenOptions {
    unsigned max_instructions = 30;
    unsigned max_secret_bits = 8;
    unsigned max_random_bits = 4;
};

struct GeneratedProgram {
    OracleProgram program;
    BranchTable table;
};

/// Deterministic in `seed`. Randomness is single-use: no instruction combines two values that depend
/// on a common random bit.
GeneratedProgram gen_program(std::uint64_t seed, const GenOptions& opts = {});

inline constexpr std::uint64_t kMaxTraceLength = 10'000'000;

struct TraceArtifacts {
    std::string annotations;
    std::string branch_table;
};

/// Streams `length` records of a loop over a generated body of `body_size` instructions (the last one
/// jumps back). Throws std::invalid_argument past kMaxTraceLength or for a body smaller than 6.
TraceArtifacts gen_trace(std::uint64_t length, unsigned body_size, std::uint64_t seed, std::ostream& out);

}  // namespace cltype

#endif
