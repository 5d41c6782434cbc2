#ifndef CLTYPE_ANNOTATIONS_HPP
#define CLTYPE_ANNOTATIONS_HPP

// Sidecar file marking secrets and random factors:
//
//   SECRET reg <name> @<seq>
//   SECRET mem 0x<addr> <len> @<seq>
//   RANDOM ...                      (same shapes)

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cltype/env.hpp"

namespace cltype {

enum class AnnotKind : std::uint8_t { Secret, Random };

struct Annotation {
    AnnotKind kind = AnnotKind::Secret;
    AnnotationTarget target;
    std::uint64_t seq = 0;  // applied just before record `seq` executes
    std::uint64_t bit_mask = ~std::uint64_t{0};  // see TypeEnv::annotate; not part of the file format

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotationSet {
    std::vector<Annotation> entries;

    /// Entries with the given seq, in file order.
    std::vector<const Annotation*> at(std::uint64_t seq) const;
    /// Throws std::invalid_argument when two entries at the same seq touch the same bit, or when an
    /// entry's seq is not below `trace_length`.
    void validate(std::uint64_t trace_length) const;
};

SecurityType level_of(AnnotKind k) noexcept;

AnnotationSet parse_annotations(std::string_view text, const std::string& file = {});
AnnotationSet load_annotations(const std::string& path);
std::string serialize_annotations(const AnnotationSet& set);

/// Environment with every seq-0 entry applied; same overlap check as apply_annotations.
TypeEnv build_initial_env(const AnnotationSet& set);
/// Applies the entries for `seq` to `env`. Throws std::invalid_argument when two of them share a bit.
void apply_annotations(TypeEnv& env, const AnnotationSet& set, std::uint64_t seq);

}  // namespace cltype

#endif
