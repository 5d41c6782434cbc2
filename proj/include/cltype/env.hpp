#ifndef CLTYPE_ENV_HPP
#define CLTYPE_ENV_HPP

#include <array>
#include <cstdint>
#include <map>
#include <variant>

#include "cltype/ir.hpp"
#include "cltype/security.hpp"

namespace cltype {

struct ByteRange {
    std::uint32_t start = 0;
    std::uint32_t length = 0;

    friend constexpr bool operator==(const ByteRange&, const ByteRange&) = default;
};

/// Register (or sub-register) view, or a range of memory bytes.
using AnnotationTarget = std::variant<VarRef, ByteRange>;

/// Flow-sensitive map from variables to typed bitvectors.
///
/// Registers are stored whole; sub-register reads and writes are views over the parent, so after
/// writing `al` the low 8 bits of `eax` hold the written bits and bits 8..31 are unchanged.
/// Memory is byte-addressed and little-endian; bytes never written read back as SID with no value.
class TypeEnv {
public:
    using ByteBits = std::array<RefinedBit, 8>;

    TypeEnv();

    TypedBitvector read(VarRef v) const;
    void write(VarRef v, const TypedBitvector& value);

    bool tracked(std::uint32_t addr) const { return mem_.contains(addr); }
    TypedBitvector read_mem(std::uint32_t addr, unsigned bytes) const;
    /// `value.width()` must be a multiple of 8.
    void write_mem(std::uint32_t addr, const TypedBitvector& value);

    const std::map<std::uint32_t, ByteBits>& memory() const noexcept { return mem_; }

    /// Sets every masked bit of `target` to `level` and drops its value predicate.
    /// `bit_mask` indexes target bits LSB-first (byte i, bit j -> 8i+j); targets wider than 64 bits
    /// must use the full mask. Only SDD and URA are accepted.
    void annotate(const AnnotationTarget& target, SecurityType level, std::uint64_t bit_mask = ~std::uint64_t{0});

    friend bool operator==(const TypeEnv&, const TypeEnv&) = default;

private:
    std::array<TypedBitvector, kNumVars> vars_;
    std::map<std::uint32_t, ByteBits> mem_;
};

/// Copying form of TypeEnv::annotate.
TypeEnv annotate(TypeEnv env, const AnnotationTarget& target, SecurityType level,
                 std::uint64_t bit_mask = ~std::uint64_t{0});

}  // namespace cltype

#endif
