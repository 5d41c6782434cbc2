#ifndef CLTYPE_SECURITY_HPP
#define CLTYPE_SECURITY_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cltype {

// Security lattice, a chain: CST <= URA <= WRA <= SID <= SDD.
enum class SecurityType : std::uint8_t { CST = 0, URA = 1, WRA = 2, SID = 3, SDD = 4 };

constexpr SecurityType join(SecurityType a, SecurityType b) noexcept { return a < b ? b : a; }

std::string_view to_string(SecurityType t) noexcept;
std::optional<SecurityType> parse_security_type(std::string_view s) noexcept;

// Display letter used in bit patterns: K (SDD), I (SID), W (WRA), U (URA), C (CST without a value).
char letter(SecurityType t) noexcept;

/// One bit's refinement: a security level plus an optional value predicate `v = b`.
struct RefinedBit {
    SecurityType sec = SecurityType::SID;
    std::optional<bool> value;

    static constexpr RefinedBit constant(bool b) noexcept { return {SecurityType::CST, b}; }
    static constexpr RefinedBit of(SecurityType t) noexcept { return {t, std::nullopt}; }

    constexpr bool known() const noexcept { return value.has_value(); }
    constexpr bool is_const(bool b) const noexcept { return sec == SecurityType::CST && value == b; }
    friend constexpr bool operator==(const RefinedBit&, const RefinedBit&) = default;
};

/// Ordered sequence of refined bits, index 0 least significant. Capacity is fixed at 64 bits,
/// enough for every lifted value including edx:eax pairs.
class TypedBitvector {
public:
    static constexpr unsigned kMaxWidth = 64;

    TypedBitvector() = default;
    /// `width` copies of `bit`.
    TypedBitvector(unsigned width, RefinedBit bit);

    unsigned width() const noexcept { return width_; }
    bool empty() const noexcept { return width_ == 0; }

    const RefinedBit& operator[](unsigned i) const noexcept { return bits_[i]; }
    RefinedBit& operator[](unsigned i) noexcept { return bits_[i]; }
    const RefinedBit& at(unsigned i) const;

    const RefinedBit* begin() const noexcept { return bits_.data(); }
    const RefinedBit* end() const noexcept { return bits_.data() + width_; }

    void push_back(RefinedBit b);

    /// All bits carry value predicates.
    bool fully_known() const noexcept;
    /// Integer value when fully_known(); widths above 64 never occur.
    std::optional<std::uint64_t> known_value() const noexcept;
    /// Smallest and largest unsigned integers consistent with the value predicates.
    std::uint64_t min_unsigned() const noexcept;
    std::uint64_t max_unsigned() const noexcept;
    /// Same, for the two's-complement reading of the vector.
    std::int64_t min_signed() const noexcept;
    std::int64_t max_signed() const noexcept;

    /// MSB-first run-length pattern plus vector type, e.g. "{0}²⁴{K}⁸:SDD".
    std::string display() const;

    friend bool operator==(const TypedBitvector& a, const TypedBitvector& b) noexcept;

private:
    std::array<RefinedBit, kMaxWidth> bits_{};
    std::uint8_t width_ = 0;
};

/// Vector-level type by structural priority: SDD, then URA, then SID, then WRA, else CST.
SecurityType vector_type(const TypedBitvector& v);

/// Every bit CST with the matching binary digit of `value`.
TypedBitvector mk_constant(std::uint64_t value, unsigned width);

/// `width` bits of level `t`, no value predicates.
TypedBitvector mk_uniform(SecurityType t, unsigned width);

}  // namespace cltype

#endif
