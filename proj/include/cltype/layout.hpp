#ifndef CLTYPE_LAYOUT_HPP
#define CLTYPE_LAYOUT_HPP

// Cache-line geometry and the branch lookup table.
//
//   BC 0x<cond> 0x<a> 0x<b> 0x<c> [COMMON 0x<s> 0x<e>]
//
// The if-branch occupies [a, b), the else-branch [b, c). COMMON is a range both paths fall through to.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>

namespace cltype {

struct CacheGeometry {
    unsigned line_bits = 6;

    /// Throws std::invalid_argument outside [4, 12].
    static CacheGeometry make(unsigned line_bits);
};

using LineSet = std::set<std::uint32_t>;

constexpr std::uint32_t cache_line(std::uint32_t addr, CacheGeometry g) noexcept { return addr >> g.line_bits; }

/// Lines touched by [start, end). Throws std::invalid_argument when start > end.
LineSet lines_of_range(std::uint32_t start, std::uint32_t end, CacheGeometry g);

struct BranchEntry {
    std::uint32_t cond_addr = 0;
    std::uint32_t a = 0, b = 0, c = 0;
    std::optional<std::pair<std::uint32_t, std::uint32_t>> extra_common;

    friend bool operator==(const BranchEntry&, const BranchEntry&) = default;
};

LineSet if_lines(const BranchEntry& e, CacheGeometry g);
LineSet else_lines(const BranchEntry& e, CacheGeometry g);
bool distinguishable(const BranchEntry& e, CacheGeometry g);

struct BranchTable {
    std::map<std::uint32_t, BranchEntry> entries;

    const BranchEntry* find(std::uint32_t cond_addr) const;
};

BranchTable parse_branch_table(std::string_view text, const std::string& file = {});
BranchTable load_branch_table(const std::string& path);
std::string serialize_branch_table(const BranchTable& t);

}  // namespace cltype

#endif
