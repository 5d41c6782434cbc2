#include "cltype/layout.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cltype/errors.hpp"

namespace cltype {

CacheGeometry CacheGeometry::make(unsigned line_bits) {
    if (line_bits < 4 || line_bits > 12) {
        throw std::invalid_argument("cache line bits must be in [4, 12]");
    }
    return CacheGeometry{line_bits};
}

LineSet lines_of_range(std::uint32_t start, std::uint32_t end, CacheGeometry g) {
    if (start > end) {
        throw std::invalid_argument("lines_of_range: start > end");
    }
    LineSet out;
    if (start == end) {
        return out;
    }
    for (std::uint64_t l = cache_line(start, g); l <= cache_line(end - 1, g); ++l) {
        out.insert(static_cast<std::uint32_t>(l));
    }
    return out;
}

namespace {

void add_common(LineSet& s, const BranchEntry& e, CacheGeometry g) {
    if (e.extra_common) {
        const auto extra = lines_of_range(e.extra_common->first, e.extra_common->second, g);
        s.insert(extra.begin(), extra.end());
    }
}

}  // namespace

LineSet if_lines(const BranchEntry& e, CacheGeometry g) {
    auto s = lines_of_range(e.a, e.b, g);
    add_common(s, e, g);
    return s;
}

LineSet else_lines(const BranchEntry& e, CacheGeometry g) {
    auto s = lines_of_range(e.b, e.c, g);
    add_common(s, e, g);
    return s;
}

bool distinguishable(const BranchEntry& e, CacheGeometry g) { return if_lines(e, g) != else_lines(e, g); }

const BranchEntry* BranchTable::find(std::uint32_t cond_addr) const {
    const auto it = entries.find(cond_addr);
    return it == entries.end() ? nullptr : &it->second;
}

namespace {

std::optional<std::uint32_t> hex32(std::string_view s) {
    if (!s.starts_with("0x") || s.size() < 3 || s.size() > 10) {
        return std::nullopt;
    }
    std::uint32_t v = 0;
    const auto [p, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), v, 16);
    if (ec != std::errc() || p != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

std::string hex(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%x", v);
    return buf;
}

}  // namespace

BranchTable parse_branch_table(std::string_view text, const std::string& file) {
    BranchTable t;
    std::size_t pos = 0, lineno = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        std::istringstream line{std::string(text.substr(pos, nl - pos))};
        pos = nl + 1;
        ++lineno;
        std::vector<std::string> tok;
        for (std::string w; line >> w;) {
            tok.push_back(w);
        }
        if (tok.empty() || tok[0].front() == '#') {
            continue;
        }
        const auto err = [&](const std::string& msg) { throw ParseError(file, lineno, msg); };
        if (tok[0] != "BC" || (tok.size() != 5 && tok.size() != 8) || (tok.size() == 8 && tok[5] != "COMMON")) {
            err("expected 'BC 0x<cond> 0x<a> 0x<b> 0x<c> [COMMON 0x<s> 0x<e>]'");
        }
        std::uint32_t v[6] = {};
        for (std::size_t i = 1, k = 0; i < tok.size(); ++i) {
            if (i == 5) {
                continue;
            }
            const auto x = hex32(tok[i]);
            if (!x) {
                err("bad address '" + tok[i] + "'");
            }
            v[k++] = *x;
        }
        BranchEntry e{v[0], v[1], v[2], v[3], std::nullopt};
        if (e.a >= e.b) {
            err("branch entry needs a < b");
        }
        if (e.b > e.c) {
            err("branch entry needs b <= c");
        }
        if (tok.size() == 8) {
            if (v[4] > v[5]) {
                err("COMMON range needs start <= end");
            }
            e.extra_common = std::pair{v[4], v[5]};
        }
        if (!t.entries.emplace(e.cond_addr, e).second) {
            err("duplicate entry for " + hex(e.cond_addr));
        }
    }
    return t;
}

BranchTable load_branch_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_branch_table(ss.str(), path);
}

std::string serialize_branch_table(const BranchTable& t) {
    std::string out;
    for (const auto& [k, e] : t.entries) {
        out += "BC " + hex(e.cond_addr) + ' ' + hex(e.a) + ' ' + hex(e.b) + ' ' + hex(e.c);
        if (e.extra_common) {
            out += " COMMON " + hex(e.extra_common->first) + ' ' + hex(e.extra_common->second);
        }
        out += '\n';
    }
    return out;
}

}  // namespace cltype
