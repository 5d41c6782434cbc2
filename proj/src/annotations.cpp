#include "cltype/annotations.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cltype/errors.hpp"

namespace cltype {

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) {
            ++i;
        }
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') {
            ++j;
        }
        if (j > i) {
            out.push_back(s.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

template <typename T>
bool parse_int(std::string_view s, T& out, int base) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
    return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

// Mask of storage bits [0, 64) a register entry covers.
std::uint64_t reg_bits(const VarRef& r, std::uint64_t mask) {
    const std::uint64_t view = r.width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << r.width) - 1;
    return (mask & view) << r.lo;
}

std::uint8_t byte_mask(const Annotation& a, std::uint32_t i) {
    return i < 8 ? static_cast<std::uint8_t>(a.bit_mask >> (8 * i)) : 0xff;
}

bool overlaps(const Annotation& a, const Annotation& b) {
    if (a.seq != b.seq || a.target.index() != b.target.index()) {
        return false;
    }
    if (const auto* ra = std::get_if<VarRef>(&a.target)) {
        const auto& rb = std::get<VarRef>(b.target);
        return ra->id == rb.id && (reg_bits(*ra, a.bit_mask) & reg_bits(rb, b.bit_mask)) != 0;
    }
    const auto& ma = std::get<ByteRange>(a.target);
    const auto& mb = std::get<ByteRange>(b.target);
    const std::uint64_t lo = std::max<std::uint64_t>(ma.start, mb.start);
    const std::uint64_t hi = std::min<std::uint64_t>(std::uint64_t{ma.start} + ma.length,
                                                     std::uint64_t{mb.start} + mb.length);
    for (std::uint64_t x = lo; x < hi; ++x) {
        const auto ia = static_cast<std::uint32_t>(x - ma.start);
        const auto ib = static_cast<std::uint32_t>(x - mb.start);
        if ((byte_mask(a, ia) & byte_mask(b, ib)) != 0) {
            return true;
        }
    }
    return false;
}

std::string describe(const Annotation& a) {
    std::ostringstream os;
    os << (a.kind == AnnotKind::Secret ? "SECRET " : "RANDOM ");
    if (const auto* r = std::get_if<VarRef>(&a.target)) {
        os << "reg " << var_name(*r);
    } else {
        const auto& m = std::get<ByteRange>(a.target);
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", m.start);
        os << "mem " << buf << ' ' << m.length;
    }
    os << " @" << a.seq;
    return os.str();
}

}  // namespace

SecurityType level_of(AnnotKind k) noexcept { return k == AnnotKind::Secret ? SecurityType::SDD : SecurityType::URA; }

std::vector<const Annotation*> AnnotationSet::at(std::uint64_t seq) const {
    std::vector<const Annotation*> out;
    for (const auto& e : entries) {
        if (e.seq == seq) {
            out.push_back(&e);
        }
    }
    return out;
}

void AnnotationSet::validate(std::uint64_t trace_length) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].seq >= trace_length && !(trace_length == 0 && entries[i].seq == 0)) {
            throw std::invalid_argument("annotation '" + describe(entries[i]) + "' refers to a missing record");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (overlaps(entries[i], entries[j])) {
                throw std::invalid_argument("overlapping annotations: '" + describe(entries[j]) + "' and '" +
                                            describe(entries[i]) + "'");
            }
        }
    }
}

AnnotationSet parse_annotations(std::string_view text, const std::string& file) {
    AnnotationSet set;
    std::size_t pos = 0;
    std::size_t lineno = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        const auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++lineno;
        const auto tok = split_ws(line);
        if (tok.empty() || tok[0].front() == '#') {
            continue;
        }
        const auto err = [&](const std::string& msg) { throw ParseError(file, lineno, msg); };
        Annotation a;
        if (tok[0] == "SECRET") {
            a.kind = AnnotKind::Secret;
        } else if (tok[0] == "RANDOM") {
            a.kind = AnnotKind::Random;
        } else {
            err("expected SECRET or RANDOM, got '" + std::string(tok[0]) + "'");
        }
        std::string_view at;
        if (tok.size() == 4 && tok[1] == "reg") {
            const auto r = var_by_name(tok[2]);
            if (!r || !is_gpr(r->id)) {
                err("unknown register '" + std::string(tok[2]) + "'");
            }
            a.target = *r;
            at = tok[3];
        } else if (tok.size() == 5 && tok[1] == "mem") {
            std::uint32_t start = 0, len = 0;
            const auto addr = tok[2];
            if (!addr.starts_with("0x") || addr.size() > 10 || !parse_int(addr.substr(2), start, 16)) {
                err("bad address '" + std::string(addr) + "'");
            }
            if (!parse_int(tok[3], len, 10) || len == 0 || std::uint64_t{start} + len > 0x100000000ULL) {
                err("bad length '" + std::string(tok[3]) + "'");
            }
            a.target = ByteRange{start, len};
            at = tok[4];
        } else {
            err("expected 'reg <name> @<seq>' or 'mem 0x<addr> <len> @<seq>'");
        }
        if (!at.starts_with("@") || !parse_int(at.substr(1), a.seq, 10)) {
            err("bad sequence '" + std::string(at) + "'");
        }
        for (const auto& prev : set.entries) {
            if (overlaps(prev, a)) {
                err("annotation overlaps '" + describe(prev) + "'");
            }
        }
        set.entries.push_back(a);
    }
    return set;
}

AnnotationSet load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_annotations(ss.str(), path);
}

std::string serialize_annotations(const AnnotationSet& set) {
    std::string out;
    for (const auto& e : set.entries) {
        out += describe(e);
        out += '\n';
    }
    return out;
}

TypeEnv build_initial_env(const AnnotationSet& set) {
    TypeEnv env;
    apply_annotations(env, set, 0);
    return env;
}

void apply_annotations(TypeEnv& env, const AnnotationSet& set, std::uint64_t seq) {
    const auto here = set.at(seq);
    for (std::size_t i = 0; i < here.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (overlaps(*here[i], *here[j])) {
                throw std::invalid_argument("overlapping annotations: '" + describe(*here[j]) + "' and '" +
                                            describe(*here[i]) + "'");
            }
        }
    }
    for (const auto* e : here) {
        env.annotate(e->target, level_of(e->kind), e->bit_mask);
    }
}

}  // namespace cltype
