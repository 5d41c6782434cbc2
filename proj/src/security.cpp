#include "cltype/security.hpp"

namespace cltype {

std::string_view to_string(SecurityType t) noexcept {
    switch (t) {
    case SecurityType::CST: return "CST";
    case SecurityType::URA: return "URA";
    case SecurityType::WRA: return "WRA";
    case SecurityType::SID: return "SID";
    case SecurityType::SDD: return "SDD";
    }
    return "?";
}

std::optional<SecurityType> parse_security_type(std::string_view s) noexcept {
    for (auto t : {SecurityType::CST, SecurityType::URA, SecurityType::WRA, SecurityType::SID, SecurityType::SDD}) {
        if (to_string(t) == s) {
            return t;
        }
    }
    return std::nullopt;
}

char letter(SecurityType t) noexcept {
    switch (t) {
    case SecurityType::CST: return 'C';
    case SecurityType::URA: return 'U';
    case SecurityType::WRA: return 'W';
    case SecurityType::SID: return 'I';
    case SecurityType::SDD: return 'K';
    }
    return '?';
}

TypedBitvector::TypedBitvector(unsigned width, RefinedBit bit) {
    if (width > kMaxWidth) {
        throw std::invalid_argument("bitvector width exceeds 64");
    }
    width_ = static_cast<std::uint8_t>(width);
    for (unsigned i = 0; i < width; ++i) {
        bits_[i] = bit;
    }
}

const RefinedBit& TypedBitvector::at(unsigned i) const {
    if (i >= width_) {
        throw std::out_of_range("bit index out of range");
    }
    return bits_[i];
}

void TypedBitvector::push_back(RefinedBit b) {
    if (width_ == kMaxWidth) {
        throw std::invalid_argument("bitvector width exceeds 64");
    }
    bits_[width_++] = b;
}

bool TypedBitvector::fully_known() const noexcept {
    for (unsigned i = 0; i < width_; ++i) {
        if (!bits_[i].known()) {
            return false;
        }
    }
    return true;
}

std::optional<std::uint64_t> TypedBitvector::known_value() const noexcept {
    if (!fully_known()) {
        return std::nullopt;
    }
    return min_unsigned();
}

std::uint64_t TypedBitvector::min_unsigned() const noexcept {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width_; ++i) {
        if (bits_[i].value.value_or(false)) {
            v |= std::uint64_t{1} << i;
        }
    }
    return v;
}

std::uint64_t TypedBitvector::max_unsigned() const noexcept {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width_; ++i) {
        if (bits_[i].value.value_or(true)) {
            v |= std::uint64_t{1} << i;
        }
    }
    return v;
}

namespace {

// Two's-complement value of the low `width` bits of `raw`.
std::int64_t sign_extend(std::uint64_t raw, unsigned width) noexcept {
    if (width == 64) {
        return static_cast<std::int64_t>(raw);
    }
    const std::uint64_t sign = std::uint64_t{1} << (width - 1);
    return static_cast<std::int64_t>((raw ^ sign)) - static_cast<std::int64_t>(sign);
}

}  // namespace

std::int64_t TypedBitvector::min_signed() const noexcept {
    if (width_ == 0) {
        return 0;
    }
    // Sign bit set when possible, every other unknown bit cleared.
    std::uint64_t v = min_unsigned();
    const auto& msb = bits_[width_ - 1];
    if (msb.value.value_or(true)) {
        v |= std::uint64_t{1} << (width_ - 1);
    }
    return sign_extend(v, width_);
}

std::int64_t TypedBitvector::max_signed() const noexcept {
    if (width_ == 0) {
        return 0;
    }
    std::uint64_t v = max_unsigned();
    const auto& msb = bits_[width_ - 1];
    if (!msb.value.value_or(false)) {
        v &= ~(std::uint64_t{1} << (width_ - 1));
    }
    return sign_extend(v, width_);
}

namespace {

void append_superscript(std::string& out, unsigned n) {
    static constexpr const char* kDigits[] = {"⁰", "¹", "²", "³", "⁴", "⁵", "⁶", "⁷", "⁸", "⁹"};
    const std::string dec = std::to_string(n);
    for (char c : dec) {
        out += kDigits[c - '0'];
    }
}

char bit_symbol(const RefinedBit& b) {
    if (b.value) {
        return *b.value ? '1' : '0';
    }
    return letter(b.sec);
}

}  // namespace

std::string TypedBitvector::display() const {
    std::string out;
    unsigned i = width_;
    while (i > 0) {
        const char sym = bit_symbol(bits_[i - 1]);
        unsigned run = 0;
        while (i > 0 && bit_symbol(bits_[i - 1]) == sym) {
            --i;
            ++run;
        }
        out += '{';
        out += sym;
        out += '}';
        if (run > 1) {
            append_superscript(out, run);
        }
    }
    out += ':';
    out += to_string(width_ == 0 ? SecurityType::CST : vector_type(*this));
    return out;
}

bool operator==(const TypedBitvector& a, const TypedBitvector& b) noexcept {
    if (a.width_ != b.width_) {
        return false;
    }
    for (unsigned i = 0; i < a.width_; ++i) {
        if (!(a.bits_[i] == b.bits_[i])) {
            return false;
        }
    }
    return true;
}

SecurityType vector_type(const TypedBitvector& v) {
    if (v.empty()) {
        throw std::invalid_argument("vector_type of an empty bitvector");
    }
    bool ura = false, sid = false, wra = false;
    for (const auto& b : v) {
        switch (b.sec) {
        case SecurityType::SDD: return SecurityType::SDD;
        case SecurityType::URA: ura = true; break;
        case SecurityType::SID: sid = true; break;
        case SecurityType::WRA: wra = true; break;
        case SecurityType::CST: break;
        }
    }
    if (ura) {
        return SecurityType::URA;
    }
    if (sid) {
        return SecurityType::SID;
    }
    if (wra) {
        return SecurityType::WRA;
    }
    return SecurityType::CST;
}

TypedBitvector mk_constant(std::uint64_t value, unsigned width) {
    if (width == 0 || width > TypedBitvector::kMaxWidth) {
        throw std::invalid_argument("mk_constant: width must be in [1, 64]");
    }
    if (width < 64 && (value >> width) != 0) {
        throw std::invalid_argument("mk_constant: value does not fit in width");
    }
    TypedBitvector v;
    for (unsigned i = 0; i < width; ++i) {
        v.push_back(RefinedBit::constant(((value >> i) & 1U) != 0));
    }
    return v;
}

TypedBitvector mk_uniform(SecurityType t, unsigned width) { return TypedBitvector(width, RefinedBit::of(t)); }

}  // namespace cltype
