#include "cltype/env.hpp"

#include <stdexcept>

namespace cltype {

TypeEnv::TypeEnv() {
    for (unsigned i = 0; i < kNumVars; ++i) {
        vars_[i] = mk_uniform(SecurityType::SID, storage_width(static_cast<VarId>(i)));
    }
}

TypedBitvector TypeEnv::read(VarRef v) const {
    const auto& whole = vars_[static_cast<unsigned>(v.id)];
    if (v.lo == 0 && v.width == whole.width()) {
        return whole;
    }
    TypedBitvector out;
    for (unsigned i = 0; i < v.width; ++i) {
        out.push_back(whole[v.lo + i]);
    }
    return out;
}

void TypeEnv::write(VarRef v, const TypedBitvector& value) {
    if (value.width() != v.width) {
        throw std::invalid_argument("write: width mismatch for " + var_name(v));
    }
    auto& whole = vars_[static_cast<unsigned>(v.id)];
    for (unsigned i = 0; i < v.width; ++i) {
        whole[v.lo + i] = value[i];
    }
}

TypedBitvector TypeEnv::read_mem(std::uint32_t addr, unsigned bytes) const {
    TypedBitvector out;
    for (unsigned b = 0; b < bytes; ++b) {
        const auto it = mem_.find(addr + b);
        for (unsigned j = 0; j < 8; ++j) {
            out.push_back(it == mem_.end() ? RefinedBit::of(SecurityType::SID) : it->second[j]);
        }
    }
    return out;
}

void TypeEnv::write_mem(std::uint32_t addr, const TypedBitvector& value) {
    if (value.width() % 8 != 0) {
        throw std::invalid_argument("write_mem: width is not a whole number of bytes");
    }
    for (unsigned b = 0; b < value.width() / 8; ++b) {
        auto& byte = mem_[addr + b];
        for (unsigned j = 0; j < 8; ++j) {
            byte[j] = value[8 * b + j];
        }
    }
}

void TypeEnv::annotate(const AnnotationTarget& target, SecurityType level, std::uint64_t bit_mask) {
    if (level != SecurityType::SDD && level != SecurityType::URA) {
        throw std::invalid_argument("annotate: only SDD and URA may be annotated");
    }
    const auto masked = [bit_mask](unsigned i) { return i >= 64 || ((bit_mask >> i) & 1U) != 0; };
    if (const auto* reg = std::get_if<VarRef>(&target)) {
        auto v = read(*reg);
        for (unsigned i = 0; i < v.width(); ++i) {
            if (masked(i)) {
                v[i] = RefinedBit::of(level);
            }
        }
        write(*reg, v);
        return;
    }
    const auto& range = std::get<ByteRange>(target);
    if (range.length > 8 && bit_mask != ~std::uint64_t{0}) {
        throw std::invalid_argument("annotate: partial masks need ranges of at most 8 bytes");
    }
    for (std::uint32_t b = 0; b < range.length; ++b) {
        auto v = read_mem(range.start + b, 1);
        for (unsigned j = 0; j < 8; ++j) {
            if (masked(8 * b + j)) {
                v[j] = RefinedBit::of(level);
            }
        }
        write_mem(range.start + b, v);
    }
}

TypeEnv annotate(TypeEnv env, const AnnotationTarget& target, SecurityType level, std::uint64_t bit_mask) {
    env.annotate(target, level, bit_mask);
    return env;
}

}  // namespace cltype
