#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <random>

#include "cltype/env.hpp"
#include "cltype/ir.hpp"
#include "cltype/rules.hpp"
#include "cltype/security.hpp"

using namespace cltype;
using ST = SecurityType;

namespace {

constexpr std::array<ST, 5> kLevels{ST::CST, ST::URA, ST::WRA, ST::SID, ST::SDD};

// Bits LSB-first from a list of (level, count) runs.
TypedBitvector runs(std::initializer_list<std::pair<ST, unsigned>> parts) {
    TypedBitvector v;
    for (const auto& [t, n] : parts) {
        for (unsigned i = 0; i < n; ++i) {
            v.push_back(RefinedBit::of(t));
        }
    }
    return v;
}

}  // namespace

TEST_CASE("join examples") {
    CHECK(join(ST::SID, ST::SDD) == ST::SDD);
    CHECK(join(ST::CST, ST::CST) == ST::CST);
    CHECK(join(ST::URA, ST::WRA) == ST::WRA);
}

TEST_CASE("join is a semilattice on the chain") {
    for (auto a : kLevels) {
        CHECK(join(a, a) == a);
        for (auto b : kLevels) {
            CHECK(join(a, b) == join(b, a));
            CHECK(join(a, b) == (a < b ? b : a));
            for (auto c : kLevels) {
                CHECK(join(a, join(b, c)) == join(join(a, b), c));
            }
        }
    }
}

TEST_CASE("type names round-trip") {
    for (auto t : kLevels) {
        CHECK(parse_security_type(to_string(t)) == t);
    }
    CHECK_FALSE(parse_security_type("SECRET").has_value());
}

TEST_CASE("vector_type examples") {
    CHECK(vector_type(runs({{ST::SID, 16}, {ST::URA, 16}})) == ST::URA);
    CHECK(vector_type(mk_uniform(ST::CST, 32)) == ST::CST);
    CHECK(vector_type(runs({{ST::CST, 31}, {ST::SDD, 1}})) == ST::SDD);
    CHECK(vector_type(runs({{ST::WRA, 4}, {ST::SID, 4}})) == ST::SID);
    CHECK(vector_type(runs({{ST::WRA, 4}, {ST::CST, 4}})) == ST::WRA);
    CHECK_THROWS_AS(vector_type(TypedBitvector{}), std::invalid_argument);
}

TEST_CASE("vector_type is monotone in every bit") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> lvl(0, 4);
    for (int iter = 0; iter < 5000; ++iter) {
        const unsigned w = 1 + rng() % 16;
        TypedBitvector v;
        for (unsigned i = 0; i < w; ++i) {
            v.push_back(RefinedBit::of(kLevels[lvl(rng)]));
        }
        const unsigned i = rng() % w;
        const int cur = static_cast<int>(v[i].sec);
        for (int up = cur; up < 5; ++up) {
            TypedBitvector raised = v;
            raised[i].sec = kLevels[up];
            // Raising a bit to URA may lower the structural type (URA outranks SID and WRA).
            if (kLevels[up] == ST::URA) {
                continue;
            }
            INFO("iter " << iter << " " << v.display() << " -> " << raised.display());
            CHECK(vector_type(raised) >= vector_type(v));
        }
    }
}

TEST_CASE("mk_constant examples and round-trip") {
    const auto seven = mk_constant(0x7, 32);
    for (unsigned i = 0; i < 32; ++i) {
        CHECK(seven[i].sec == ST::CST);
        CHECK(seven[i].value == (i < 3));
    }
    const auto hi = mk_constant(0xffff0000, 32);
    CHECK(hi.display() == "{1}¹⁶{0}¹⁶:CST");
    const auto one = mk_constant(0, 1);
    CHECK(one.width() == 1);
    CHECK(one[0].is_const(false));
    CHECK_THROWS_AS(mk_constant(0x100, 8), std::invalid_argument);

    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const unsigned w = 1 + rng() % 64;
        const std::uint64_t mask = w == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << w) - 1;
        const std::uint64_t x = rng() & mask;
        const auto v = mk_constant(x, w);
        REQUIRE(v.fully_known());
        CHECK(v.known_value() == x);
        CHECK(v.min_unsigned() == x);
        CHECK(v.max_unsigned() == x);
    }
}

TEST_CASE("interval bounds from value predicates") {
    TypedBitvector v = mk_constant(0, 8);
    v[0] = RefinedBit::of(ST::SDD);
    v[7] = RefinedBit::of(ST::SDD);
    CHECK(v.min_unsigned() == 0);
    CHECK(v.max_unsigned() == 0x81);
    CHECK(v.min_signed() == -128);
    CHECK(v.max_signed() == 1);
    CHECK_FALSE(v.known_value().has_value());
}

TEST_CASE("display is MSB-first run-length") {
    TypedBitvector v = mk_constant(0, 32);
    for (unsigned i = 0; i < 8; ++i) {
        v[i] = RefinedBit::of(ST::SDD);
    }
    CHECK(v.display() == "{0}²⁴{K}⁸:SDD");
    CHECK(mk_uniform(ST::URA, 1).display() == "{U}:URA");
}

TEST_CASE("concat/extract round-trip") {
    std::mt19937_64 rng(3);
    for (int iter = 0; iter < 2000; ++iter) {
        const unsigned wl = 1 + rng() % 31, wh = 1 + rng() % 32;
        TypedBitvector lo, hi;
        for (unsigned i = 0; i < wl; ++i) {
            RefinedBit b = RefinedBit::of(kLevels[rng() % 5]);
            if (rng() % 2) {
                b.value = (rng() % 2) != 0;
            }
            lo.push_back(b);
        }
        for (unsigned i = 0; i < wh; ++i) {
            hi.push_back(RefinedBit::of(kLevels[rng() % 5]));
        }
        const auto cat = infer_concat(hi, lo);
        REQUIRE(cat.width() == wl + wh);
        CHECK(infer_extract(0, wl - 1, cat) == lo);
        CHECK(infer_extract(wl, wl + wh - 1, cat) == hi);
    }
}

TEST_CASE("annotate examples") {
    TypeEnv env = annotate(TypeEnv{}, full(VarId::eax), ST::SDD);
    const auto eax = env.read(full(VarId::eax));
    CHECK(eax == mk_uniform(ST::SDD, 32));
    CHECK(env.read(*var_by_name("ax")) == mk_uniform(ST::SDD, 16));

    env = annotate(env, ByteRange{0x1000, 4}, ST::URA);
    for (std::uint32_t a = 0x1000; a < 0x1004; ++a) {
        CHECK(env.read_mem(a, 1) == mk_uniform(ST::URA, 8));
    }
    CHECK_FALSE(env.tracked(0x1004));
    CHECK(env.read_mem(0x1004, 1) == mk_uniform(ST::SID, 8));

    CHECK_THROWS_AS(annotate(env, full(VarId::ebx), ST::SID), std::invalid_argument);
    CHECK_THROWS_AS(annotate(env, full(VarId::ebx), ST::CST), std::invalid_argument);
}

TEST_CASE("annotate with a bit mask touches only the masked bits") {
    TypeEnv env;
    env.write_mem(0x5000, mk_constant(0, 8));
    env.annotate(ByteRange{0x5000, 1}, ST::SDD, 0x81);
    const auto b = env.read_mem(0x5000, 1);
    CHECK(b[0].sec == ST::SDD);
    CHECK(b[7].sec == ST::SDD);
    CHECK(b[3].is_const(false));
}

TEST_CASE("sub-register writes are views over the parent") {
    TypeEnv env;
    env.write(full(VarId::eax), mk_constant(0x11223344, 32));
    env.write(*var_by_name("al"), mk_uniform(ST::SDD, 8));
    const auto eax = env.read(full(VarId::eax));
    CHECK(infer_extract(0, 7, eax) == mk_uniform(ST::SDD, 8));
    CHECK(infer_extract(8, 31, eax) == mk_constant(0x112233, 24));

    env.write(*var_by_name("ah"), mk_constant(0xab, 8));
    CHECK(infer_extract(8, 15, env.read(full(VarId::eax))) == mk_constant(0xab, 8));
    CHECK(env.read(*var_by_name("al")) == mk_uniform(ST::SDD, 8));
    CHECK_THROWS_AS(env.write(*var_by_name("ax"), mk_constant(0, 8)), std::invalid_argument);
}

TEST_CASE("memory is little-endian and defaults to SID") {
    TypeEnv env;
    env.write_mem(0x2000, mk_constant(0xaabbccdd, 32));
    CHECK(env.read_mem(0x2000, 1) == mk_constant(0xdd, 8));
    CHECK(env.read_mem(0x2003, 1) == mk_constant(0xaa, 8));
    CHECK(env.read_mem(0x2002, 2) == mk_constant(0xaabb, 16));
    CHECK(vector_type(env.read_mem(0x3000, 4)) == ST::SID);
    CHECK_FALSE(env.read_mem(0x3000, 4)[0].known());
}

TEST_CASE("expression factories enforce widths") {
    CHECK(extract(24, 31, var(VarId::eax))->width == 8);
    CHECK(concat(constant(0, 24), extract(24, 31, var(VarId::eax)))->width == 32);
    CHECK_THROWS_AS(extract(8, 32, var(VarId::eax)), std::invalid_argument);
    CHECK_THROWS_AS(extract(9, 8, var(VarId::eax)), std::invalid_argument);
    CHECK_THROWS_AS(binop(BinOp::Add, var(VarId::eax), constant(1, 8)), std::invalid_argument);
    CHECK(binop(BinOp::Eq, var(VarId::eax), constant(0, 32))->width == 1);
    CHECK_THROWS_AS(cond(var(VarId::eax), constant(0, 8), constant(1, 8)), std::invalid_argument);
}

TEST_CASE("register names") {
    CHECK(var_by_name("ah") == VarRef{VarId::eax, 8, 8});
    CHECK(var_by_name("si") == VarRef{VarId::esi, 0, 16});
    CHECK(var_by_name("zf") == VarRef{VarId::zf, 0, 1});
    CHECK_FALSE(var_by_name("rax").has_value());
    CHECK(var_name(VarRef{VarId::ecx, 0, 8}) == "cl");
}
