#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "kbist/tpg.hpp"

using namespace kbist;

TEST_CASE("degree-4 maximal LFSR has period 15") {
    // x^4 + x^3 + 1; hand-traced from seed 0b0001
    int taps[] = {4, 3};
    Lfsr lfsr(4, taps, 0b0001);
    std::set<std::uint64_t> states;
    states.insert(lfsr.state());
    for (int i = 0; i < 14; ++i) {
        lfsr.step();
        CHECK(lfsr.state() != 0);
        states.insert(lfsr.state());
    }
    CHECK(states.size() == 15);  // all nonzero 4-bit states
    lfsr.step();
    CHECK(lfsr.state() == 0b0001);  // back to the seed
}

TEST_CASE("step emits the pre-shift low bit") {
    // taps {4,3} watch state bits 0 and 1; hand-traced from seed 0001:
    // 0001 -> 1000 -> 0100 -> 0010 -> 1001 -> 1100
    int taps[] = {4, 3};
    Lfsr lfsr(4, taps, 0b0001);
    CHECK(lfsr.step() == true);
    CHECK(lfsr.state() == 0b1000);
    CHECK(lfsr.step() == false);
    CHECK(lfsr.state() == 0b0100);
    CHECK(lfsr.step() == false);
    CHECK(lfsr.state() == 0b0010);
    CHECK(lfsr.step() == false);
    CHECK(lfsr.state() == 0b1001);
    CHECK(lfsr.step() == true);
    CHECK(lfsr.state() == 0b1100);
}

TEST_CASE("bits and patterns consume the same stream") {
    Lfsr a = Lfsr::with_default_polynomial(0xDEADBEEF);
    Lfsr b = Lfsr::with_default_polynomial(0xDEADBEEF);
    BitVec stream = a.bits(5 * 7);
    std::vector<BitVec> pats = b.patterns(5, 7);
    REQUIRE(pats.size() == 7);
    for (std::size_t p = 0; p < 7; ++p) {
        REQUIRE(pats[p].size() == 5);
        for (std::size_t i = 0; i < 5; ++i) CHECK(pats[p].get(i) == stream.get(p * 5 + i));
    }
}

TEST_CASE("pattern generation is deterministic in the seed") {
    auto gen = [](std::uint64_t seed) {
        return Lfsr::with_default_polynomial(seed).patterns(36, 10);
    };
    CHECK(gen(42) == gen(42));
    CHECK(gen(42) != gen(43));
}

TEST_CASE("constructor validation") {
    int taps[] = {4, 3};
    CHECK_THROWS_AS(Lfsr(1, taps, 1), std::invalid_argument);   // degree too small
    CHECK_THROWS_AS(Lfsr(65, taps, 1), std::invalid_argument);  // degree too large
    CHECK_THROWS_AS(Lfsr(4, taps, 0), std::invalid_argument);   // zero seed
    CHECK_THROWS_AS(Lfsr(4, taps, 16), std::invalid_argument);  // seed wider than register
    CHECK_THROWS_AS(Lfsr(4, {}, 1), std::invalid_argument);     // no taps
    int bad[] = {5};
    CHECK_THROWS_AS(Lfsr(4, bad, 1), std::invalid_argument);    // tap beyond degree
}

TEST_CASE("default polynomial is degree 32 with taps 32,22,2,1") {
    CHECK(Lfsr::kDefaultDegree == 32);
    auto taps = Lfsr::default_taps();
    REQUIRE(taps.size() == 4);
    CHECK(taps[0] == 32);
    CHECK(taps[1] == 22);
    CHECK(taps[2] == 2);
    CHECK(taps[3] == 1);
    Lfsr lfsr = Lfsr::with_default_polynomial(1);
    CHECK(lfsr.degree() == 32);
}

TEST_CASE("built-in primitive polynomials reach full period") {
    // feasible to verify exhaustively through degree 16
    for (int degree = 2; degree <= 16; ++degree) {
        Lfsr lfsr(degree, primitive_taps(degree), 1);
        std::uint64_t period = 0;
        do {
            lfsr.step();
            ++period;
        } while (lfsr.state() != 1);
        CHECK(period == (std::uint64_t{1} << degree) - 1);
    }
}

TEST_CASE("primitive taps table bounds") {
    for (int degree = 1; degree <= 32; ++degree) {
        auto taps = primitive_taps(degree);
        CHECK(!taps.empty());
        CHECK(taps[0] == degree);  // leading exponent states the degree
    }
    CHECK_THROWS_AS(primitive_taps(0), std::invalid_argument);
    CHECK_THROWS_AS(primitive_taps(33), std::invalid_argument);
}

TEST_CASE("default polynomial state sequence never repeats early") {
    Lfsr lfsr = Lfsr::with_default_polynomial(0x1);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 100000; ++i) {
        CHECK(seen.insert(lfsr.state()).second);
        lfsr.step();
    }
}

TEST_CASE("long-run bit balance of the default polynomial") {
    Lfsr lfsr = Lfsr::with_default_polynomial(0xACE1);
    BitVec bits = lfsr.bits(1 << 16);
    std::size_t ones = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) ones += bits.get(i);
    double ratio = double(ones) / double(bits.size());
    CHECK(ratio > 0.47);
    CHECK(ratio < 0.53);
}
