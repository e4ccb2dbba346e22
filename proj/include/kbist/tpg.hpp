#ifndef KBIST_TPG_HPP
#define KBIST_TPG_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "kbist/bitvec.hpp"

namespace kbist {

// Fibonacci LFSR. Taps are characteristic-polynomial exponents; position
// `degree` (the monic term) is implied and may be omitted. Each step emits
// the pre-shift low bit and feeds the XOR of the tapped bits into the top.
class Lfsr {
public:
    static constexpr int kDefaultDegree = 32;
    static std::span<const int> default_taps();  // {32, 22, 2, 1}

    Lfsr(int degree, std::span<const int> taps, std::uint64_t seed);
    static Lfsr with_default_polynomial(std::uint64_t seed);

    int degree() const { return degree_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t state() const { return state_; }

    bool step();
    BitVec bits(std::size_t count);

    // Each pattern consumes input_count consecutive output bits, filling
    // primary inputs in declaration order.
    std::vector<BitVec> patterns(std::size_t input_count, std::size_t pattern_count);

private:
    int degree_;
    std::uint64_t feedback_mask_;  // bit (degree - t) set for every tap t
    std::uint64_t state_;
    std::uint64_t seed_;
};

// Primitive (maximal-length) characteristic polynomial taps, degrees 1..32.
std::span<const int> primitive_taps(int degree);

}  // namespace kbist

#endif
