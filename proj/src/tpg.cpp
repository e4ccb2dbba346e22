#include "kbist/tpg.hpp"

#include <bit>
#include <stdexcept>

namespace kbist {

namespace {

// One maximal-length polynomial per degree (XAPP052-style table).
const std::vector<std::vector<int>> kPrimitive = {
    {},               // degree 0: unused
    {1},              // x + 1
    {2, 1},
    {3, 2},
    {4, 3},
    {5, 3},
    {6, 5},
    {7, 6},
    {8, 6, 5, 4},
    {9, 5},
    {10, 7},
    {11, 9},
    {12, 6, 4, 1},
    {13, 4, 3, 1},
    {14, 5, 3, 1},
    {15, 14},
    {16, 15, 13, 4},
    {17, 14},
    {18, 11},
    {19, 6, 2, 1},
    {20, 17},
    {21, 19},
    {22, 21},
    {23, 18},
    {24, 23, 22, 17},
    {25, 22},
    {26, 6, 2, 1},
    {27, 5, 2, 1},
    {28, 25},
    {29, 27},
    {30, 6, 4, 1},
    {31, 28},
    {32, 22, 2, 1},
};

constexpr int kDefaultTaps[] = {32, 22, 2, 1};

}  // namespace

std::span<const int> Lfsr::default_taps() { return kDefaultTaps; }

std::span<const int> primitive_taps(int degree) {
    if (degree < 1 || degree > 32)
        throw std::invalid_argument("no built-in primitive polynomial for degree " +
                                    std::to_string(degree));
    return kPrimitive[static_cast<std::size_t>(degree)];
}

Lfsr::Lfsr(int degree, std::span<const int> taps, std::uint64_t seed)
    : degree_(degree), feedback_mask_(0), state_(seed), seed_(seed) {
    if (degree < 2 || degree > 64) throw std::invalid_argument("LFSR degree must be in [2, 64]");
    if (taps.empty()) throw std::invalid_argument("LFSR tap set must not be empty");
    if (seed == 0) throw std::invalid_argument("LFSR seed must be nonzero");
    if (degree < 64 && seed >= (std::uint64_t{1} << degree))
        throw std::invalid_argument("LFSR seed exceeds register width");
    for (int t : taps) {
        if (t < 1 || t > degree)
            throw std::invalid_argument("LFSR tap out of range: " + std::to_string(t));
        feedback_mask_ |= std::uint64_t{1} << (degree - t);
    }
    feedback_mask_ |= 1;  // monic term
}

Lfsr Lfsr::with_default_polynomial(std::uint64_t seed) {
    return Lfsr(kDefaultDegree, default_taps(), seed);
}

bool Lfsr::step() {
    const bool out = state_ & 1;
    const std::uint64_t fb = std::popcount(state_ & feedback_mask_) & 1u;
    state_ = (state_ >> 1) | (fb << (degree_ - 1));
    return out;
}

BitVec Lfsr::bits(std::size_t count) {
    BitVec out(count);
    for (std::size_t i = 0; i < count; ++i) out.set(i, step());
    return out;
}

std::vector<BitVec> Lfsr::patterns(std::size_t input_count, std::size_t pattern_count) {
    if (input_count < 1) throw std::invalid_argument("pattern width must be at least 1");
    std::vector<BitVec> out;
    out.reserve(pattern_count);
    for (std::size_t p = 0; p < pattern_count; ++p) out.push_back(bits(input_count));
    return out;
}

}  // namespace kbist
