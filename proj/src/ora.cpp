#include "kbist/ora.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <stdexcept>

#include "kbist/tpg.hpp"
#include "parallel.hpp"

namespace kbist {

namespace {

using boost::multiprecision::cpp_int;

std::uint64_t width_mask(int width) {
    return width == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

// Low-order coefficients of the characteristic polynomial: bit t for each
// tap exponent t < width, plus the constant term. The x^width term is
// implicit in the feedback.
std::uint64_t poly_low_bits(int width, std::span<const int> taps) {
    if (width < 1 || width > 64) throw std::invalid_argument("signature register width must be 1..64");
    std::uint64_t poly = 1;
    for (int t : taps) {
        if (t < 1 || t > width) throw std::invalid_argument("polynomial tap out of range");
        if (t < width) poly |= std::uint64_t{1} << t;
    }
    return poly;
}

}  // namespace

Sisr::Sisr(int width, std::span<const int> taps)
    : width_(width), poly_low_(poly_low_bits(width, taps)), mask_(width_mask(width)) {}

Sisr::Sisr(int width) : Sisr(width, primitive_taps(width)) {}

void Sisr::shift_bit(bool bit) {
    std::uint64_t fb = (reg_ >> (width_ - 1)) & 1;
    reg_ = ((reg_ << 1) | (bit ? 1 : 0)) & mask_;
    if (fb) reg_ ^= poly_low_;
}

std::uint64_t sisr_compact(Sisr sisr, const BitVec& response) {
    for (std::size_t i = 0; i < response.size(); ++i) sisr.shift_bit(response.get(i));
    return sisr.value();
}

std::uint64_t misr_compact(int width, std::span<const int> taps,
                           std::span<const BitVec> slices) {
    std::uint64_t poly = poly_low_bits(width, taps);
    std::uint64_t mask = width_mask(width);
    std::uint64_t reg = 0;
    for (const BitVec& slice : slices) {
        std::uint64_t fb = (reg >> (width - 1)) & 1;
        reg = (reg << 1) & mask;
        if (fb) reg ^= poly;
        std::uint64_t in = 0;
        for (std::size_t j = 0; j < slice.size(); ++j)
            if (slice.get(j)) in ^= std::uint64_t{1} << (j % width);
        reg ^= in;
    }
    return reg;
}

std::uint64_t misr_compact(int width, std::span<const BitVec> slices) {
    return misr_compact(width, primitive_taps(width), slices);
}

bool sr_signature_valid(int n, std::uint64_t response_bits) {
    return response_bits > static_cast<std::uint64_t>(n);
}

double SrAliasing::value() const {
    cpp_int num = (cpp_int(1) << (L_ - n_)) - 1;
    cpp_int den = (cpp_int(1) << L_) - 1;
    // Fixed-point division keeps the quotient in double range even when
    // num and den themselves are astronomically large.
    cpp_int scaled = (num << 128) / den;
    return std::ldexp(scaled.convert_to<double>(), -128);
}

std::string SrAliasing::numerator() const {
    return ((cpp_int(1) << (L_ - n_)) - 1).str();
}

std::string SrAliasing::denominator() const {
    return ((cpp_int(1) << L_) - 1).str();
}

bool SrAliasing::equals_fraction(std::uint64_t num, std::uint64_t den) const {
    cpp_int my_num = (cpp_int(1) << (L_ - n_)) - 1;
    cpp_int my_den = (cpp_int(1) << L_) - 1;
    return my_num * den == my_den * num;
}

SrAliasing pa_sr(int n, std::uint64_t response_bits) {
    if (n < 1) throw std::invalid_argument("register width must be positive");
    if (response_bits <= static_cast<std::uint64_t>(n))
        throw std::invalid_argument("pa_sr requires L > n (invalid signature regime otherwise)");
    return SrAliasing(n, response_bits);
}

double cr_sr(int n, std::uint64_t response_bits) {
    if (n < 1) throw std::invalid_argument("register width must be positive");
    if (response_bits <= static_cast<std::uint64_t>(n))
        throw std::invalid_argument("cr_sr requires L > n");
    return 1.0 - static_cast<double>(n) / static_cast<double>(response_bits);
}

double pa_kmac(int digest_bits) {
    if (digest_bits < 1) throw std::invalid_argument("digest bits must be positive");
    return std::exp2(-static_cast<double>(digest_bits) / 2.0);
}

double cr_kmac(int digest_bits, std::uint64_t response_bits) {
    if (digest_bits < 1) throw std::invalid_argument("digest bits must be positive");
    if (response_bits == 0) throw std::invalid_argument("cr_kmac requires L >= 1");
    return 1.0 - static_cast<double>(digest_bits) / static_cast<double>(response_bits);
}

std::vector<std::uint8_t> pack_response(const BitVec& bits) {
    std::vector<std::uint8_t> out = bits.to_bytes_msb_first();
    std::uint64_t len = bits.size();
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    return out;
}

Signature sign_response(const DeviceKey& key, const ResponseStream& response,
                        std::size_t digest_bits) {
    return kmac128(key, pack_response(response.bits), digest_bits);
}

AliasingReport aliasing_analysis(const Netlist& nl, std::span<const BitVec> patterns,
                                 const DeviceKey& key, std::size_t digest_bits) {
    if (patterns.empty()) throw std::invalid_argument("aliasing analysis needs at least one pattern");

    ResponseStream golden = simulate_batch(nl, patterns);
    Signature golden_sig = sign_response(key, golden, digest_bits);
    std::vector<Fault> faults = enumerate_faults(nl);

    AliasingReport rep;
    rep.circuit = nl.name;
    rep.po_count = nl.outputs.size();
    rep.pattern_count = patterns.size();
    rep.response_length_bits = golden.bits.size();
    rep.compaction_rate = cr_kmac(static_cast<int>(digest_bits), rep.response_length_bits);
    rep.faults_total = faults.size();

    std::vector<std::uint8_t> detected(faults.size(), 0);
    std::vector<std::uint8_t> aliased(faults.size(), 0);
    detail::parallel_for(faults.size(), [&](std::size_t i) {
        ResponseStream faulty = simulate_faulty(nl, faults[i], patterns);
        if (faulty.bits == golden.bits) return;
        detected[i] = 1;
        if (sign_response(key, faulty, digest_bits) == golden_sig) aliased[i] = 1;
    });

    for (std::size_t i = 0; i < faults.size(); ++i) {
        if (detected[i]) ++rep.faults_detected;
        if (aliased[i]) rep.aliased_fault_ids.push_back(faults[i].id(nl));
    }
    rep.aliasing_rate = rep.faults_detected == 0
                            ? 0.0
                            : static_cast<double>(rep.aliased_fault_ids.size()) /
                                  static_cast<double>(rep.faults_detected);
    return rep;
}

}  // namespace kbist
