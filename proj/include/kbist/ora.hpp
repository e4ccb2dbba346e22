#ifndef KBIST_ORA_HPP
#define KBIST_ORA_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kbist/bitvec.hpp"
#include "kbist/faultsim.hpp"
#include "kbist/kmac.hpp"
#include "kbist/netlist.hpp"

namespace kbist {

// Serial-input signature register: LFSR-based polynomial division, response
// bits shifted in one at a time, zero-initialized.
class Sisr {
public:
    Sisr(int width, std::span<const int> taps);
    explicit Sisr(int width);  // built-in primitive polynomial of that degree

    int width() const { return width_; }
    std::uint64_t value() const { return reg_; }
    void shift_bit(bool bit);

private:
    int width_;
    std::uint64_t poly_low_;  // characteristic polynomial minus the x^n term
    std::uint64_t mask_;
    std::uint64_t reg_ = 0;
};

std::uint64_t sisr_compact(Sisr sisr, const BitVec& response);

// Multiple-input signature register: per cycle the register shifts with
// feedback and the input slice is XORed in. Slices narrower than the
// register are zero-padded high; wider ones are XOR-folded into n columns.
std::uint64_t misr_compact(int width, std::span<const int> taps,
                           std::span<const BitVec> slices);
std::uint64_t misr_compact(int width, std::span<const BitVec> slices);

// L > n is required for a valid SISR/MISR signature; below that the
// register simply echoes response bits ("invalid signature" regime).
bool sr_signature_valid(int n, std::uint64_t response_bits);

// Aliasing probability of an n-bit signature register over an L-bit
// response: (2^(L-n) - 1) / (2^L - 1), held exactly.
class SrAliasing {
public:
    SrAliasing(int n, std::uint64_t L) : n_(n), L_(L) {}

    double value() const;
    std::string numerator() const;    // exact decimal
    std::string denominator() const;  // exact decimal
    bool equals_fraction(std::uint64_t num, std::uint64_t den) const;  // exact compare

private:
    int n_;
    std::uint64_t L_;
};

SrAliasing pa_sr(int n, std::uint64_t response_bits);       // throws if L <= n
double cr_sr(int n, std::uint64_t response_bits);           // 1 - n/L, throws if L <= n
double pa_kmac(int digest_bits);                            // 2^(-d/2)
double cr_kmac(int digest_bits, std::uint64_t response_bits);  // 1 - d/L, may be negative

// Packs the response MSB-first into octets (low bits of the final octet
// zero) and appends the bit length as an 8-octet big-endian trailer, so
// distinct-length responses with identical padded bytes cannot collide.
std::vector<std::uint8_t> pack_response(const BitVec& bits);

Signature sign_response(const DeviceKey& key, const ResponseStream& response,
                        std::size_t digest_bits);

struct AliasingReport {
    std::string circuit;
    std::size_t po_count = 0;
    std::size_t pattern_count = 0;
    std::uint64_t response_length_bits = 0;
    double compaction_rate = 0.0;  // cr_kmac(d, L)
    std::size_t faults_total = 0;
    std::size_t faults_detected = 0;
    std::vector<std::string> aliased_fault_ids;
    double aliasing_rate = 0.0;  // |aliased| / detected, 0 when none detected
};

// Full stuck-at sweep: a fault is detected when its response differs from
// golden, aliased when detected yet its signature equals the golden one.
AliasingReport aliasing_analysis(const Netlist& nl, std::span<const BitVec> patterns,
                                 const DeviceKey& key, std::size_t digest_bits);

}  // namespace kbist

#endif
