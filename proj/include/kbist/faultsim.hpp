#ifndef KBIST_FAULTSIM_HPP
#define KBIST_FAULTSIM_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbist/bitvec.hpp"
#include "kbist/netlist.hpp"

namespace kbist {

enum class StuckAt : std::uint8_t { Zero = 0, One = 1 };

// Single stuck-at fault site: a net (primary input or gate output), or one
// gate's view of one input pin (fanout branch).
struct Fault {
    std::uint32_t net = 0;   // net faults only
    std::int32_t gate = -1;  // pin faults: gate index
    std::int32_t pin = -1;   // pin faults: input position
    StuckAt polarity = StuckAt::Zero;

    bool is_pin() const { return gate >= 0; }

    static Fault at_net(std::uint32_t net, StuckAt sa) { return Fault{net, -1, -1, sa}; }
    static Fault at_pin(std::int32_t gate, std::int32_t pin, StuckAt sa) {
        return Fault{0, gate, pin, sa};
    }

    // "net@sa0" for net faults, "gateOutputNet.inN@sa1" for pin faults
    std::string id(const Netlist& nl) const;
};

std::optional<Fault> parse_fault_id(const Netlist& nl, std::string_view id);

// Both polarities at every primary input, every gate output, and every gate
// input pin. No collapsing. Order: primary inputs in declaration order, then
// gates in level order; per site sa0 before sa1; per gate the output net
// first, then pins in position order.
std::vector<Fault> enumerate_faults(const Netlist& nl);

// Concatenated primary-output vectors, pattern-major: bit i*po_count + j is
// output j (declaration order) under pattern i.
struct ResponseStream {
    BitVec bits;
    std::size_t pattern_count = 0;
    std::size_t po_count = 0;

    std::size_t bit_length() const { return bits.size(); }
    bool operator==(const ResponseStream&) const = default;
};

// Scalar single-pattern evaluation (also the reference oracle).
BitVec simulate(const Netlist& nl, const BitVec& pattern);

// 64-pattern bit-parallel evaluation; bit-identical to the scalar path.
ResponseStream simulate_batch(const Netlist& nl, std::span<const BitVec> patterns);
ResponseStream simulate_faulty(const Netlist& nl, const Fault& fault,
                               std::span<const BitVec> patterns);

// Pattern-at-a-time reference implementations, kept independent of the
// bit-parallel path so the equivalence property is meaningful.
ResponseStream simulate_batch_scalar(const Netlist& nl, std::span<const BitVec> patterns);
ResponseStream simulate_faulty_scalar(const Netlist& nl, const Fault& fault,
                                      std::span<const BitVec> patterns);

struct CoverageReport {
    std::size_t total_faults = 0;
    std::size_t detected_faults = 0;
    double coverage = 0.0;
    std::vector<std::string> undetected;  // fault ids, enumeration order
};

CoverageReport fault_coverage(const Netlist& nl, std::span<const BitVec> patterns);

// One pattern per line, a 0/1 string of width |inputs|.
std::vector<BitVec> load_pattern_file(const std::filesystem::path& path,
                                      std::size_t expected_width);

}  // namespace kbist

#endif
