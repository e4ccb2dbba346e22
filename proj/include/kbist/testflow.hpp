#ifndef KBIST_TESTFLOW_HPP
#define KBIST_TESTFLOW_HPP

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kbist/dictionary.hpp"
#include "kbist/faultsim.hpp"
#include "kbist/kmac.hpp"
#include "kbist/netlist.hpp"
#include "kbist/tpg.hpp"

namespace kbist {

class FlowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LfsrConfig {
    int degree;
    std::vector<int> taps;

    LfsrConfig();  // 32nd-degree default polynomial
};

// The simulated SoC: its DUT netlists, the device key, and the locally held
// dictionaries (one per DUT). `injected` wraps a DUT with a stuck-at fault
// to emulate a defective device.
struct SocConfig {
    std::map<std::string, Netlist> duts;
    DeviceKey key;
    std::size_t digest_bits = 256;
    LfsrConfig lfsr;
    std::map<std::string, FaultDictionary> dictionaries;
    std::map<std::string, Fault> injected;

    explicit SocConfig(DeviceKey device_key) : key(std::move(device_key)) {}

    const Netlist& dut(const std::string& dut_id) const;  // throws FlowError
    void validate() const;  // dictionary keys must reference known DUTs
};

struct TestVerdict {
    std::string dut_id;
    std::uint32_t seed = 0;
    Diagnosis diagnosis;
    Signature signature;
    std::chrono::microseconds duration{0};
};

// Simulate the possibly fault-injected DUT over LFSR patterns and sign the
// response; the caller picks pattern_count and digest_bits.
Signature compute_dut_signature(const SocConfig& soc, const std::string& dut_id,
                                std::uint32_t seed, std::size_t pattern_count,
                                std::size_t digest_bits);

// Key init, pattern generation from seed, DUT simulation, signing, local
// dictionary lookup. (dut_id, seed) must be present in the local dictionary.
TestVerdict run_onchip_test(const SocConfig& soc, const std::string& dut_id, std::uint32_t seed);

enum class Availability { Idle, Busy };

struct ScheduleOutcome {
    std::vector<TestVerdict> executed;  // queue order
    std::vector<std::pair<std::string, std::uint32_t>> skipped;
};

// Runs queued tests for idle DUTs only, preserving per-DUT queue order;
// DUTs absent from the availability map count as idle. Distinct DUTs run
// concurrently.
ScheduleOutcome schedule_tests(const SocConfig& soc,
                               const std::map<std::string, Availability>& availability,
                               const std::vector<std::pair<std::string, std::uint32_t>>& queue);

// JSON descriptor: {"duts": {id: bench-path}, "key_file": path,
// "digest_bits": n, "lfsr": {"degree": n, "taps": [...]},
// "dictionaries": {id: dict-path}, "inject": {id: fault-id}}.
// Relative paths resolve against the config file's directory.
SocConfig load_soc_config(const std::filesystem::path& path,
                          const std::optional<std::filesystem::path>& key_file_override = {});

}  // namespace kbist

#endif
