#ifndef KBIST_DICTIONARY_HPP
#define KBIST_DICTIONARY_HPP

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbist/bitvec.hpp"
#include "kbist/kmac.hpp"
#include "kbist/netlist.hpp"

namespace kbist {

class DictionaryError : public std::runtime_error {
public:
    enum class Kind { Io, Malformed, Checksum, Version, Collision, BadKey, BadArg };

    DictionaryError(Kind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// One test session configuration: which DUT, which LFSR seed, how many
// patterns, and the digest width.
struct DictionaryKey {
    std::string dut_id;
    std::uint32_t seed = 0;
    std::size_t pattern_count = 0;
    std::size_t digest_bits = 0;

    auto operator<=>(const DictionaryKey&) const = default;
};

// Empty fault_ids marks the golden (fault-free) entry; multiple ids mean an
// equivalence class whose members produce identical faulty responses.
struct DictionaryEntry {
    DictionaryKey key;
    std::vector<std::string> fault_ids;
    Signature signature;
    std::uint64_t response_length_bits = 0;
    std::optional<BitVec> response;  // embedded only when built with embed_responses

    bool is_golden() const { return fault_ids.empty(); }
    bool operator==(const DictionaryEntry&) const = default;
};

enum class Verdict { FaultFree, Faulty, InvalidSignature };

struct Diagnosis {
    Verdict verdict = Verdict::InvalidSignature;
    std::vector<std::string> fault_ids;  // populated for Faulty
};

struct FaultDictionary {
    std::string dut_id;
    std::size_t digest_bits = 0;
    int lfsr_degree = 0;
    std::vector<int> lfsr_taps;
    std::size_t po_count = 0;
    std::vector<DictionaryEntry> entries;

    bool operator==(const FaultDictionary&) const = default;

    bool has_key(const DictionaryKey& key) const;
    std::vector<DictionaryKey> keys() const;
    const DictionaryEntry* golden(const DictionaryKey& key) const;
    const DictionaryEntry* find(const DictionaryKey& key, const Signature& sig) const;
};

struct BuildOptions {
    int lfsr_degree;
    std::vector<int> lfsr_taps;
    bool embed_responses = false;

    BuildOptions();  // 32nd-degree default polynomial
};

std::vector<DictionaryEntry> build_golden(const Netlist& nl, std::span<const std::uint32_t> seeds,
                                          std::size_t pattern_count, const DeviceKey& key,
                                          std::size_t digest_bits,
                                          const BuildOptions& options = BuildOptions());

FaultDictionary build_fault_dictionary(const Netlist& nl, std::span<const std::uint32_t> seeds,
                                       std::size_t pattern_count, const DeviceKey& key,
                                       std::size_t digest_bits,
                                       const BuildOptions& options = BuildOptions());

// File layout: line 1 is the canonical JSON body, line 2 a hex checksum of
// the body bytes. The device key is never written.
void save_dictionary(const FaultDictionary& dict, const std::filesystem::path& path);
FaultDictionary load_dictionary(const std::filesystem::path& path);

std::string serialize_dictionary(const FaultDictionary& dict);
FaultDictionary deserialize_dictionary(const std::string& text);

Diagnosis lookup(const FaultDictionary& dict, const DictionaryKey& key, const Signature& observed);

}  // namespace kbist

#endif
