#ifndef KBIST_KMAC_HPP
#define KBIST_KMAC_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace kbist {

// 5x5 lane state, lane (x, y) at index x + 5*y.
using KeccakLanes = std::array<std::uint64_t, 25>;

inline constexpr int kKeccakRounds = 24;

void keccak_f1600(KeccakLanes& lanes);

// Sponge construction over Keccak-f[1600] (XOF). Streaming absorb; the
// first squeeze pads with the domain suffix and switches phase.
class KeccakSponge {
public:
    KeccakSponge(std::size_t rate_bytes, std::uint8_t domain_suffix);

    void absorb(std::span<const std::uint8_t> data);
    void squeeze(std::span<std::uint8_t> out);

private:
    void permute();

    KeccakLanes lanes_{};
    std::size_t rate_;
    std::uint8_t suffix_;
    std::size_t offset_ = 0;
    bool squeezing_ = false;
};

inline constexpr std::size_t kShake128RateBytes = 168;  // b=1600, c=256

// Device-specific MAC key. Never serialized into dictionaries or protocol
// messages; 64 bits is the floor, longer keys are fine.
class DeviceKey {
public:
    explicit DeviceKey(std::vector<std::uint8_t> bytes);
    static DeviceKey from_hex(std::string_view hex);
    // first non-comment line of hex octets; '#' lines and blanks skipped
    static DeviceKey load(const std::filesystem::path& key_file);

    std::span<const std::uint8_t> bytes() const { return bytes_; }
    std::size_t bit_length() const { return bytes_.size() * 8; }

private:
    std::vector<std::uint8_t> bytes_;
};

struct Signature {
    std::vector<std::uint8_t> digest;

    std::size_t bit_length() const { return digest.size() * 8; }
    std::string hex() const;
    static Signature from_hex(std::string_view hex);

    bool operator==(const Signature&) const = default;
};

// SP 800-185 string-encoding helpers (exposed for tests).
std::vector<std::uint8_t> left_encode(std::uint64_t value);
std::vector<std::uint8_t> right_encode(std::uint64_t value);
std::vector<std::uint8_t> encode_string(std::span<const std::uint8_t> s);
std::vector<std::uint8_t> bytepad(std::span<const std::uint8_t> data, std::size_t w);

std::vector<std::uint8_t> shake128(std::span<const std::uint8_t> message, std::size_t digest_bits);

std::vector<std::uint8_t> cshake128(std::span<const std::uint8_t> message, std::size_t digest_bits,
                                    std::span<const std::uint8_t> function_name,
                                    std::span<const std::uint8_t> customization);

Signature kmac128(const DeviceKey& key, std::span<const std::uint8_t> message,
                  std::size_t digest_bits, std::span<const std::uint8_t> customization = {});

// Streaming KMAC128 for incremental message absorption.
class Kmac128 {
public:
    Kmac128(const DeviceKey& key, std::size_t digest_bits,
            std::span<const std::uint8_t> customization = {});
    void update(std::span<const std::uint8_t> chunk);
    Signature finalize();

private:
    KeccakSponge sponge_;
    std::size_t digest_bits_;
};

// Literal prefix construction H(k || m) via SHAKE128; compatibility mode.
Signature prefix_keyed_shake128(const DeviceKey& key, std::span<const std::uint8_t> message,
                                std::size_t digest_bits);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);

}  // namespace kbist

#endif
