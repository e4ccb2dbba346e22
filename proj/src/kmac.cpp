#include "kbist/kmac.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "lane byte mapping assumes a little-endian host");

namespace kbist {

namespace {

constexpr std::array<std::uint64_t, 24> kRoundConstants = {
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808aULL,
    0x8000000080008000ULL, 0x000000000000808bULL, 0x0000000080000001ULL,
    0x8000000080008081ULL, 0x8000000000008009ULL, 0x000000000000008aULL,
    0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000aULL,
    0x000000008000808bULL, 0x800000000000008bULL, 0x8000000000008089ULL,
    0x8000000000008003ULL, 0x8000000000008002ULL, 0x8000000000000080ULL,
    0x000000000000800aULL, 0x800000008000000aULL, 0x8000000080008081ULL,
    0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL,
};
static_assert(kRoundConstants.size() == kKeccakRounds);

// rho rotation offsets and pi lane cycle, lane order 1,10,7,11,...
constexpr std::array<int, 24> kRho = {1,  3,  6,  10, 15, 21, 28, 36, 45, 55, 2,  14,
                                      27, 41, 56, 8,  25, 43, 62, 18, 39, 61, 20, 44};
constexpr std::array<int, 24> kPi = {10, 7,  11, 17, 18, 3, 5,  16, 8,  21, 24, 4,
                                     15, 23, 19, 13, 12, 2, 20, 14, 22, 9,  6,  1};

void validate_digest_bits(std::size_t d) {
    if (d < 8 || d % 8 != 0)
        throw std::invalid_argument("digest length must be a positive multiple of 8 bits");
}

}  // namespace

void keccak_f1600(KeccakLanes& a) {
    for (int round = 0; round < kKeccakRounds; ++round) {
        // theta
        std::uint64_t c[5], d[5];
        for (int x = 0; x < 5; ++x)
            c[x] = a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20];
        for (int x = 0; x < 5; ++x) {
            d[x] = c[(x + 4) % 5] ^ std::rotl(c[(x + 1) % 5], 1);
            for (int y = 0; y < 25; y += 5) a[x + y] ^= d[x];
        }
        // rho + pi
        std::uint64_t last = a[1];
        for (int i = 0; i < 24; ++i) {
            const int j = kPi[i];
            const std::uint64_t t = a[j];
            a[j] = std::rotl(last, kRho[i]);
            last = t;
        }
        // chi
        for (int y = 0; y < 25; y += 5) {
            std::uint64_t row[5];
            for (int x = 0; x < 5; ++x) row[x] = a[y + x];
            for (int x = 0; x < 5; ++x)
                a[y + x] = row[x] ^ (~row[(x + 1) % 5] & row[(x + 2) % 5]);
        }
        // iota
        a[0] ^= kRoundConstants[round];
    }
}

KeccakSponge::KeccakSponge(std::size_t rate_bytes, std::uint8_t domain_suffix)
    : rate_(rate_bytes), suffix_(domain_suffix) {
    if (rate_ == 0 || rate_ > 200 || rate_ % 8 != 0)
        throw std::invalid_argument("sponge rate must be a multiple of 8 bytes, at most 200");
}

void KeccakSponge::permute() {
    keccak_f1600(lanes_);
    offset_ = 0;
}

void KeccakSponge::absorb(std::span<const std::uint8_t> data) {
    if (squeezing_) throw std::logic_error("absorb after squeeze");
    auto* bytes = reinterpret_cast<std::uint8_t*>(lanes_.data());
    for (std::uint8_t b : data) {
        bytes[offset_++] ^= b;
        if (offset_ == rate_) permute();
    }
}

void KeccakSponge::squeeze(std::span<std::uint8_t> out) {
    auto* bytes = reinterpret_cast<std::uint8_t*>(lanes_.data());
    if (!squeezing_) {
        bytes[offset_] ^= suffix_;
        bytes[rate_ - 1] ^= 0x80;
        permute();
        squeezing_ = true;
    }
    for (auto& o : out) {
        if (offset_ == rate_) permute();
        o = bytes[offset_++];
    }
}

DeviceKey::DeviceKey(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
    if (bytes_.size() < 8)
        throw std::invalid_argument("device key must be at least 8 octets (64 bits)");
}

DeviceKey DeviceKey::from_hex(std::string_view hex) { return DeviceKey(kbist::from_hex(hex)); }

DeviceKey DeviceKey::load(const std::filesystem::path& key_file) {
    std::ifstream in(key_file);
    if (!in) throw std::runtime_error("cannot open key file " + key_file.string());
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
            line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        try {
            return from_hex(line);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("key file " + key_file.string() + ": " + e.what());
        }
    }
    throw std::runtime_error("key file " + key_file.string() + " has no key line");
}

std::string Signature::hex() const { return to_hex(digest); }

Signature Signature::from_hex(std::string_view hex) { return Signature{kbist::from_hex(hex)}; }

std::vector<std::uint8_t> left_encode(std::uint64_t value) {
    std::uint8_t buf[8];
    std::size_t n = 0;
    for (int shift = 56; shift >= 0; shift -= 8) {
        const auto b = static_cast<std::uint8_t>(value >> shift);
        if (n > 0 || b != 0 || shift == 0) buf[n++] = b;
    }
    std::vector<std::uint8_t> out;
    out.reserve(n + 1);
    out.push_back(static_cast<std::uint8_t>(n));
    out.insert(out.end(), buf, buf + n);
    return out;
}

std::vector<std::uint8_t> right_encode(std::uint64_t value) {
    auto out = left_encode(value);
    // move the length byte to the back
    std::rotate(out.begin(), out.begin() + 1, out.end());
    return out;
}

std::vector<std::uint8_t> encode_string(std::span<const std::uint8_t> s) {
    auto out = left_encode(s.size() * 8);
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

std::vector<std::uint8_t> bytepad(std::span<const std::uint8_t> data, std::size_t w) {
    auto out = left_encode(w);
    out.insert(out.end(), data.begin(), data.end());
    out.resize(out.size() + (w - out.size() % w) % w, 0);
    return out;
}

std::vector<std::uint8_t> shake128(std::span<const std::uint8_t> message, std::size_t digest_bits) {
    validate_digest_bits(digest_bits);
    KeccakSponge sponge(kShake128RateBytes, 0x1f);
    sponge.absorb(message);
    std::vector<std::uint8_t> out(digest_bits / 8);
    sponge.squeeze(out);
    return out;
}

std::vector<std::uint8_t> cshake128(std::span<const std::uint8_t> message, std::size_t digest_bits,
                                    std::span<const std::uint8_t> function_name,
                                    std::span<const std::uint8_t> customization) {
    if (function_name.empty() && customization.empty())
        return shake128(message, digest_bits);  // SP 800-185 reduction rule
    validate_digest_bits(digest_bits);
    KeccakSponge sponge(kShake128RateBytes, 0x04);
    auto prefix = encode_string(function_name);
    auto s = encode_string(customization);
    prefix.insert(prefix.end(), s.begin(), s.end());
    sponge.absorb(bytepad(prefix, kShake128RateBytes));
    sponge.absorb(message);
    std::vector<std::uint8_t> out(digest_bits / 8);
    sponge.squeeze(out);
    return out;
}

namespace {
constexpr std::uint8_t kKmacName[] = {'K', 'M', 'A', 'C'};

KeccakSponge make_kmac_sponge(const DeviceKey& key, std::span<const std::uint8_t> customization) {
    KeccakSponge sponge(kShake128RateBytes, 0x04);
    auto prefix = encode_string(kKmacName);
    auto s = encode_string(customization);
    prefix.insert(prefix.end(), s.begin(), s.end());
    sponge.absorb(bytepad(prefix, kShake128RateBytes));
    sponge.absorb(bytepad(encode_string(key.bytes()), kShake128RateBytes));
    return sponge;
}
}  // namespace

Kmac128::Kmac128(const DeviceKey& key, std::size_t digest_bits,
                 std::span<const std::uint8_t> customization)
    : sponge_(make_kmac_sponge(key, customization)), digest_bits_(digest_bits) {
    validate_digest_bits(digest_bits);
}

void Kmac128::update(std::span<const std::uint8_t> chunk) { sponge_.absorb(chunk); }

Signature Kmac128::finalize() {
    sponge_.absorb(right_encode(digest_bits_));
    Signature sig;
    sig.digest.resize(digest_bits_ / 8);
    sponge_.squeeze(sig.digest);
    return sig;
}

Signature kmac128(const DeviceKey& key, std::span<const std::uint8_t> message,
                  std::size_t digest_bits, std::span<const std::uint8_t> customization) {
    Kmac128 ctx(key, digest_bits, customization);
    ctx.update(message);
    return ctx.finalize();
}

Signature prefix_keyed_shake128(const DeviceKey& key, std::span<const std::uint8_t> message,
                                std::size_t digest_bits) {
    validate_digest_bits(digest_bits);
    KeccakSponge sponge(kShake128RateBytes, 0x1f);
    sponge.absorb(key.bytes());
    sponge.absorb(message);
    Signature sig;
    sig.digest.resize(digest_bits / 8);
    sponge.squeeze(sig.digest);
    return sig;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xf]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) throw std::invalid_argument("hex string has odd length");
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int hi = nibble(hex[2 * i]), lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
        out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return out;
}

}  // namespace kbist
