#ifndef KBIST_BITVEC_HPP
#define KBIST_BITVEC_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kbist {

// Dense bit sequence. Bit i lives in word i/64 at position i%64.
class BitVec {
public:
    BitVec() = default;
    explicit BitVec(std::size_t n) : words_((n + 63) / 64, 0), size_(n) {}

    static BitVec from_string(std::string_view s) {
        BitVec v(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1')
                v.set(i, true);
            else if (s[i] != '0')
                throw std::invalid_argument("bit string may contain only 0/1");
        }
        return v;
    }

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }

    void set(std::size_t i, bool v) {
        const std::uint64_t mask = std::uint64_t{1} << (i & 63);
        if (v)
            words_[i >> 6] |= mask;
        else
            words_[i >> 6] &= ~mask;
    }

    void push_back(bool v) {
        if (size_ % 64 == 0) words_.push_back(0);
        ++size_;
        set(size_ - 1, v);
    }

    void append(const BitVec& other) {
        for (std::size_t i = 0; i < other.size_; ++i) push_back(other.get(i));
    }

    bool operator==(const BitVec& other) const {
        return size_ == other.size_ && words_ == other.words_;
    }
    bool operator!=(const BitVec& other) const { return !(*this == other); }

    // Bit 0 of the sequence becomes the most significant bit of byte 0;
    // the final byte is zero-padded in its low bits.
    std::vector<std::uint8_t> to_bytes_msb_first() const {
        std::vector<std::uint8_t> out((size_ + 7) / 8, 0);
        for (std::size_t i = 0; i < size_; ++i)
            if (get(i)) out[i >> 3] |= static_cast<std::uint8_t>(0x80u >> (i & 7));
        return out;
    }

    std::string to_string() const {
        std::string s(size_, '0');
        for (std::size_t i = 0; i < size_; ++i)
            if (get(i)) s[i] = '1';
        return s;
    }

    const std::vector<std::uint64_t>& words() const { return words_; }

private:
    std::vector<std::uint64_t> words_;
    std::size_t size_ = 0;
};

}  // namespace kbist

#endif
