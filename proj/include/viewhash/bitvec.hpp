#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace vh {

// Fixed-width bit string packed into 64-bit words, little-endian bit order.
// Descriptors group bits into 16-bit per-cell fields (4 cells per word).
class BitVec {
public:
    BitVec() = default;
    explicit BitVec(std::size_t nbits)
        : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

    std::size_t size() const { return nbits_; }
    std::size_t word_count() const { return words_.size(); }
    const std::uint64_t* data() const { return words_.data(); }
    std::uint64_t* data() { return words_.data(); }
    std::uint64_t word(std::size_t i) const { return words_[i]; }

    bool test(std::size_t pos) const {
        return (words_[pos >> 6] >> (pos & 63)) & 1u;
    }
    void set(std::size_t pos) { words_[pos >> 6] |= (1ULL << (pos & 63)); }
    void reset(std::size_t pos) { words_[pos >> 6] &= ~(1ULL << (pos & 63)); }

    // 16-bit cell field access; cell c occupies bits [16c, 16c+16).
    std::uint16_t field16(std::size_t cell) const {
        return static_cast<std::uint16_t>(words_[cell >> 2] >> ((cell & 3) * 16));
    }
    void set_field16(std::size_t cell, std::uint16_t value) {
        const int shift = static_cast<int>(cell & 3) * 16;
        std::uint64_t& w = words_[cell >> 2];
        w = (w & ~(0xFFFFULL << shift)) |
            (static_cast<std::uint64_t>(value) << shift);
    }

    std::size_t popcount() const {
        std::size_t n = 0;
        for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    bool operator==(const BitVec& o) const {
        return nbits_ == o.nbits_ && words_ == o.words_;
    }

    // true iff every set bit of *this is also set in o
    bool is_subset_of(const BitVec& o) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~o.words_[i]) return false;
        return true;
    }

private:
    std::size_t nbits_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace vh
