// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>

namespace zsecc {

// Fixed-capacity bit vector (up to 128 bits). Bit 0 is the least significant
// bit of word 0. Bits at or beyond size() are always zero.
class BitVec {
public:
    static constexpr std::size_t kCapacity = 128;

    constexpr BitVec() = default;
    explicit constexpr BitVec(std::size_t size) : size_(size) {}
    constexpr BitVec(std::size_t size, std::uint64_t lo, std::uint64_t hi = 0) : size_(size), words_{lo, hi} {
        trim();
    }

    constexpr std::size_t size() const { return size_; }

    constexpr bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
    constexpr void set(std::size_t i, bool v) {
        const std::uint64_t m = std::uint64_t{1} << (i & 63);
        if (v) {
            words_[i >> 6] |= m;
        } else {
            words_[i >> 6] &= ~m;
        }
    }
    constexpr void flip(std::size_t i) { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

    constexpr std::uint64_t lo() const { return words_[0]; }
    constexpr std::uint64_t hi() const { return words_[1]; }

    constexpr int popcount() const { return std::popcount(words_[0]) + std::popcount(words_[1]); }
    // Parity of (this AND mask).
    constexpr bool parity_with(const BitVec& mask) const {
        return ((std::popcount(words_[0] & mask.words_[0]) + std::popcount(words_[1] & mask.words_[1])) & 1) != 0;
    }

    constexpr BitVec& operator^=(const BitVec& o) {
        words_[0] ^= o.words_[0];
        words_[1] ^= o.words_[1];
        return *this;
    }
    friend constexpr BitVec operator^(BitVec a, const BitVec& b) { return a ^= b; }
    friend constexpr bool operator==(const BitVec&, const BitVec&) = default;

private:
    constexpr void trim() {
        if (size_ < 64) {
            words_[0] &= size_ == 0 ? 0 : (~std::uint64_t{0} >> (64 - size_));
            words_[1] = 0;
        } else if (size_ < 128) {
            words_[1] &= size_ == 64 ? 0 : (~std::uint64_t{0} >> (128 - size_));
        }
    }

    std::size_t size_ = 0;
    std::array<std::uint64_t, 2> words_{};
};

}  // namespace zsecc
