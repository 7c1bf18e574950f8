// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "zsecc/quantizer.hpp"
#include "zsecc/secded.hpp"

namespace zsecc {

// Eight consecutive int8 weights in flattened order. Physical bit 8*b + j is
// bit j of bytes[b], i.e. the block read as a little-endian 64-bit word.
using WeightBlock = std::array<std::int8_t, 8>;

inline constexpr std::size_t kBlockWeights = 8;

// True iff w is in [-64, 63]: bit 6 duplicates the sign bit.
constexpr bool has_noninformative_bit(std::int8_t w) { return w >= -64 && w <= 63; }

std::uint64_t pack_block(const WeightBlock& b);
WeightBlock unpack_block(std::uint64_t bits);

// Routing between the 64 physical block bits and the (64,57,1) logical
// codeword. check_phys[i] (bit 6 of byte i) carries check_positions[i];
// data_phys[i] carries data_positions[i].
struct SwizzleMap {
    std::array<std::uint8_t, 7> check_phys{};
    std::array<std::uint8_t, 57> data_phys{};
};

const SwizzleMap& swizzle_map();

// Writes the seven check bits into bit 6 of bytes 0..6. Throws
// ConstraintViolation(byte index) if any of those bytes is outside [-64, 63].
WeightBlock encode_block(const WeightBlock& b);

struct BlockDecodeResult {
    WeightBlock block{};
    DecodeOutcome outcome;
};

// Unswizzle, SEC-DED decode, reswizzle, then copy bit 7 into bit 6 of
// bytes 0..6.
BlockDecodeResult decode_block(const WeightBlock& b);

// Count of corrections and detections across a decoded tensor.
struct DecodeCounters {
    std::uint64_t corrected = 0;
    std::uint64_t detected_double = 0;
    std::uint64_t detected_uncorrectable = 0;

    DecodeCounters& operator+=(const DecodeCounters& o) {
        corrected += o.corrected;
        detected_double += o.detected_double;
        detected_uncorrectable += o.detected_uncorrectable;
        return *this;
    }
    void record(const DecodeOutcome& o);
    friend bool operator==(const DecodeCounters&, const DecodeCounters&) = default;
};

// In-place protected weights of one tensor: byte length equals the padded
// weight count.
struct ProtectedPayload {
    std::vector<std::uint8_t> bytes;
    std::uint8_t pad = 0;  // zero weights appended to reach a multiple of 8
};

// Number of zero weights needed to pad n to a multiple of 8.
constexpr std::uint8_t block_padding(std::size_t n) {
    return static_cast<std::uint8_t>((kBlockWeights - n % kBlockWeights) % kBlockWeights);
}

// Throws ConstraintViolation(flat index) on the first non-compliant weight.
ProtectedPayload protect_tensor(const QuantizedTensor& t);

// Decodes every block and strips the padding. `count` is the unpadded
// weight count.
std::vector<std::int8_t> unprotect_tensor(std::span<const std::uint8_t> bytes, std::size_t count,
                                          DecodeCounters* counters = nullptr);

}  // namespace zsecc
