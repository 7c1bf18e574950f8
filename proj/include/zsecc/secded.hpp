// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "zsecc/bitvec.hpp"

namespace zsecc {

// (k, d, t) parameters of a SEC-DED code. r = k - d check bits.
struct CodeSpec {
    std::size_t k = 0;
    std::size_t d = 0;
    std::size_t t = 1;
    std::size_t r = 0;

    friend bool operator==(const CodeSpec&, const CodeSpec&) = default;
};

// Parity-check matrix of an extended Hamming code, column by column.
//
// Logical positions are 1-indexed. For p < k the column is binary(p) in the
// low r-1 bits plus the overall-parity bit (bit r-1); position k holds the
// overall parity bit alone, so its column is just bit r-1. Hamming check bits
// sit at the power-of-two positions below k.
struct ParityStructure {
    std::vector<BitVec> columns;               // columns[p - 1], each of length r
    std::vector<std::size_t> check_positions;  // ascending; last entry is k
    std::vector<std::size_t> data_positions;   // ascending

    friend bool operator==(const ParityStructure&, const ParityStructure&) = default;
};

enum class DecodeStatus : std::uint8_t {
    NoError,
    CorrectedSingle,
    DetectedDouble,
    DetectedUncorrectable,
};

struct DecodeOutcome {
    DecodeStatus status = DecodeStatus::NoError;
    std::size_t position = 0;  // logical position, set only for CorrectedSingle

    bool clean() const { return status == DecodeStatus::NoError || status == DecodeStatus::CorrectedSingle; }
    friend bool operator==(const DecodeOutcome&, const DecodeOutcome&) = default;
};

std::string_view to_string(DecodeStatus s);

struct DecodeResult {
    BitVec data;
    DecodeOutcome outcome;
};

// Extended Hamming SEC-DED code over logical codeword bit vectors, where bit
// (p - 1) of a codeword holds logical position p.
//
// Supported sizes: 57 data bits -> (64,57,1), 64 data bits -> (72,64,1). The
// latter is the (128,120) extended parent shortened by dropping its highest
// data positions; syndromes that point at a dropped position decode as
// DetectedUncorrectable.
class SecDedCode {
public:
    static SecDedCode build(std::size_t data_bits);

    const CodeSpec& spec() const { return spec_; }
    const ParityStructure& structure() const { return structure_; }

    BitVec encode(const BitVec& data) const;
    DecodeResult decode(const BitVec& word) const;

    // r-bit syndrome of a k-bit word; bit r-1 is the overall parity.
    std::uint32_t syndrome(const BitVec& word) const;

    BitVec extract_data(const BitVec& word) const;

private:
    SecDedCode() = default;

    CodeSpec spec_;
    ParityStructure structure_;
    std::vector<BitVec> rows_;                   // r masks over codeword bits
    std::vector<std::uint16_t> syndrome_to_pos_; // 0 = no matching column
};

// Process-wide instances of the two supported codes.
const SecDedCode& secded_64_57();
const SecDedCode& secded_72_64();

}  // namespace zsecc

namespace zsecc {

// (72,64,1) over a 64-bit memory word with a separate check byte. Data bit i
// of the word maps to the i-th data position; check-byte bit i maps to the
// i-th check position (1, 2, 4, ..., 64, then 72).
std::uint8_t ecc72_check_byte(std::uint64_t data);

struct Ecc72Decode {
    std::uint64_t data = 0;
    DecodeOutcome outcome;
};
Ecc72Decode ecc72_decode(std::uint64_t data, std::uint8_t check);

}  // namespace zsecc
