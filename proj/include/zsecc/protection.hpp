// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "zsecc/inplace_codec.hpp"
#include "zsecc/nn.hpp"

namespace zsecc {

// How weight memory is protected. The numeric values are the strategy tag of
// the model file; Float marks an unquantized training checkpoint.
enum class Strategy : std::uint8_t {
    Faulty = 0,       // raw bytes, no protection
    ParityZero = 1,   // one parity bit per weight byte; mismatching weights read as 0
    StandardEcc = 2,  // (72,64,1) check byte per 8 weight bytes
    InPlace = 3,      // (64,57,1) check bits inside the weights themselves
    Float = 255,
};

std::string_view to_string(Strategy s);
// Accepts faulty, zero, ecc, in-place (and parity-zero, standard-ecc,
// inplace as aliases). Throws ConfigError otherwise.
Strategy parse_strategy(std::string_view name);

// Nominal redundancy bytes per weight byte, in percent: 0, 12.5, 12.5, 0.
double nominal_overhead_pct(Strategy s);

// One entry of a protected model. Network layers expand into several records:
//   Input        dims (C, H, W, 0), scale = input activation scale
//   Conv2D       dims (N, C, H, W), scale = weight scale, payload = weights
//   ConvGeometry dims (stride, padding, 0, 0), follows its Conv2D
//   Linear       dims (out, in, 1, 1), scale = weight scale, payload = weights
//   Bias         dims (count, 1, 1, 1), scale = bias scale, payload = int32 LE,
//                follows its Conv2D/Linear
//   Activation   scale = output requantization scale, follows its Bias
//   ReLU, Flatten, MaxPool2D dims (kernel, stride, 0, 0)
// `pad` counts zero elements appended to the payload to fill the last 8-byte
// block.
enum class RecordKind : std::uint8_t {
    Input = 0,
    Conv2D = 1,
    Linear = 2,
    ReLU = 3,
    MaxPool2D = 4,
    Flatten = 5,
    ConvGeometry = 6,
    Bias = 7,
    Activation = 8,
};

struct StoredRecord {
    RecordKind kind = RecordKind::ReLU;
    std::array<std::uint32_t, 4> dims{0, 0, 0, 0};
    double scale = 0.0;
    std::uint8_t pad = 0;
    std::vector<std::uint8_t> payload;
    std::vector<std::uint8_t> redundancy;

    bool holds_weights() const { return kind == RecordKind::Conv2D || kind == RecordKind::Linear; }
    friend bool operator==(const StoredRecord&, const StoredRecord&) = default;
};

struct ProtectedModel {
    Strategy strategy = Strategy::Faulty;
    std::vector<StoredRecord> records;

    friend bool operator==(const ProtectedModel&, const ProtectedModel&) = default;
};

// Weight payload bytes (padded) and weight redundancy bytes.
struct SpaceAccount {
    std::uint64_t weight_bytes = 0;
    std::uint64_t redundancy_bytes = 0;
    double overhead_pct() const {
        return weight_bytes ? 100.0 * static_cast<double>(redundancy_bytes) / static_cast<double>(weight_bytes) : 0.0;
    }
};
SpaceAccount space_account(const ProtectedModel& m);

// Lays the model out in memory under `strategy`. Biases are kept as int32
// words; every strategy other than Faulty guards them with (72,64,1). Throws
// ConstraintViolation(flat index) for InPlace on a model that was not
// throttled.
ProtectedModel apply_strategy_store(const QuantizedModel& m, Strategy strategy);

struct RecoveryCounters {
    std::uint64_t corrected = 0;
    std::uint64_t detected_double = 0;
    // SEC-DED syndromes outside the code; for ParityZero, weights zeroed on a
    // parity mismatch.
    std::uint64_t detected_uncorrectable = 0;

    friend bool operator==(const RecoveryCounters&, const RecoveryCounters&) = default;
};

struct Recovered {
    QuantizedModel model;
    RecoveryCounters counters;
};

// Reads the model back through the strategy's decode path. Blocks flagged as
// uncorrectable pass their (uncorrected) weights through and are counted.
Recovered recover(const ProtectedModel& p);

// Per-tensor helpers for the redundancy-array strategies.
std::vector<std::uint8_t> parity_bits(std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> ecc72_checks(std::span<const std::uint8_t> payload);

}  // namespace zsecc
