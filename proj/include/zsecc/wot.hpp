// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "zsecc/dataset.hpp"
#include "zsecc/nn.hpp"
#include "zsecc/quantizer.hpp"

namespace zsecc {

struct WotConfig {
    double lambda = 1e-4;
    double learning_rate = 1e-4;
    double momentum = 0.9;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 20;
    double target_accuracy = 0.0;  // the 8-bit quantized baseline, as a fraction
    std::uint64_t seed = 1;
    std::size_t eval_interval = 200;      // iterations between census/accuracy checkpoints
    double tolerance_pp = 0.01;           // "reached" means acc >= target - tolerance_pp / 100
    std::size_t calibration_samples = 128;

    void validate() const;
};

// Large weights (outside [-64, 63]) by position within 8-weight blocks.
// large_count covers positions 0..6 only; histogram[7] counts the permitted
// large values at the eighth position.
struct Census {
    std::uint64_t large_count = 0;
    std::array<std::uint64_t, 8> histogram{};

    Census& operator+=(const Census& o);
    friend bool operator==(const Census&, const Census&) = default;
};

Census census(const QuantizedTensor& t);
Census census(const QuantizedModel& m);
Census census(std::span<const QuantizedTensor> weights);

struct CensusRecord {
    std::size_t iteration = 0;
    std::uint64_t large_count = 0;  // before the throttling step
    double acc_before_throttle = 0.0;
    double acc_after_throttle = 0.0;
};

// Clamps every value at a non-eighth block position into [-64, 63].
QuantizedTensor throttle(const QuantizedTensor& q);

// Where throttling changed a value v -> v', the float weight becomes v' * scale.
std::vector<double> sync_float_from_throttle(std::span<const double> weights, const QuantizedTensor& pre,
                                             const QuantizedTensor& post, double scale);

struct WotResult {
    FloatModel float_model;
    QuantizedModel model;  // throttled; every layer satisfies the block constraint
    std::vector<CensusRecord> log;
    bool converged = false;
    std::size_t iterations = 0;
    double accuracy = 0.0;  // post-throttle accuracy of `model`
};

// Quantization-aware training with throttling. Each batch runs a QAT
// forward/backward/update, re-quantizes, throttles, and syncs the float
// weights. Every eval_interval iterations (and at iteration 0) the census and
// before/after-throttle test accuracy are logged; training stops once the
// post-throttle accuracy reaches the target. When max_epochs passes first,
// the best checkpoint is returned with converged = false.
WotResult wot_train(FloatModel model, const Dataset& train, const Dataset& test, const WotConfig& cfg);

// CSV: iteration,large_count,acc_before_throttle,acc_after_throttle
void write_census_log(std::ostream& os, std::span<const CensusRecord> log);

// CSV: layer,position,large_count. One row per layer and position, then
// "total" rows summed over layers.
void write_census_histogram(std::ostream& os, const QuantizedModel& m);

}  // namespace zsecc
