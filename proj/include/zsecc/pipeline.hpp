// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "zsecc/dataset.hpp"
#include "zsecc/fault_lab.hpp"
#include "zsecc/nn.hpp"
#include "zsecc/wot.hpp"

namespace zsecc {

// Where the train/test data comes from. When both IDX paths of a split are
// set, that split is read from disk; otherwise the synthetic generator is
// used with `synthetic_seed`.
struct DataSource {
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    std::uint64_t synthetic_seed = 42;
    std::size_t train_count = 10000;
    std::size_t test_count = 2000;
    std::uint32_t classes = 10;
};

struct DataSplits {
    Dataset train;
    Dataset test;
};

DataSplits load_data(const DataSource& src);

inline constexpr std::size_t kCalibrationSamples = 128;

// Quantizes a float model, calibrating on the first training samples.
QuantizedModel quantize_for_inference(const FloatModel& m, const Dataset& train);

struct PipelineConfig {
    DataSource data;
    std::uint64_t model_seed = 1;
    FloatTrainConfig train;
    WotConfig wot;  // target_accuracy is replaced by the measured int8 baseline
    ExperimentConfig experiment;
};

struct PipelineSummary {
    double float_accuracy = 0.0;
    double baseline_accuracy = 0.0;  // int8, before WOT
    double wot_accuracy = 0.0;       // int8, after WOT (throttled)
    bool wot_converged = false;
    Census census_before;
    Census census_after;
};

// train -> quantize -> wot -> protect (every strategy) -> report, writing
//   float.zsec quantized.zsec wot.zsec protected-<strategy>.zsec
//   census_log.csv histogram.csv trials.csv aggregate.csv
// into out_dir.
PipelineSummary run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace zsecc
