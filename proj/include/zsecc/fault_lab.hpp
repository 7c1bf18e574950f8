// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zsecc/dataset.hpp"
#include "zsecc/nn.hpp"
#include "zsecc/protection.hpp"

namespace zsecc {

enum class FaultScope : std::uint8_t {
    AllStoredBits,   // weight payloads and their redundancy arrays
    WeightBitsOnly,  // weight payloads only
};

std::string_view to_string(FaultScope s);
// "all" or "weights".
FaultScope parse_scope(std::string_view name);

// Random bit-flip fault model: round(total_bits * rate) distinct positions,
// drawn uniformly without replacement from CounterRng(seed).
struct FaultModel {
    double rate = 0.0;
    std::uint64_t seed = 0;
    FaultScope scope = FaultScope::AllStoredBits;

    void validate() const;
};

// round(total_bits * rate), half away from zero.
std::uint64_t flip_count(std::uint64_t total_bits, double rate);

// `count` distinct positions in [0, total_bits), ascending (Floyd's sampling).
std::vector<std::uint64_t> sample_positions(std::uint64_t total_bits, std::uint64_t count, std::uint64_t seed);

// Flips bits of a byte array in place; bit p is bit (p % 8) of byte p / 8.
// Returns the flipped positions.
std::vector<std::uint64_t> inject(std::span<std::uint8_t> bytes, const FaultModel& fm);

// Fault address space of a protected model: for each weight record in order,
// its payload bits followed (AllStoredBits) by its redundancy bits. Biases
// and metadata are never faulted.
std::uint64_t fault_space_bits(const ProtectedModel& p, FaultScope scope);
std::vector<std::uint64_t> inject(ProtectedModel& p, const FaultModel& fm);

// Number of faults that landed in each protection block (8 weight bytes plus
// whatever redundancy guards them), indexed by block across all weight
// records in order.
std::vector<std::uint32_t> flips_per_block(const ProtectedModel& p, FaultScope scope,
                                           std::span<const std::uint64_t> positions);

struct FaultTrialReport {
    Strategy strategy = Strategy::Faulty;
    FaultScope scope = FaultScope::AllStoredBits;
    double rate = 0.0;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double clean_accuracy = 0.0;  // percent
    double accuracy = 0.0;        // percent
    double drop = 0.0;            // percentage points, clean - faulty; may be negative
    std::uint64_t flips = 0;
    RecoveryCounters counters;
    std::uint32_t max_flips_in_block = 0;
};

struct AggregateRow {
    Strategy strategy = Strategy::Faulty;
    double rate = 0.0;
    std::size_t trials = 0;
    double mean_drop = 0.0;
    double std_drop = 0.0;  // sample standard deviation (n - 1)
    double space_overhead_pct = 0.0;
};

struct ExperimentConfig {
    std::string model_name = "model";
    std::vector<Strategy> strategies{Strategy::Faulty, Strategy::ParityZero, Strategy::StandardEcc,
                                     Strategy::InPlace};
    std::vector<double> rates{1e-6, 1e-5, 1e-4, 1e-3};
    std::size_t trials = 10;
    std::uint64_t base_seed = 0;
    FaultScope scope = FaultScope::AllStoredBits;

    void validate() const;
};

struct ExperimentReport {
    std::string model_name;
    double clean_accuracy = 0.0;  // percent
    std::vector<FaultTrialReport> trials;
    std::vector<AggregateRow> aggregate;

    const AggregateRow& cell(Strategy s, double rate) const;
};

// For each (strategy, rate, trial): fresh store, inject with seed
// base_seed + trial, recover, evaluate on `test`.
ExperimentReport run_experiment(const QuantizedModel& model, const Dataset& test, const ExperimentConfig& cfg);

// model,strategy,scope,fault_rate,trial,seed,flips,corrected,detected_double,
// detected_uncorrectable,accuracy,drop
void write_trials_csv(std::ostream& os, const ExperimentReport& r);
// strategy,rate,mean_drop,std_drop,space_overhead_pct
void write_aggregate_csv(std::ostream& os, const ExperimentReport& r);

std::string format_rate(double rate);

}  // namespace zsecc
