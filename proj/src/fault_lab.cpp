// SPDX-License-Identifier: Apache-2.0
#include "zsecc/fault_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <unordered_set>

#include "zsecc/error.hpp"
#include "zsecc/rng.hpp"

namespace zsecc {

std::string_view to_string(FaultScope s) { return s == FaultScope::AllStoredBits ? "all" : "weights"; }

FaultScope parse_scope(std::string_view name) {
    if (name == "all" || name == "all-stored-bits") return FaultScope::AllStoredBits;
    if (name == "weights" || name == "weight-bits-only") return FaultScope::WeightBitsOnly;
    throw ConfigError("unknown fault scope '" + std::string(name) + "' (expected all or weights)");
}

void FaultModel::validate() const {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("fault rate must be in [0, 1]");
}

std::uint64_t flip_count(std::uint64_t total_bits, double rate) {
    return static_cast<std::uint64_t>(std::round(static_cast<double>(total_bits) * rate));
}

std::vector<std::uint64_t> sample_positions(std::uint64_t total_bits, std::uint64_t count, std::uint64_t seed) {
    if (count > total_bits) throw ArgumentError("sample_positions: more flips than bits");
    CounterRng rng(seed);
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(count * 2);
    std::vector<std::uint64_t> out;
    out.reserve(count);
    for (std::uint64_t j = total_bits - count; j < total_bits; ++j) {
        const std::uint64_t t = rng.below(j + 1);
        const std::uint64_t pick = chosen.insert(t).second ? t : j;
        if (pick == j) chosen.insert(j);
        out.push_back(pick);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::uint64_t> inject(std::span<std::uint8_t> bytes, const FaultModel& fm) {
    fm.validate();
    const std::uint64_t total = std::uint64_t{bytes.size()} * 8;
    auto pos = sample_positions(total, flip_count(total, fm.rate), fm.seed);
    for (auto p : pos) bytes[p / 8] ^= static_cast<std::uint8_t>(1U << (p % 8));
    return pos;
}

namespace {

struct Segment {
    std::vector<std::uint8_t>* bytes;
    std::uint64_t first_bit;
};

std::vector<Segment> fault_segments(ProtectedModel& p, FaultScope scope) {
    std::vector<Segment> segs;
    std::uint64_t off = 0;
    for (auto& r : p.records) {
        if (!r.holds_weights()) continue;
        segs.push_back({&r.payload, off});
        off += std::uint64_t{r.payload.size()} * 8;
        if (scope == FaultScope::AllStoredBits) {
            segs.push_back({&r.redundancy, off});
            off += std::uint64_t{r.redundancy.size()} * 8;
        }
    }
    return segs;
}

double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::uint64_t fault_space_bits(const ProtectedModel& p, FaultScope scope) {
    std::uint64_t total = 0;
    for (const auto& r : p.records) {
        if (!r.holds_weights()) continue;
        total += std::uint64_t{r.payload.size()} * 8;
        if (scope == FaultScope::AllStoredBits) total += std::uint64_t{r.redundancy.size()} * 8;
    }
    return total;
}

std::vector<std::uint64_t> inject(ProtectedModel& p, const FaultModel& fm) {
    fm.validate();
    const std::uint64_t total = fault_space_bits(p, fm.scope);
    auto pos = sample_positions(total, flip_count(total, fm.rate), fm.seed);
    const auto segs = fault_segments(p, fm.scope);
    std::size_t s = 0;
    for (auto bit : pos) {
        while (bit >= segs[s].first_bit + segs[s].bytes->size() * 8) ++s;
        const std::uint64_t local = bit - segs[s].first_bit;
        (*segs[s].bytes)[local / 8] ^= static_cast<std::uint8_t>(1U << (local % 8));
    }
    return pos;
}

std::vector<std::uint32_t> flips_per_block(const ProtectedModel& p, FaultScope scope,
                                           std::span<const std::uint64_t> positions) {
    // Walk the same layout as fault_segments, mapping each bit to its block.
    struct Range {
        std::uint64_t first_bit, bits;
        std::size_t first_block;
        bool redundancy;
    };
    std::vector<Range> ranges;
    std::uint64_t off = 0;
    std::size_t blocks = 0;
    for (const auto& r : p.records) {
        if (!r.holds_weights()) continue;
        const std::uint64_t pb = std::uint64_t{r.payload.size()} * 8;
        ranges.push_back({off, pb, blocks, false});
        off += pb;
        if (scope == FaultScope::AllStoredBits) {
            const std::uint64_t rb = std::uint64_t{r.redundancy.size()} * 8;
            ranges.push_back({off, rb, blocks, true});
            off += rb;
        }
        blocks += r.payload.size() / 8;
    }
    std::vector<std::uint32_t> counts(blocks, 0);
    for (auto bit : positions) {
        for (const auto& rg : ranges) {
            if (bit < rg.first_bit || bit >= rg.first_bit + rg.bits) continue;
            const std::uint64_t local = bit - rg.first_bit;
            // Payload: 64 bits per block. Redundancy: parity byte i and ECC
            // check byte i both guard payload block i.
            const std::uint64_t blk = rg.redundancy ? local / 8 : local / 64;
            ++counts[rg.first_block + blk];
            break;
        }
    }
    return counts;
}

void ExperimentConfig::validate() const {
    if (trials == 0) throw ConfigError("experiment: trials must be >= 1");
    if (strategies.empty()) throw ConfigError("experiment: no strategies");
    for (auto s : strategies) {
        if (s == Strategy::Float) throw ConfigError("experiment: float is not a protection strategy");
    }
    for (double r : rates) FaultModel{r, 0, scope}.validate();
}

const AggregateRow& ExperimentReport::cell(Strategy s, double rate) const {
    for (const auto& a : aggregate) {
        if (a.strategy == s && a.rate == rate) return a;
    }
    throw ArgumentError("experiment report has no cell for " + std::string(to_string(s)) + " at rate " +
                        format_rate(rate));
}

ExperimentReport run_experiment(const QuantizedModel& model, const Dataset& test, const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentReport rep;
    rep.model_name = cfg.model_name;
    rep.clean_accuracy = 100.0 * evaluate_int8(model, test);

    for (Strategy s : cfg.strategies) {
        const ProtectedModel store = apply_strategy_store(model, s);
        const double overhead = space_account(store).overhead_pct();
        for (double rate : cfg.rates) {
            std::vector<double> drops;
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                FaultTrialReport tr;
                tr.strategy = s;
                tr.scope = cfg.scope;
                tr.rate = rate;
                tr.trial = t;
                tr.seed = cfg.base_seed + t;
                tr.clean_accuracy = rep.clean_accuracy;

                ProtectedModel faulty = store;
                const auto pos = inject(faulty, FaultModel{rate, tr.seed, cfg.scope});
                tr.flips = pos.size();
                const auto per_block = flips_per_block(faulty, cfg.scope, pos);
                tr.max_flips_in_block =
                    per_block.empty() ? 0 : *std::max_element(per_block.begin(), per_block.end());

                Recovered rec = recover(faulty);
                tr.counters = rec.counters;
                // Inference is deterministic, so unchanged parameters give the clean accuracy.
                tr.accuracy = rec.model == model ? rep.clean_accuracy : 100.0 * evaluate_int8(rec.model, test);
                tr.drop = tr.clean_accuracy - tr.accuracy;
                drops.push_back(tr.drop);
                rep.trials.push_back(tr);
            }
            rep.aggregate.push_back({s, rate, cfg.trials, mean(drops), sample_std(drops), overhead});
        }
    }
    return rep;
}

std::string format_rate(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", rate);
    return buf;
}

void write_trials_csv(std::ostream& os, const ExperimentReport& r) {
    os << "model,strategy,scope,fault_rate,trial,seed,flips,corrected,detected_double,detected_uncorrectable,"
          "accuracy,drop\n";
    char buf[128];
    for (const auto& t : r.trials) {
        os << r.model_name << ',' << to_string(t.strategy) << ',' << to_string(t.scope) << ',' << format_rate(t.rate)
           << ',' << t.trial << ',' << t.seed << ',' << t.flips << ',' << t.counters.corrected << ','
           << t.counters.detected_double << ',' << t.counters.detected_uncorrectable << ',';
        std::snprintf(buf, sizeof buf, "%.4f,%.4f\n", t.accuracy, t.drop);
        os << buf;
    }
}

void write_aggregate_csv(std::ostream& os, const ExperimentReport& r) {
    os << "strategy,rate,mean_drop,std_drop,space_overhead_pct\n";
    char buf[128];
    for (const auto& a : r.aggregate) {
        os << to_string(a.strategy) << ',' << format_rate(a.rate) << ',';
        std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.2f\n", a.mean_drop, a.std_drop, a.space_overhead_pct);
        os << buf;
    }
}

}  // namespace zsecc
