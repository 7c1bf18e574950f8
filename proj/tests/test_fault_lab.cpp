// SPDX-License-Identifier: Apache-2.0
#include <set>
#include <sstream>

#include "doctest.h"
#include "zsecc/error.hpp"
#include "zsecc/fault_lab.hpp"
#include "zsecc/protection.hpp"
#include "zsecc/rng.hpp"
#include "zsecc/wot.hpp"

using namespace zsecc;

namespace {

Dataset random_dataset(std::uint64_t seed, std::size_t n) {
    CounterRng rng(seed);
    Dataset ds;
    ds.rows = 8;
    ds.cols = 16;
    ds.classes = 8;
    ds.images.resize(n * 128);
    for (auto& p : ds.images) p = static_cast<std::uint8_t>(rng.below(256));
    for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<std::uint8_t>(rng.below(8)));
    return ds;
}

// One Linear(8, 128) layer: 1024 weights.
QuantizedModel linear_model(std::uint64_t seed, bool throttled) {
    const FloatModel fm = make_model(FeatureShape{1, 8, 16}, {LayerSpec::flatten(), LayerSpec::linear(8, 128)}, seed);
    const Dataset ds = random_dataset(seed, 16);
    QuantizedModel qm = quantize_model(fm, ds, first_indices(ds, 16));
    if (throttled) {
        for (auto& w : qm.weights) {
            if (!w.values.empty()) w = throttle(w);
        }
    }
    return qm;
}

// A two-conv model with a tensor length that is not a multiple of 8.
QuantizedModel conv_model(std::uint64_t seed) {
    const FloatModel fm = make_model(FeatureShape{1, 8, 16},
                                     {LayerSpec::conv2d(3, 1, 3, 3, 1, 1), LayerSpec::relu(),
                                      LayerSpec::conv2d(2, 3, 3, 3), LayerSpec::flatten(),
                                      LayerSpec::linear(8, 2 * 6 * 14)},
                                     seed);
    const Dataset ds = random_dataset(seed + 1, 16);
    QuantizedModel qm = quantize_model(fm, ds, first_indices(ds, 16));
    for (auto& w : qm.weights) {
        if (!w.values.empty()) w = throttle(w);
    }
    return qm;
}

const std::vector<Strategy> kAll{Strategy::Faulty, Strategy::ParityZero, Strategy::StandardEcc, Strategy::InPlace};

}  // namespace

TEST_CASE("flip counts and sampling") {
    CHECK(flip_count(1'000'000, 1e-3) == 1000);
    CHECK(flip_count(1000, 0.0) == 0);
    CHECK(flip_count(10, 0.05) == 1);   // 0.5 rounds up
    CHECK(flip_count(10, 0.04) == 0);
    CHECK(flip_count(10, 1.0) == 10);

    const auto a = sample_positions(1'000'000, 1000, 9);
    CHECK(a.size() == 1000);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(std::set<std::uint64_t>(a.begin(), a.end()).size() == 1000);
    CHECK(a.back() < 1'000'000);
    CHECK(sample_positions(1'000'000, 1000, 9) == a);
    CHECK(sample_positions(1'000'000, 1000, 10) != a);

    const auto all = sample_positions(50, 50, 1);
    for (std::uint64_t i = 0; i < 50; ++i) CHECK(all[i] == i);
}

TEST_CASE("inject into raw bytes") {
    std::vector<std::uint8_t> bytes(125'000, 0);  // 1e6 bits
    SUBCASE("rate zero changes nothing") {
        CHECK(inject(bytes, FaultModel{0.0, 1}).empty());
        CHECK(std::all_of(bytes.begin(), bytes.end(), [](auto b) { return b == 0; }));
    }
    SUBCASE("exact count and positions") {
        const auto pos = inject(bytes, FaultModel{1e-3, 1});
        CHECK(pos.size() == 1000);
        std::size_t ones = 0;
        for (auto b : bytes) ones += std::popcount(b);
        CHECK(ones == 1000);
        for (auto p : pos) CHECK(((bytes[p / 8] >> (p % 8)) & 1U) == 1U);
        std::vector<std::uint8_t> again(125'000, 0);
        inject(again, FaultModel{1e-3, 1});
        CHECK(again == bytes);
    }
    SUBCASE("invalid rate") {
        CHECK_THROWS_AS(inject(bytes, FaultModel{-0.1, 1}), ConfigError);
        CHECK_THROWS_AS(inject(bytes, FaultModel{1.5, 1}), ConfigError);
    }
}

TEST_CASE("storage layouts") {
    const QuantizedModel m = linear_model(1, true);

    SUBCASE("space overhead for 1024 weights") {
        CHECK(space_account(apply_strategy_store(m, Strategy::Faulty)).redundancy_bytes == 0);
        CHECK(space_account(apply_strategy_store(m, Strategy::ParityZero)).redundancy_bytes == 128);
        CHECK(space_account(apply_strategy_store(m, Strategy::StandardEcc)).redundancy_bytes == 128);
        CHECK(space_account(apply_strategy_store(m, Strategy::InPlace)).redundancy_bytes == 0);
        CHECK(space_account(apply_strategy_store(m, Strategy::StandardEcc)).overhead_pct() == 12.5);
        CHECK(space_account(apply_strategy_store(m, Strategy::InPlace)).weight_bytes == 1024);
    }

    SUBCASE("in-place on an unthrottled model") {
        const QuantizedModel raw = linear_model(1, false);
        REQUIRE(census(raw).large_count > 0);
        CHECK_THROWS_AS(apply_strategy_store(raw, Strategy::InPlace), ConstraintViolation);
        try {
            apply_strategy_store(raw, Strategy::InPlace);
        } catch (const ConstraintViolation& e) {
            CHECK(e.layer() == 1);
            const int v = raw.weights[1].values[e.index()];
            CHECK((v > 63 || v < -64));
            CHECK(e.index() % 8 != 7);
        }
        CHECK_NOTHROW(apply_strategy_store(raw, Strategy::StandardEcc));
    }

    SUBCASE("clean round trip") {
        for (const QuantizedModel& q : {m, conv_model(3)}) {
            for (Strategy s : kAll) {
                CAPTURE(to_string(s));
                const auto r = recover(apply_strategy_store(q, s));
                CHECK(r.model == q);
                CHECK(r.counters == RecoveryCounters{});
            }
        }
    }

    SUBCASE("parity helpers") {
        const std::vector<std::uint8_t> p{0x01, 0x03, 0x07, 0x00, 0xFF, 0x80, 0x01, 0x01, 0x01};
        const auto bits = parity_bits(p);
        REQUIRE(bits.size() == 2);
        CHECK(bits[0] == 0b11100101);
        CHECK(bits[1] == 0b00000001);
        const auto checks = ecc72_checks(std::vector<std::uint8_t>(16, 0));
        CHECK(checks == std::vector<std::uint8_t>(2, 0));
    }
}

TEST_CASE("fault address space") {
    const QuantizedModel m = linear_model(2, true);
    CHECK(fault_space_bits(apply_strategy_store(m, Strategy::Faulty), FaultScope::AllStoredBits) == 8192);
    CHECK(fault_space_bits(apply_strategy_store(m, Strategy::StandardEcc), FaultScope::AllStoredBits) == 8192 + 1024);
    CHECK(fault_space_bits(apply_strategy_store(m, Strategy::ParityZero), FaultScope::WeightBitsOnly) == 8192);
    CHECK(fault_space_bits(apply_strategy_store(m, Strategy::InPlace), FaultScope::AllStoredBits) == 8192);
    CHECK(parse_scope("all") == FaultScope::AllStoredBits);
    CHECK(parse_scope("weights") == FaultScope::WeightBitsOnly);
    CHECK_THROWS_AS(parse_scope("bias"), ConfigError);
}

TEST_CASE("single faults") {
    const QuantizedModel m = conv_model(5);

    SUBCASE("one flip per block is always repaired by the SEC-DED strategies") {
        for (Strategy s : {Strategy::StandardEcc, Strategy::InPlace}) {
            const ProtectedModel clean = apply_strategy_store(m, s);
            const std::uint64_t bits = fault_space_bits(clean, FaultScope::AllStoredBits);
            for (std::uint64_t b = 0; b < bits; ++b) {
                ProtectedModel p = clean;
                std::uint64_t off = b;
                for (auto& rec : p.records) {
                    if (!rec.holds_weights()) continue;
                    if (off < rec.payload.size() * 8) {
                        rec.payload[off / 8] ^= static_cast<std::uint8_t>(1U << (off % 8));
                        break;
                    }
                    off -= rec.payload.size() * 8;
                    if (off < rec.redundancy.size() * 8) {
                        rec.redundancy[off / 8] ^= static_cast<std::uint8_t>(1U << (off % 8));
                        break;
                    }
                    off -= rec.redundancy.size() * 8;
                }
                const auto r = recover(p);
                REQUIRE(r.model == m);
                CHECK(r.counters.corrected == 1);
            }
        }
    }

    SUBCASE("parity zeroes the faulty weight") {
        ProtectedModel p = apply_strategy_store(m, Strategy::ParityZero);
        std::size_t wr = 0;
        while (!p.records[wr].holds_weights()) ++wr;
        REQUIRE(m.weights[0].values[2] != 0);
        p.records[wr].payload[2] ^= 0x10;
        auto r = recover(p);
        CHECK(r.model.weights[0].values[2] == 0);
        CHECK(r.counters.detected_uncorrectable == 1);
        for (std::size_t i = 0; i < m.weights[0].values.size(); ++i) {
            if (i != 2) CHECK(r.model.weights[0].values[i] == m.weights[0].values[i]);
        }

        // An even number of flips in one byte passes unnoticed.
        p.records[wr].payload[2] ^= 0x10;
        p.records[wr].payload[2] ^= 0x03;
        r = recover(p);
        CHECK(r.counters.detected_uncorrectable == 0);
        CHECK(r.model.weights[0].values[2] == static_cast<std::int8_t>(m.weights[0].values[2] ^ 0x03));

        // A flip of the parity bit itself also zeroes the weight.
        p.records[wr].payload[2] ^= 0x03;
        p.records[wr].redundancy[0] ^= 0x04;
        r = recover(p);
        CHECK(r.model.weights[0].values[2] == 0);
    }
}

TEST_CASE("random injection") {
    const QuantizedModel m = conv_model(6);

    SUBCASE("rate zero recovers the clean model") {
        for (Strategy s : kAll) {
            ProtectedModel p = apply_strategy_store(m, s);
            CHECK(inject(p, FaultModel{0.0, 3}).empty());
            CHECK(recover(p).model == m);
        }
    }

    SUBCASE("exact recovery whenever no block takes two faults") {
        std::size_t exercised = 0;
        for (Strategy s : {Strategy::StandardEcc, Strategy::InPlace}) {
            const ProtectedModel clean = apply_strategy_store(m, s);
            for (std::uint64_t seed = 0; seed < 300; ++seed) {
                ProtectedModel p = clean;
                const FaultModel fm{2e-3, seed};
                const auto pos = inject(p, fm);
                const auto per_block = flips_per_block(p, fm.scope, pos);
                const auto worst = per_block.empty() ? 0U : *std::max_element(per_block.begin(), per_block.end());
                std::uint64_t total = 0;
                for (auto c : per_block) total += c;
                CHECK(total == pos.size());
                if (worst <= 1) {
                    ++exercised;
                    const auto r = recover(p);
                    CHECK(r.model == m);
                    CHECK(r.counters.corrected == pos.size());
                }
            }
        }
        CHECK(exercised > 100);
    }

    SUBCASE("injection is deterministic and respects scope") {
        ProtectedModel a = apply_strategy_store(m, Strategy::StandardEcc);
        ProtectedModel b = a;
        const ProtectedModel clean = a;
        inject(a, FaultModel{0.01, 4, FaultScope::WeightBitsOnly});
        inject(b, FaultModel{0.01, 4, FaultScope::WeightBitsOnly});
        CHECK(a == b);
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            CHECK(a.records[i].redundancy == clean.records[i].redundancy);
            if (!a.records[i].holds_weights()) CHECK(a.records[i] == clean.records[i]);
        }
    }
}

TEST_CASE("experiment") {
    const QuantizedModel m = conv_model(7);
    const Dataset test = random_dataset(70, 64);
    ExperimentConfig cfg;
    cfg.model_name = "tiny";
    cfg.rates = {0.0, 1e-2};
    cfg.trials = 3;
    const auto r = run_experiment(m, test, cfg);
    CHECK(r.trials.size() == 4 * 2 * 3);
    CHECK(r.aggregate.size() == 8);
    for (Strategy s : kAll) {
        const auto& c = r.cell(s, 0.0);
        CHECK(c.mean_drop == 0.0);
        CHECK(c.std_drop == 0.0);
        CHECK(c.trials == 3);
    }
    CHECK(r.cell(Strategy::StandardEcc, 1e-2).space_overhead_pct == 12.5);
    CHECK(r.cell(Strategy::InPlace, 1e-2).space_overhead_pct == 0.0);
    for (const auto& t : r.trials) {
        CHECK(t.seed == cfg.base_seed + t.trial);
        CHECK(t.drop == doctest::Approx(t.clean_accuracy - t.accuracy));
    }

    const auto again = run_experiment(m, test, cfg);
    std::ostringstream a, b, agg;
    write_trials_csv(a, r);
    write_trials_csv(b, again);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("model,strategy,scope,fault_rate,trial,seed,flips,corrected,detected_double,"
                        "detected_uncorrectable,accuracy,drop\n",
                        0) == 0);
    write_aggregate_csv(agg, r);
    CHECK(agg.str().rfind("strategy,rate,mean_drop,std_drop,space_overhead_pct\n", 0) == 0);

    ExperimentConfig bad = cfg;
    bad.trials = 0;
    CHECK_THROWS_AS(run_experiment(m, test, bad), ConfigError);
    CHECK_THROWS_AS(run_experiment(linear_model(1, false), random_dataset(1, 4), cfg), ConstraintViolation);
}
