// SPDX-License-Identifier: Apache-2.0
// zsecc command-line driver.
//
// Exit codes: 0 success, 1 usage error (bad flags or config), 2 runtime error.
// Failures print one line to stderr:
//   error: kind=<Kind> message=<text>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zsecc/error.hpp"
#include "zsecc/fault_lab.hpp"
#include "zsecc/model_file.hpp"
#include "zsecc/pipeline.hpp"
#include "zsecc/protection.hpp"
#include "zsecc/wot.hpp"

namespace fs = std::filesystem;
using namespace zsecc;

namespace {

struct Options {
    DataSource data;

    std::string in, out, float_out, log_out, histogram_out, trials_out, aggregate_out, out_dir;
    std::uint64_t model_seed = 1;
    FloatTrainConfig train;

    WotConfig wot;
    std::optional<double> target_pct;

    std::string strategy;
    std::vector<std::string> strategies{"faulty", "zero", "ecc", "in-place"};
    double rate = 0.0;
    std::vector<double> rates{1e-6, 1e-5, 1e-4, 1e-3};
    std::uint64_t seed = 0;
    std::string scope = "all";
    std::size_t trials = 10;
    std::uint64_t base_seed = 0;
    std::string model_name = "model";
};

void add_data_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--train-images", o.data.train_images, "IDX training images");
    cmd->add_option("--train-labels", o.data.train_labels, "IDX training labels");
    cmd->add_option("--test-images", o.data.test_images, "IDX test images");
    cmd->add_option("--test-labels", o.data.test_labels, "IDX test labels");
    cmd->add_option("--synthetic-seed", o.data.synthetic_seed, "seed of the synthetic dataset")
        ->capture_default_str();
    cmd->add_option("--train-count", o.data.train_count, "synthetic training samples")->capture_default_str();
    cmd->add_option("--test-count", o.data.test_count, "synthetic test samples")->capture_default_str();
    cmd->add_option("--classes", o.data.classes, "synthetic classes")->capture_default_str();
}

void add_train_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--model-seed", o.model_seed, "weight initialization seed")->capture_default_str();
    cmd->add_option("--epochs", o.train.epochs)->capture_default_str();
    cmd->add_option("--batch", o.train.batch_size)->capture_default_str();
    cmd->add_option("--lr", o.train.lr)->capture_default_str();
    cmd->add_option("--momentum", o.train.momentum)->capture_default_str();
    cmd->add_option("--lambda", o.train.lambda)->capture_default_str();
    cmd->add_option("--shuffle-seed", o.train.seed)->capture_default_str();
}

void add_wot_options(CLI::App* cmd, Options& o, const std::string& prefix) {
    cmd->add_option("--" + prefix + "lambda", o.wot.lambda)->capture_default_str();
    cmd->add_option("--" + prefix + "lr", o.wot.learning_rate)->capture_default_str();
    cmd->add_option("--" + prefix + "momentum", o.wot.momentum)->capture_default_str();
    cmd->add_option("--" + prefix + "batch", o.wot.batch_size)->capture_default_str();
    cmd->add_option("--" + prefix + "max-epochs", o.wot.max_epochs)->capture_default_str();
    cmd->add_option("--" + prefix + "eval-interval", o.wot.eval_interval)->capture_default_str();
    cmd->add_option("--" + prefix + "seed", o.wot.seed)->capture_default_str();
    cmd->add_option("--" + prefix + "tolerance-pp", o.wot.tolerance_pp)->capture_default_str();
}

void add_experiment_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--strategies", o.strategies, "strategies to compare")->delimiter(',')->capture_default_str();
    cmd->add_option("--rates", o.rates, "bit-flip rates")->delimiter(',')->capture_default_str();
    cmd->add_option("--trials", o.trials)->capture_default_str();
    cmd->add_option("--base-seed", o.base_seed, "trial t uses seed base-seed + t")->capture_default_str();
    cmd->add_option("--scope", o.scope, "all | weights")->capture_default_str();
    cmd->add_option("--model-name", o.model_name)->capture_default_str();
}

ExperimentConfig experiment_config(const Options& o) {
    ExperimentConfig c;
    c.model_name = o.model_name;
    c.strategies.clear();
    for (const auto& s : o.strategies) c.strategies.push_back(parse_strategy(s));
    c.rates = o.rates;
    c.trials = o.trials;
    c.base_seed = o.base_seed;
    c.scope = parse_scope(o.scope);
    c.validate();
    return c;
}

FloatModel load_float(const fs::path& p) { return from_checkpoint(load_model(p)); }

ProtectedModel load_stored(const fs::path& p) {
    ProtectedModel m = load_model(p);
    if (m.strategy == Strategy::Float) {
        throw FormatError(p.string() + " is a float checkpoint; run `quantize` first");
    }
    return m;
}

QuantizedModel load_quantized(const fs::path& p) { return recover(load_stored(p)).model; }

std::string csv_of(void (*writer)(std::ostream&, const ExperimentReport&), const ExperimentReport& r) {
    std::ostringstream os;
    writer(os, r);
    return os.str();
}

void write_histogram(const fs::path& p, const QuantizedModel& m) {
    std::ostringstream os;
    write_census_histogram(os, m);
    write_file_atomic(p, os.str());
}

void print_census(const Census& c) {
    std::printf("large_count=%llu\n", static_cast<unsigned long long>(c.large_count));
    for (std::size_t i = 0; i < c.histogram.size(); ++i) {
        std::printf("position%zu=%llu\n", i, static_cast<unsigned long long>(c.histogram[i]));
    }
}

void print_counters(const RecoveryCounters& c) {
    std::printf("corrected=%llu detected_double=%llu detected_uncorrectable=%llu\n",
                static_cast<unsigned long long>(c.corrected), static_cast<unsigned long long>(c.detected_double),
                static_cast<unsigned long long>(c.detected_uncorrectable));
}

int fail(const char* kind, const std::string& message, int code) {
    std::fprintf(stderr, "error: kind=%s message=%s\n", kind, message.c_str());
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zsecc: zero-space ECC for int8 network weights"};
    app.require_subcommand(1);
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
    Options o;

    auto* train = app.add_subcommand("train", "train the reference CNN in floating point");
    add_data_options(train, o);
    add_train_options(train, o);
    train->add_option("--out", o.out, "float checkpoint to write")->required();

    auto* quantize = app.add_subcommand("quantize", "quantize a float checkpoint to int8");
    add_data_options(quantize, o);
    quantize->add_option("--in", o.in, "float checkpoint")->required();
    quantize->add_option("--out", o.out, "quantized model to write")->required();

    auto* wot = app.add_subcommand("wot", "quantization-aware training with weight throttling");
    add_data_options(wot, o);
    add_wot_options(wot, o, "");
    wot->add_option("--in", o.in, "float checkpoint")->required();
    wot->add_option("--out", o.out, "throttled quantized model to write")->required();
    wot->add_option("--float-out", o.float_out, "float checkpoint of the shadow weights");
    wot->add_option("--log", o.log_out, "census log CSV");
    wot->add_option("--target", o.target_pct, "target accuracy in percent (default: int8 baseline)");

    auto* protect = app.add_subcommand("protect", "store a quantized model under a protection strategy");
    protect->add_option("--in", o.in, "quantized model")->required();
    protect->add_option("--strategy", o.strategy, "faulty | zero | ecc | in-place")->required();
    protect->add_option("--out", o.out, "protected model to write")->required();

    auto* inject = app.add_subcommand("inject", "flip random bits of a stored model");
    inject->add_option("--in", o.in, "protected model")->required();
    inject->add_option("--out", o.out, "faulty model to write")->required();
    inject->add_option("--rate", o.rate, "fraction of bits to flip")->required();
    inject->add_option("--seed", o.seed)->capture_default_str();
    inject->add_option("--scope", o.scope, "all | weights")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "decode a model and measure test accuracy");
    add_data_options(eval, o);
    eval->add_option("--in", o.in, "model file")->required();

    auto* census_cmd = app.add_subcommand("census", "count weights outside [-64, 63] by block position");
    census_cmd->add_option("--in", o.in, "model file")->required();
    census_cmd->add_option("--out", o.histogram_out, "histogram CSV");

    auto* report = app.add_subcommand("report", "fault-injection experiment over strategies and rates");
    add_data_options(report, o);
    add_experiment_options(report, o);
    report->add_option("--in", o.in, "throttled quantized model")->required();
    report->add_option("--trials-out", o.trials_out, "per-trial CSV");
    report->add_option("--aggregate-out", o.aggregate_out, "aggregate CSV")->required();
    report->add_option("--histogram-out", o.histogram_out, "large-weight histogram CSV");

    auto* pipeline = app.add_subcommand("pipeline", "train, quantize, wot, protect and report in one run");
    add_data_options(pipeline, o);
    add_train_options(pipeline, o);
    add_wot_options(pipeline, o, "wot-");
    add_experiment_options(pipeline, o);
    pipeline->add_option("--out-dir", o.out_dir, "directory for every artifact")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("UsageError", e.what(), 1);
    }

    try {
        if (*train) {
            const DataSplits data = load_data(o.data);
            FloatModel fm = make_reference_model(o.model_seed, data.train.classes);
            const auto losses = train_float(fm, data.train, o.train);
            save_model(to_checkpoint(fm), o.out);
            std::printf("final_loss=%.6f float_accuracy_pct=%.4f\n", losses.empty() ? 0.0 : losses.back(),
                        100.0 * evaluate_float(fm, data.test));
        } else if (*quantize) {
            const DataSplits data = load_data(o.data);
            const QuantizedModel qm = quantize_for_inference(load_float(o.in), data.train);
            save_model(qm, Strategy::Faulty, o.out);
            std::printf("int8_accuracy_pct=%.4f large_count=%llu\n", 100.0 * evaluate_int8(qm, data.test),
                        static_cast<unsigned long long>(census(qm).large_count));
        } else if (*wot) {
            const DataSplits data = load_data(o.data);
            const FloatModel fm = load_float(o.in);
            WotConfig cfg = o.wot;
            cfg.calibration_samples = kCalibrationSamples;
            cfg.target_accuracy = o.target_pct ? *o.target_pct / 100.0
                                               : evaluate_int8(quantize_for_inference(fm, data.train), data.test);
            const WotResult r = wot_train(fm, data.train, data.test, cfg);
            save_model(r.model, Strategy::Faulty, o.out);
            if (!o.float_out.empty()) save_model(to_checkpoint(r.float_model), o.float_out);
            if (!o.log_out.empty()) {
                std::ostringstream os;
                write_census_log(os, r.log);
                write_file_atomic(o.log_out, os.str());
            }
            if (!r.converged) {
                std::fprintf(stderr, "warning: kind=NonConvergence message=target %.4f%% not reached in %zu epochs\n",
                             100.0 * cfg.target_accuracy, cfg.max_epochs);
            }
            std::printf("converged=%d iterations=%zu target_pct=%.4f accuracy_pct=%.4f large_count=%llu\n",
                        r.converged ? 1 : 0, r.iterations, 100.0 * cfg.target_accuracy, 100.0 * r.accuracy,
                        static_cast<unsigned long long>(census(r.model).large_count));
        } else if (*protect) {
            const Strategy s = parse_strategy(o.strategy);
            const ProtectedModel p = apply_strategy_store(load_quantized(o.in), s);
            save_model(p, o.out);
            const SpaceAccount a = space_account(p);
            std::printf("strategy=%s weight_bytes=%llu redundancy_bytes=%llu overhead_pct=%.4f\n",
                        std::string(to_string(s)).c_str(), static_cast<unsigned long long>(a.weight_bytes),
                        static_cast<unsigned long long>(a.redundancy_bytes), a.overhead_pct());
        } else if (*inject) {
            ProtectedModel p = load_stored(o.in);
            const FaultModel fm{o.rate, o.seed, parse_scope(o.scope)};
            const auto pos = zsecc::inject(p, fm);
            save_model(p, o.out);
            std::printf("bits=%llu flips=%zu\n",
                        static_cast<unsigned long long>(fault_space_bits(p, fm.scope)), pos.size());
        } else if (*eval) {
            const DataSplits data = load_data(o.data);
            const ProtectedModel p = load_model(o.in);
            if (p.strategy == Strategy::Float) {
                std::printf("float_accuracy_pct=%.4f\n", 100.0 * evaluate_float(from_checkpoint(p), data.test));
            } else {
                const Recovered r = recover(p);
                std::printf("strategy=%s accuracy_pct=%.4f ", std::string(to_string(p.strategy)).c_str(),
                            100.0 * evaluate_int8(r.model, data.test));
                print_counters(r.counters);
            }
        } else if (*census_cmd) {
            const QuantizedModel m = load_quantized(o.in);
            print_census(census(m));
            if (!o.histogram_out.empty()) write_histogram(o.histogram_out, m);
        } else if (*report) {
            const ExperimentConfig cfg = experiment_config(o);
            const DataSplits data = load_data(o.data);
            const QuantizedModel m = load_quantized(o.in);
            const ExperimentReport r = run_experiment(m, data.test, cfg);
            write_file_atomic(o.aggregate_out, csv_of(write_aggregate_csv, r));
            if (!o.trials_out.empty()) write_file_atomic(o.trials_out, csv_of(write_trials_csv, r));
            if (!o.histogram_out.empty()) write_histogram(o.histogram_out, m);
            std::printf("clean_accuracy_pct=%.4f cells=%zu\n", r.clean_accuracy, r.aggregate.size());
        } else if (*pipeline) {
            PipelineConfig cfg;
            cfg.data = o.data;
            cfg.model_seed = o.model_seed;
            cfg.train = o.train;
            cfg.wot = o.wot;
            cfg.experiment = experiment_config(o);
            const PipelineSummary s = run_pipeline(cfg, o.out_dir);
            if (!s.wot_converged) {
                std::fprintf(stderr, "warning: kind=NonConvergence message=throttled model below the int8 baseline\n");
            }
            std::printf("float_accuracy_pct=%.4f baseline_pct=%.4f wot_pct=%.4f converged=%d "
                        "large_before=%llu large_after=%llu\n",
                        100.0 * s.float_accuracy, 100.0 * s.baseline_accuracy, 100.0 * s.wot_accuracy,
                        s.wot_converged ? 1 : 0, static_cast<unsigned long long>(s.census_before.large_count),
                        static_cast<unsigned long long>(s.census_after.large_count));
        }
    } catch (const ConfigError& e) {
        return fail(e.kind(), e.what(), 1);
    } catch (const Error& e) {
        return fail(e.kind(), e.what(), 2);
    } catch (const std::exception& e) {
        return fail("InternalError", e.what(), 2);
    }
    return 0;
}
