// SPDX-License-Identifier: Apache-2.0
#include "zsecc/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "zsecc/model_file.hpp"

namespace zsecc {

DataSplits load_data(const DataSource& src) {
    DataSplits d;
    if (!src.train_images.empty() && !src.train_labels.empty()) {
        d.train = load_idx(src.train_images, src.train_labels, Split::Train);
    } else {
        d.train = generate_synthetic(src.synthetic_seed, src.classes, src.train_count, Split::Train);
    }
    if (!src.test_images.empty() && !src.test_labels.empty()) {
        d.test = load_idx(src.test_images, src.test_labels, Split::Test);
    } else {
        d.test = generate_synthetic(src.synthetic_seed, src.classes, src.test_count, Split::Test);
    }
    d.test.classes = d.train.classes = std::max(d.train.classes, d.test.classes);
    return d;
}

QuantizedModel quantize_for_inference(const FloatModel& m, const Dataset& train) {
    return quantize_model(m, train, first_indices(train, kCalibrationSamples));
}

PipelineSummary run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const DataSplits data = load_data(cfg.data);
    PipelineSummary sum;

    FloatModel fm = make_reference_model(cfg.model_seed, data.train.classes);
    train_float(fm, data.train, cfg.train);
    save_model(to_checkpoint(fm), out_dir / "float.zsec");
    sum.float_accuracy = evaluate_float(fm, data.test);

    const QuantizedModel base = quantize_for_inference(fm, data.train);
    save_model(base, Strategy::Faulty, out_dir / "quantized.zsec");
    sum.baseline_accuracy = evaluate_int8(base, data.test);
    sum.census_before = census(base);

    WotConfig wcfg = cfg.wot;
    wcfg.target_accuracy = sum.baseline_accuracy;
    wcfg.calibration_samples = kCalibrationSamples;
    const WotResult wot = wot_train(fm, data.train, data.test, wcfg);
    save_model(wot.model, Strategy::Faulty, out_dir / "wot.zsec");
    sum.wot_accuracy = wot.accuracy;
    sum.wot_converged = wot.converged;
    sum.census_after = census(wot.model);

    std::ostringstream log;
    write_census_log(log, wot.log);
    write_file_atomic(out_dir / "census_log.csv", log.str());
    std::ostringstream hist;
    write_census_histogram(hist, base);
    write_file_atomic(out_dir / "histogram.csv", hist.str());

    for (Strategy s : cfg.experiment.strategies) {
        save_model(wot.model, s, out_dir / ("protected-" + std::string(to_string(s)) + ".zsec"));
    }

    const ExperimentReport rep = run_experiment(wot.model, data.test, cfg.experiment);
    std::ostringstream trials, agg;
    write_trials_csv(trials, rep);
    write_aggregate_csv(agg, rep);
    write_file_atomic(out_dir / "trials.csv", trials.str());
    write_file_atomic(out_dir / "aggregate.csv", agg.str());
    return sum;
}

}  // namespace zsecc
