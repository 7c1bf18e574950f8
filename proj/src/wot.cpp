// SPDX-License-Identifier: Apache-2.0
#include "zsecc/wot.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "zsecc/error.hpp"
#include "zsecc/inplace_codec.hpp"
#include "zsecc/rng.hpp"

namespace zsecc {

void WotConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("wot: lambda must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("wot: learning rate must be > 0");
    if (target_accuracy < 0.0 || target_accuracy > 1.0) throw ConfigError("wot: target accuracy must be in [0, 1]");
    if (batch_size == 0) throw ConfigError("wot: batch size must be > 0");
    if (eval_interval == 0) throw ConfigError("wot: evaluation interval must be > 0");
}

Census& Census::operator+=(const Census& o) {
    large_count += o.large_count;
    for (std::size_t i = 0; i < histogram.size(); ++i) histogram[i] += o.histogram[i];
    return *this;
}

Census census(const QuantizedTensor& t) {
    Census c;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        if (has_noninformative_bit(t.values[i])) continue;
        const std::size_t pos = i % kBlockWeights;
        ++c.histogram[pos];
        if (pos != kBlockWeights - 1) ++c.large_count;
    }
    return c;
}

Census census(std::span<const QuantizedTensor> weights) {
    Census c;
    for (const auto& w : weights) c += census(w);
    return c;
}

Census census(const QuantizedModel& m) { return census(std::span<const QuantizedTensor>(m.weights)); }

QuantizedTensor throttle(const QuantizedTensor& q) {
    QuantizedTensor out = q;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        if (i % kBlockWeights == kBlockWeights - 1) continue;
        out.values[i] = std::clamp<std::int8_t>(out.values[i], -64, 63);
    }
    return out;
}

std::vector<double> sync_float_from_throttle(std::span<const double> weights, const QuantizedTensor& pre,
                                             const QuantizedTensor& post, double scale) {
    if (weights.size() != pre.values.size() || pre.values.size() != post.values.size()) {
        throw ArgumentError("sync_float_from_throttle: tensors are not aligned");
    }
    std::vector<double> out(weights.begin(), weights.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (pre.values[i] != post.values[i]) out[i] = post.values[i] * scale;
    }
    return out;
}

namespace {

std::vector<QuantizedTensor> throttle_all(std::vector<QuantizedTensor> q) {
    for (auto& t : q) t = throttle(t);
    return q;
}

}  // namespace

WotResult wot_train(FloatModel model, const Dataset& train, const Dataset& test, const WotConfig& cfg) {
    cfg.validate();
    if (train.size() == 0) throw ArgumentError("wot_train: empty training set");
    const auto calib = first_indices(train, cfg.calibration_samples);
    const double goal = cfg.target_accuracy - cfg.tolerance_pp / 100.0;

    WotResult best;
    best.accuracy = -1.0;
    std::vector<CensusRecord> log;
    std::size_t iteration = 0;

    // Returns true once the post-throttle accuracy reaches the goal.
    auto checkpoint = [&]() {
        std::vector<QuantizedTensor> q = quantize_weights(model);
        CensusRecord rec;
        rec.iteration = iteration;
        rec.large_count = census(std::span<const QuantizedTensor>(q)).large_count;
        rec.acc_before_throttle = evaluate_int8(assemble_quantized(model, q, train, calib), test);
        QuantizedModel after = assemble_quantized(model, throttle_all(std::move(q)), train, calib);
        rec.acc_after_throttle = evaluate_int8(after, test);
        log.push_back(rec);
        const bool hit = rec.acc_after_throttle >= goal;
        if (hit || rec.acc_after_throttle > best.accuracy) {
            best.float_model = model;
            best.model = std::move(after);
            best.accuracy = rec.acc_after_throttle;
            best.iterations = iteration;
        }
        return hit;
    };

    bool reached = checkpoint();
    SgdMomentum opt(model, cfg.learning_rate, cfg.momentum);
    const CounterRng root(cfg.seed);
    std::vector<std::size_t> order(train.size());
    Gradients grads;
    const LossOptions loss_opt{cfg.lambda, true};

    for (std::size_t epoch = 0; epoch < cfg.max_epochs && !reached; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        CounterRng rng = root.split(epoch);
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t b = 0; b < order.size() && !reached; b += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), b + cfg.batch_size);
            forward_backward_float(model, train, std::span(order).subspan(b, end - b), loss_opt, &grads);
            opt.step(model, grads);
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                if (!model.layers[l].has_params()) continue;
                const QuantizedTensor pre = quantize(model.weights[l], model.layers[l].weight_shape());
                const QuantizedTensor post = throttle(pre);
                model.weights[l] = sync_float_from_throttle(model.weights[l], pre, post, pre.scale);
            }
            ++iteration;
            if (iteration % cfg.eval_interval == 0) reached = checkpoint();
        }
    }
    if (!reached && (log.empty() || log.back().iteration != iteration)) reached = checkpoint();

    best.converged = reached;
    best.log = std::move(log);
    return best;
}

void write_census_log(std::ostream& os, std::span<const CensusRecord> log) {
    os << "iteration,large_count,acc_before_throttle,acc_after_throttle\n";
    char buf[160];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof buf, "%zu,%llu,%.6f,%.6f\n", r.iteration,
                      static_cast<unsigned long long>(r.large_count), r.acc_before_throttle, r.acc_after_throttle);
        os << buf;
    }
}

void write_census_histogram(std::ostream& os, const QuantizedModel& m) {
    os << "layer,position,large_count\n";
    Census total;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        if (!m.layers[l].has_params()) continue;
        const Census c = census(m.weights[l]);
        total += c;
        for (std::size_t p = 0; p < c.histogram.size(); ++p) os << l << ',' << p << ',' << c.histogram[p] << '\n';
    }
    for (std::size_t p = 0; p < total.histogram.size(); ++p) {
        os << "total," << p << ',' << total.histogram[p] << '\n';
    }
}

}  // namespace zsecc
