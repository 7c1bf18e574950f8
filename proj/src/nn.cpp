// SPDX-License-Identifier: Apache-2.0
#include "zsecc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "zsecc/error.hpp"
#include "zsecc/rng.hpp"

namespace zsecc {

LayerSpec LayerSpec::conv2d(std::uint32_t filters, std::uint32_t channels, std::uint32_t kh, std::uint32_t kw,
                            std::uint32_t stride, std::uint32_t padding) {
    return {LayerKind::Conv2D, {filters, channels, kh, kw}, stride, padding};
}
LayerSpec LayerSpec::linear(std::uint32_t out, std::uint32_t in) { return {LayerKind::Linear, {out, in, 1, 1}, 1, 0}; }
LayerSpec LayerSpec::relu() { return {LayerKind::ReLU, {0, 0, 0, 0}, 1, 0}; }
LayerSpec LayerSpec::maxpool(std::uint32_t kernel, std::uint32_t stride) {
    return {LayerKind::MaxPool2D, {1, 1, kernel, kernel}, stride, 0};
}
LayerSpec LayerSpec::flatten() { return {LayerKind::Flatten, {0, 0, 0, 0}, 1, 0}; }

namespace {

constexpr std::size_t kMaxFanIn = std::size_t{1} << 17;

// Output indices o with 0 <= o*stride + k - pad < in_size, as [lo, hi).
std::pair<int, int> valid_range(int k, int pad, int stride, int in_size, int out_size) {
    const int a = pad - k;
    const int lo = a <= 0 ? 0 : (a + stride - 1) / stride;
    const int b = in_size - 1 + pad - k;
    const int hi = b < 0 ? 0 : std::min(out_size, b / stride + 1);
    return {lo, std::max(lo, hi)};
}

// y must hold the bias-initialized output.
template <class In, class Wt, class Acc>
void conv_forward(const LayerSpec& L, const FeatureShape& in, const FeatureShape& out, const In* x, const Wt* w,
                  Acc* y) {
    const int C = static_cast<int>(L.dims[1]), KH = static_cast<int>(L.dims[2]), KW = static_cast<int>(L.dims[3]);
    const int S = static_cast<int>(L.stride), P = static_cast<int>(L.padding);
    const int H = static_cast<int>(in.h), W = static_cast<int>(in.w);
    const int Ho = static_cast<int>(out.h), Wo = static_cast<int>(out.w);
    for (int n = 0; n < static_cast<int>(out.c); ++n) {
        Acc* yn = y + static_cast<std::size_t>(n) * Ho * Wo;
        for (int c = 0; c < C; ++c) {
            const In* xc = x + static_cast<std::size_t>(c) * H * W;
            for (int ky = 0; ky < KH; ++ky) {
                const auto [oy0, oy1] = valid_range(ky, P, S, H, Ho);
                for (int kx = 0; kx < KW; ++kx) {
                    const auto [ox0, ox1] = valid_range(kx, P, S, W, Wo);
                    const Acc wv = w[((static_cast<std::size_t>(n) * C + c) * KH + ky) * KW + kx];
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const std::ptrdiff_t row = std::ptrdiff_t{oy * S + ky - P} * W + (kx - P);
                        Acc* yr = yn + static_cast<std::size_t>(oy) * Wo;
                        for (int ox = ox0; ox < ox1; ++ox) yr[ox] += wv * static_cast<Acc>(xc[row + ox * S]);
                    }
                }
            }
        }
    }
}

void conv_backward(const LayerSpec& L, const FeatureShape& in, const FeatureShape& out, const double* x,
                   const double* w, const double* dy, double* dx, double* dw, double* db) {
    const int C = static_cast<int>(L.dims[1]), KH = static_cast<int>(L.dims[2]), KW = static_cast<int>(L.dims[3]);
    const int S = static_cast<int>(L.stride), P = static_cast<int>(L.padding);
    const int H = static_cast<int>(in.h), W = static_cast<int>(in.w);
    const int Ho = static_cast<int>(out.h), Wo = static_cast<int>(out.w);
    for (int n = 0; n < static_cast<int>(out.c); ++n) {
        const double* dyn = dy + static_cast<std::size_t>(n) * Ho * Wo;
        double bsum = 0.0;
        for (int i = 0; i < Ho * Wo; ++i) bsum += dyn[i];
        db[n] += bsum;
        for (int c = 0; c < C; ++c) {
            const double* xc = x + static_cast<std::size_t>(c) * H * W;
            double* dxc = dx ? dx + static_cast<std::size_t>(c) * H * W : nullptr;
            for (int ky = 0; ky < KH; ++ky) {
                const auto [oy0, oy1] = valid_range(ky, P, S, H, Ho);
                for (int kx = 0; kx < KW; ++kx) {
                    const auto [ox0, ox1] = valid_range(kx, P, S, W, Wo);
                    const std::size_t widx = ((static_cast<std::size_t>(n) * C + c) * KH + ky) * KW + kx;
                    const double wv = w[widx];
                    double gw = 0.0;
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const std::ptrdiff_t row = std::ptrdiff_t{oy * S + ky - P} * W + (kx - P);
                        const double* dyr = dyn + static_cast<std::size_t>(oy) * Wo;
                        for (int ox = ox0; ox < ox1; ++ox) gw += xc[row + ox * S] * dyr[ox];
                        if (dxc) {
                            for (int ox = ox0; ox < ox1; ++ox) dxc[row + ox * S] += wv * dyr[ox];
                        }
                    }
                    dw[widx] += gw;
                }
            }
        }
    }
}

template <class Wt, class In, class Acc>
void linear_forward(const LayerSpec& L, const In* x, const Wt* w, Acc* y) {
    const std::size_t out = L.dims[0], in = L.dims[1];
    for (std::size_t o = 0; o < out; ++o) {
        const Wt* wr = w + o * in;
        Acc acc = y[o];
        for (std::size_t i = 0; i < in; ++i) acc += static_cast<Acc>(wr[i]) * static_cast<Acc>(x[i]);
        y[o] = acc;
    }
}

// Writes pooled values; `arg` (optional) receives the input index of each max.
template <class T>
void maxpool_forward(const LayerSpec& L, const FeatureShape& in, const FeatureShape& out, const T* x, T* y,
                     std::uint32_t* arg) {
    const std::uint32_t K = L.dims[2], S = L.stride;
    for (std::uint32_t c = 0; c < out.c; ++c) {
        for (std::uint32_t oy = 0; oy < out.h; ++oy) {
            for (std::uint32_t ox = 0; ox < out.w; ++ox) {
                std::uint32_t best = (c * in.h + oy * S) * in.w + ox * S;
                for (std::uint32_t ky = 0; ky < K; ++ky) {
                    for (std::uint32_t kx = 0; kx < K; ++kx) {
                        const std::uint32_t idx = (c * in.h + oy * S + ky) * in.w + ox * S + kx;
                        if (x[idx] > x[best]) best = idx;
                    }
                }
                const std::size_t o = (std::size_t{c} * out.h + oy) * out.w + ox;
                y[o] = x[best];
                if (arg) arg[o] = best;
            }
        }
    }
}

std::vector<double> load_input(const Dataset& ds, std::size_t i) {
    const auto img = ds.image(i);
    std::vector<double> x(img.size());
    for (std::size_t j = 0; j < img.size(); ++j) x[j] = pixel_to_real(img[j]);
    return x;
}

// Forward pass keeping every intermediate activation (acts[l] is the input of
// layer l) and max-pool argmax tables for the backward pass.
struct FloatTrace {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<std::uint32_t>> pool_arg;
};

void forward_trace(const FloatModel& m, std::span<const FeatureShape> shapes,
                   std::span<const std::vector<double>* const> weights, std::vector<double> input, FloatTrace& t,
                   std::vector<double>* pre_act_max = nullptr) {
    const std::size_t nl = m.layers.size();
    t.acts.resize(nl + 1);
    t.pool_arg.resize(nl);
    t.acts[0] = std::move(input);
    FeatureShape in = m.input;
    for (std::size_t l = 0; l < nl; ++l) {
        const LayerSpec& L = m.layers[l];
        const FeatureShape& out = shapes[l];
        const std::vector<double>& x = t.acts[l];
        std::vector<double>& y = t.acts[l + 1];
        switch (L.kind) {
            case LayerKind::Conv2D: {
                y.assign(out.count(), 0.0);
                const std::size_t hw = std::size_t{out.h} * out.w;
                for (std::size_t n = 0; n < out.c; ++n) std::fill_n(y.begin() + n * hw, hw, m.biases[l][n]);
                conv_forward(L, in, out, x.data(), weights[l]->data(), y.data());
                break;
            }
            case LayerKind::Linear:
                y = m.biases[l];
                linear_forward(L, x.data(), weights[l]->data(), y.data());
                break;
            case LayerKind::ReLU:
                y.resize(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
                break;
            case LayerKind::MaxPool2D:
                y.resize(out.count());
                t.pool_arg[l].resize(out.count());
                maxpool_forward(L, in, out, x.data(), y.data(), t.pool_arg[l].data());
                break;
            case LayerKind::Flatten:
                y = x;
                break;
        }
        if (pre_act_max && L.has_params()) {
            double mx = (*pre_act_max)[l];
            for (double v : y) mx = std::max(mx, std::fabs(v));
            (*pre_act_max)[l] = mx;
        }
        in = out;
    }
}

std::vector<const std::vector<double>*> weight_ptrs(const FloatModel& m) {
    std::vector<const std::vector<double>*> p;
    for (const auto& w : m.weights) p.push_back(&w);
    return p;
}

}  // namespace

std::vector<FeatureShape> infer_shapes(const FeatureShape& input, std::span<const LayerSpec> layers) {
    std::vector<FeatureShape> shapes;
    FeatureShape cur = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerSpec& L = layers[l];
        const std::string where = "layer " + std::to_string(l) + ": ";
        switch (L.kind) {
            case LayerKind::Conv2D: {
                const auto [N, C, KH, KW] = L.dims;
                if (N == 0 || C == 0 || KH == 0 || KW == 0 || L.stride == 0) {
                    throw ArgumentError(where + "conv dims must be positive");
                }
                if (C != cur.c) throw ArgumentError(where + "conv expects " + std::to_string(C) + " channels, got " +
                                                    std::to_string(cur.c));
                if (cur.h + 2 * L.padding < KH || cur.w + 2 * L.padding < KW) {
                    throw ArgumentError(where + "conv kernel larger than padded input");
                }
                if (std::size_t{C} * KH * KW > kMaxFanIn) throw ArgumentError(where + "fan-in exceeds 2^17");
                cur = {N, (cur.h + 2 * L.padding - KH) / L.stride + 1, (cur.w + 2 * L.padding - KW) / L.stride + 1};
                break;
            }
            case LayerKind::Linear:
                if (L.dims[0] == 0 || L.dims[1] == 0) throw ArgumentError(where + "linear dims must be positive");
                if (L.dims[1] != cur.count()) {
                    throw ArgumentError(where + "linear expects " + std::to_string(L.dims[1]) + " inputs, got " +
                                        std::to_string(cur.count()));
                }
                if (L.dims[1] > kMaxFanIn) throw ArgumentError(where + "fan-in exceeds 2^17");
                cur = {L.dims[0], 1, 1};
                break;
            case LayerKind::ReLU:
                break;
            case LayerKind::MaxPool2D: {
                const std::uint32_t K = L.dims[2];
                if (K == 0 || L.stride == 0 || K > cur.h || K > cur.w) {
                    throw ArgumentError(where + "invalid max-pool window");
                }
                cur = {cur.c, (cur.h - K) / L.stride + 1, (cur.w - K) / L.stride + 1};
                break;
            }
            case LayerKind::Flatten:
                cur = {static_cast<std::uint32_t>(cur.count()), 1, 1};
                break;
            default:
                throw ArgumentError(where + "unknown layer kind");
        }
        shapes.push_back(cur);
    }
    return shapes;
}

FloatModel make_model(const FeatureShape& input, std::vector<LayerSpec> layers, std::uint64_t seed) {
    infer_shapes(input, layers);
    FloatModel m;
    m.input = input;
    m.layers = std::move(layers);
    m.weights.resize(m.layers.size());
    m.biases.resize(m.layers.size());
    const CounterRng root(seed);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const LayerSpec& L = m.layers[l];
        if (!L.has_params()) continue;
        CounterRng rng = root.split(l);
        const double fan_in = static_cast<double>(L.weight_count() / L.dims[0]);
        const double std_dev = std::sqrt(2.0 / fan_in);
        m.weights[l].resize(L.weight_count());
        for (auto& w : m.weights[l]) w = std_dev * rng.normal();
        m.biases[l].assign(L.bias_count(), 0.0);
    }
    return m;
}

FloatModel make_reference_model(std::uint64_t seed, std::uint32_t classes) {
    return make_model({1, 28, 28},
                      {LayerSpec::conv2d(8, 1, 3, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2),
                       LayerSpec::conv2d(16, 8, 3, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2),
                       LayerSpec::flatten(), LayerSpec::linear(classes, 16 * 7 * 7)},
                      seed);
}

std::vector<QuantizedTensor> quantize_weights(const FloatModel& fm) {
    std::vector<QuantizedTensor> q(fm.layers.size());
    for (std::size_t l = 0; l < fm.layers.size(); ++l) {
        if (fm.layers[l].has_params()) q[l] = quantize(fm.weights[l], fm.layers[l].weight_shape());
    }
    return q;
}

QuantizedModel assemble_quantized(const FloatModel& fm, std::vector<QuantizedTensor> weights, const Dataset& calib,
                                  std::span<const std::size_t> calib_indices) {
    if (weights.size() != fm.layers.size()) throw ArgumentError("assemble_quantized: weight list size mismatch");
    const auto shapes = infer_shapes(fm.input, fm.layers);

    std::vector<std::vector<double>> deq(fm.layers.size());
    for (std::size_t l = 0; l < fm.layers.size(); ++l) {
        if (!fm.layers[l].has_params()) continue;
        if (weights[l].values.size() != fm.layers[l].weight_count()) {
            throw ArgumentError("assemble_quantized: layer " + std::to_string(l) + " weight count mismatch");
        }
        deq[l] = dequantize(weights[l]);
    }
    std::vector<const std::vector<double>*> wp;
    for (const auto& d : deq) wp.push_back(&d);

    std::uint8_t max_pixel = 0;
    std::vector<double> pre_max(fm.layers.size(), 0.0);
    FloatTrace trace;
    for (std::size_t i : calib_indices) {
        for (auto p : calib.image(i)) max_pixel = std::max(max_pixel, p);
        forward_trace(fm, shapes, wp, load_input(calib, i), trace, &pre_max);
    }

    QuantizedModel qm;
    qm.input = fm.input;
    qm.layers = fm.layers;
    qm.input_scale = max_pixel > 0 ? pixel_to_real(max_pixel) / quant_max(8) : 1.0;
    qm.weights = std::move(weights);
    qm.biases.resize(fm.layers.size());
    qm.out_scales.assign(fm.layers.size(), 0.0);
    double act_scale = qm.input_scale;
    for (std::size_t l = 0; l < fm.layers.size(); ++l) {
        if (!fm.layers[l].has_params()) continue;
        qm.biases[l] = quantize_bias(fm.biases[l], qm.weights[l].scale * act_scale);
        qm.out_scales[l] = pre_max[l] > 0.0 ? pre_max[l] / quant_max(8) : 1.0;
        act_scale = qm.out_scales[l];
    }
    return qm;
}

QuantizedModel quantize_model(const FloatModel& fm, const Dataset& calib, std::span<const std::size_t> calib_indices) {
    return assemble_quantized(fm, quantize_weights(fm), calib, calib_indices);
}

Int8Output forward_int8(const QuantizedModel& m, std::span<const std::uint8_t> image) {
    const auto shapes = infer_shapes(m.input, m.layers);
    if (m.layers.empty() || !m.layers.back().has_params()) {
        throw ArgumentError("forward_int8: the last layer must be Conv2D or Linear");
    }
    if (image.size() != m.input.count()) {
        throw ArgumentError("forward_int8: expected " + std::to_string(m.input.count()) + " input values, got " +
                            std::to_string(image.size()));
    }

    std::vector<std::int8_t> cur(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) cur[i] = quantize_value(pixel_to_real(image[i]), m.input_scale);
    double act_scale = m.input_scale;
    FeatureShape in = m.input;
    std::vector<std::int8_t> next;
    std::vector<std::int32_t> acc;

    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const LayerSpec& L = m.layers[l];
        const FeatureShape& out = shapes[l];
        switch (L.kind) {
            case LayerKind::Conv2D:
            case LayerKind::Linear: {
                const auto& w = m.weights[l];
                const auto& b = m.biases[l];
                if (w.values.size() != L.weight_count() || b.values.size() != L.bias_count()) {
                    throw ArgumentError("forward_int8: layer " + std::to_string(l) + " parameter size mismatch");
                }
                acc.assign(out.count(), 0);
                if (L.kind == LayerKind::Conv2D) {
                    const std::size_t hw = std::size_t{out.h} * out.w;
                    for (std::size_t n = 0; n < out.c; ++n) std::fill_n(acc.begin() + n * hw, hw, b.values[n]);
                    conv_forward(L, in, out, cur.data(), w.values.data(), acc.data());
                } else {
                    std::copy(b.values.begin(), b.values.end(), acc.begin());
                    linear_forward(L, cur.data(), w.values.data(), acc.data());
                }
                const double acc_scale = w.scale * act_scale;
                if (l + 1 == m.layers.size()) {
                    Int8Output res;
                    res.accumulators = acc;
                    res.logits.resize(acc.size());
                    for (std::size_t i = 0; i < acc.size(); ++i) res.logits[i] = acc[i] * acc_scale;
                    return res;
                }
                const double mult = acc_scale / m.out_scales[l];
                next.resize(acc.size());
                for (std::size_t i = 0; i < acc.size(); ++i) {
                    next[i] = static_cast<std::int8_t>(std::clamp(std::round(acc[i] * mult), -127.0, 127.0));
                }
                cur.swap(next);
                act_scale = m.out_scales[l];
                break;
            }
            case LayerKind::ReLU:
                for (auto& v : cur) v = std::max<std::int8_t>(v, 0);
                break;
            case LayerKind::MaxPool2D:
                next.resize(out.count());
                maxpool_forward<std::int8_t>(L, in, out, cur.data(), next.data(), nullptr);
                cur.swap(next);
                break;
            case LayerKind::Flatten:
                break;
        }
        in = out;
    }
    return {};  // unreachable: last layer checked above
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double evaluate_int8(const QuantizedModel& m, const Dataset& ds) {
    if (ds.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Int8Output out = forward_int8(m, ds.image(i));
        if (argmax(out.logits) == ds.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

std::vector<double> forward_float(const FloatModel& m, std::span<const double> input) {
    const auto shapes = infer_shapes(m.input, m.layers);
    if (input.size() != m.input.count()) throw ArgumentError("forward_float: input size mismatch");
    FloatTrace t;
    const auto wp = weight_ptrs(m);
    forward_trace(m, shapes, wp, {input.begin(), input.end()}, t);
    return t.acts.back();
}

double evaluate_float(const FloatModel& m, const Dataset& ds) {
    if (ds.size() == 0) return 0.0;
    const auto shapes = infer_shapes(m.input, m.layers);
    const auto wp = weight_ptrs(m);
    FloatTrace t;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        forward_trace(m, shapes, wp, load_input(ds, i), t);
        if (argmax(t.acts.back()) == ds.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

Gradients zero_gradients(const FloatModel& m) {
    Gradients g;
    g.weights.resize(m.layers.size());
    g.biases.resize(m.layers.size());
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        g.weights[l].assign(m.weights[l].size(), 0.0);
        g.biases[l].assign(m.biases[l].size(), 0.0);
    }
    return g;
}

LossResult forward_backward_float(const FloatModel& m, const Dataset& ds, std::span<const std::size_t> batch,
                                  const LossOptions& opt, Gradients* grads) {
    if (batch.empty()) throw ArgumentError("forward_backward_float: empty batch");
    const auto shapes = infer_shapes(m.input, m.layers);
    const std::size_t nl = m.layers.size();

    std::vector<std::vector<double>> fq(nl);
    std::vector<const std::vector<double>*> wp(nl);
    for (std::size_t l = 0; l < nl; ++l) {
        if (opt.fake_quant && m.layers[l].has_params()) {
            fq[l] = dequantize(quantize(m.weights[l], m.layers[l].weight_shape()));
            wp[l] = &fq[l];
        } else {
            wp[l] = &m.weights[l];
        }
    }

    LossResult res;
    for (std::size_t l = 0; l < nl; ++l) {
        for (double w : *wp[l]) res.regularization += w * w;
    }
    res.regularization *= opt.lambda;

    if (grads) *grads = zero_gradients(m);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    FloatTrace t;
    std::vector<double> dy, dx;
    for (std::size_t idx : batch) {
        forward_trace(m, shapes, wp, load_input(ds, idx), t);
        const std::vector<double>& logits = t.acts.back();
        const std::size_t label = ds.labels[idx];
        if (label >= logits.size()) throw ArgumentError("forward_backward_float: label out of range");
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double v : logits) z += std::exp(v - mx);
        res.cross_entropy += (std::log(z) + mx - logits[label]) * inv_b;
        if (!grads) continue;

        dy.resize(logits.size());
        for (std::size_t j = 0; j < logits.size(); ++j) {
            dy[j] = (std::exp(logits[j] - mx) / z - (j == label ? 1.0 : 0.0)) * inv_b;
        }
        for (std::size_t l = nl; l-- > 0;) {
            const LayerSpec& L = m.layers[l];
            const FeatureShape in = l == 0 ? m.input : shapes[l - 1];
            const std::vector<double>& x = t.acts[l];
            const bool need_dx = l > 0;
            switch (L.kind) {
                case LayerKind::Conv2D:
                    dx.assign(need_dx ? x.size() : 0, 0.0);
                    conv_backward(L, in, shapes[l], x.data(), wp[l]->data(), dy.data(), need_dx ? dx.data() : nullptr,
                                  grads->weights[l].data(), grads->biases[l].data());
                    break;
                case LayerKind::Linear: {
                    const std::size_t out = L.dims[0], nin = L.dims[1];
                    const double* w = wp[l]->data();
                    double* gw = grads->weights[l].data();
                    dx.assign(need_dx ? nin : 0, 0.0);
                    for (std::size_t o = 0; o < out; ++o) {
                        const double g = dy[o];
                        grads->biases[l][o] += g;
                        double* gwr = gw + o * nin;
                        for (std::size_t i = 0; i < nin; ++i) gwr[i] += g * x[i];
                        if (need_dx) {
                            const double* wr = w + o * nin;
                            for (std::size_t i = 0; i < nin; ++i) dx[i] += g * wr[i];
                        }
                    }
                    break;
                }
                case LayerKind::ReLU:
                    dx.resize(x.size());
                    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
                    break;
                case LayerKind::MaxPool2D:
                    dx.assign(x.size(), 0.0);
                    for (std::size_t o = 0; o < dy.size(); ++o) dx[t.pool_arg[l][o]] += dy[o];
                    break;
                case LayerKind::Flatten:
                    dx = dy;
                    break;
            }
            dy.swap(dx);
        }
    }

    if (grads && opt.lambda != 0.0) {
        for (std::size_t l = 0; l < nl; ++l) {
            const auto& w = *wp[l];
            for (std::size_t i = 0; i < w.size(); ++i) grads->weights[l][i] += 2.0 * opt.lambda * w[i];
        }
    }
    res.loss = res.cross_entropy + res.regularization;
    return res;
}

SgdMomentum::SgdMomentum(const FloatModel& m, double lr, double momentum)
    : lr_(lr), momentum_(momentum), velocity_(zero_gradients(m)) {
    if (!(lr > 0.0)) throw ArgumentError("SgdMomentum: learning rate must be positive");
}

void SgdMomentum::step(FloatModel& m, const Gradients& g) {
    auto update = [&](std::vector<double>& w, std::vector<double>& v, const std::vector<double>& gr) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = momentum_ * v[i] + gr[i];
            w[i] -= lr_ * v[i];
        }
    };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        update(m.weights[l], velocity_.weights[l], g.weights[l]);
        update(m.biases[l], velocity_.biases[l], g.biases[l]);
    }
}

std::vector<double> train_float(FloatModel& m, const Dataset& train, const FloatTrainConfig& cfg) {
    if (cfg.batch_size == 0) throw ArgumentError("train_float: batch size must be positive");
    SgdMomentum opt(m, cfg.lr, cfg.momentum);
    const CounterRng root(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::vector<double> epoch_loss;
    Gradients g;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        CounterRng rng = root.split(e);
        rng.shuffle(std::span<std::size_t>(order));
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), b + cfg.batch_size);
            const auto r = forward_backward_float(m, train, std::span(order).subspan(b, end - b),
                                                  {cfg.lambda, false}, &g);
            opt.step(m, g);
            total += r.loss;
            ++batches;
        }
        epoch_loss.push_back(batches ? total / static_cast<double>(batches) : 0.0);
    }
    return epoch_loss;
}

std::vector<std::size_t> first_indices(const Dataset& ds, std::size_t n) {
    std::vector<std::size_t> idx(std::min(n, ds.size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

}  // namespace zsecc
