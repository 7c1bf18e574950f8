// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "zsecc/dataset.hpp"
#include "zsecc/quantizer.hpp"

namespace zsecc {

enum class LayerKind : std::uint8_t {
    Conv2D = 1,
    Linear = 2,
    ReLU = 3,
    MaxPool2D = 4,
    Flatten = 5,
};

// One network layer.
//   Conv2D    dims = (filters N, channels C, kernel H, kernel W), stride, padding
//   Linear    dims = (out, in, 1, 1)
//   MaxPool2D dims = (1, 1, kernel, kernel), stride
struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    std::array<std::uint32_t, 4> dims{0, 0, 0, 0};
    std::uint32_t stride = 1;
    std::uint32_t padding = 0;

    static LayerSpec conv2d(std::uint32_t filters, std::uint32_t channels, std::uint32_t kh, std::uint32_t kw,
                            std::uint32_t stride = 1, std::uint32_t padding = 0);
    static LayerSpec linear(std::uint32_t out, std::uint32_t in);
    static LayerSpec relu();
    static LayerSpec maxpool(std::uint32_t kernel, std::uint32_t stride);
    static LayerSpec flatten();

    bool has_params() const { return kind == LayerKind::Conv2D || kind == LayerKind::Linear; }
    Shape weight_shape() const { return Shape{dims}; }
    std::size_t weight_count() const { return has_params() ? weight_shape().count() : 0; }
    std::size_t bias_count() const { return has_params() ? dims[0] : 0; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Per-sample activation shape.
struct FeatureShape {
    std::uint32_t c = 1, h = 1, w = 1;
    std::size_t count() const { return std::size_t{c} * h * w; }
    friend bool operator==(const FeatureShape&, const FeatureShape&) = default;
};

// Output shapes of every layer; throws ArgumentError on incompatible layers.
std::vector<FeatureShape> infer_shapes(const FeatureShape& input, std::span<const LayerSpec> layers);

// Float (binary64) model with shadow weights for training.
struct FloatModel {
    FeatureShape input;
    std::vector<LayerSpec> layers;
    std::vector<std::vector<double>> weights;  // per layer, empty when the layer has no parameters
    std::vector<std::vector<double>> biases;

    friend bool operator==(const FloatModel&, const FloatModel&) = default;
};

// Allocates parameters for `layers` and draws He-normal weights, zero biases.
FloatModel make_model(const FeatureShape& input, std::vector<LayerSpec> layers, std::uint64_t seed);

// Conv(8,3x3)-ReLU-MaxPool-Conv(16,3x3)-ReLU-MaxPool-Flatten-Linear(classes)
// on 1x28x28 inputs, convolutions padded to keep spatial size.
FloatModel make_reference_model(std::uint64_t seed, std::uint32_t classes = 10);

// Int8 model: int8 weights, int32 biases at scale (weight scale x input
// scale), and the activation scale each Conv2D/Linear output is
// requantized to.
struct QuantizedModel {
    FeatureShape input;
    double input_scale = 1.0 / 127.0;
    std::vector<LayerSpec> layers;
    std::vector<QuantizedTensor> weights;  // per layer, empty when the layer has no parameters
    std::vector<QuantizedBias> biases;
    std::vector<double> out_scales;        // per layer, 0 when the layer has no parameters

    friend bool operator==(const QuantizedModel&, const QuantizedModel&) = default;
};

// Pixel value p in [0, 255] is presented to the network as p / 255.
inline double pixel_to_real(std::uint8_t p) { return p / 255.0; }

// Calibrates activation scales on the given samples (float forward with the
// dequantized weights), then quantizes biases. `weights` must match fm.
QuantizedModel assemble_quantized(const FloatModel& fm, std::vector<QuantizedTensor> weights, const Dataset& calib,
                                  std::span<const std::size_t> calib_indices);

// Per-tensor symmetric quantization of every weight tensor, then
// assemble_quantized.
QuantizedModel quantize_model(const FloatModel& fm, const Dataset& calib, std::span<const std::size_t> calib_indices);

std::vector<QuantizedTensor> quantize_weights(const FloatModel& fm);

struct Int8Output {
    std::vector<std::int32_t> accumulators;  // final layer, before dequantization
    std::vector<double> logits;              // accumulators * (weight scale x input scale)
};

// Int8 inference. Conv2D/Linear accumulate int8 x int8 products in int32, add
// the int32 bias and requantize to int8 (the final layer is dequantized
// instead). The last layer must be Conv2D or Linear.
Int8Output forward_int8(const QuantizedModel& m, std::span<const std::uint8_t> image);

std::size_t argmax(std::span<const double> v);

// Fraction of correctly classified samples.
double evaluate_int8(const QuantizedModel& m, const Dataset& ds);

std::vector<double> forward_float(const FloatModel& m, std::span<const double> input);
double evaluate_float(const FloatModel& m, const Dataset& ds);

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

struct LossOptions {
    double lambda = 0.0;      // weight on sum of squared Frobenius norms of the weights
    bool fake_quant = false;  // forward through quantized weights, straight-through gradients
};

struct LossResult {
    double loss = 0.0;
    double cross_entropy = 0.0;   // mean over the batch
    double regularization = 0.0;  // lambda * sum ||W||_F^2
};

// Mean cross entropy over the batch plus the regularization term. With
// fake_quant every weight tensor is replaced by dequantize(quantize(W)) in
// both terms and its gradient is passed to W unchanged (every value lies
// inside the representable range by construction of the scale).
LossResult forward_backward_float(const FloatModel& m, const Dataset& ds, std::span<const std::size_t> batch,
                                  const LossOptions& opt, Gradients* grads);

Gradients zero_gradients(const FloatModel& m);

// SGD with momentum: v = momentum * v + g; w -= lr * v.
class SgdMomentum {
public:
    SgdMomentum(const FloatModel& m, double lr, double momentum);
    void step(FloatModel& m, const Gradients& g);

private:
    double lr_;
    double momentum_;
    Gradients velocity_;
};

struct FloatTrainConfig {
    std::size_t epochs = 3;
    std::size_t batch_size = 64;
    double lr = 0.01;
    double momentum = 0.9;
    double lambda = 1e-4;
    std::uint64_t seed = 1;
};

// Plain float training; returns the final training loss of each epoch.
std::vector<double> train_float(FloatModel& m, const Dataset& train, const FloatTrainConfig& cfg);

// The first `n` sample indices, used as the calibration batch.
std::vector<std::size_t> first_indices(const Dataset& ds, std::size_t n);

}  // namespace zsecc
