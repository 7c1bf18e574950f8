// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace zsecc {

// Tensor dimensions: (N, C, H, W) for convolution weights, (out, in, 1, 1)
// for fully connected weights, (count, 1, 1, 1) for vectors.
struct Shape {
    std::array<std::uint32_t, 4> dims{1, 1, 1, 1};

    std::size_t count() const {
        return std::size_t{dims[0]} * dims[1] * dims[2] * dims[3];
    }
    friend bool operator==(const Shape&, const Shape&) = default;
};

// Symmetric linearly quantized int8 tensor: real value = values[i] * scale.
struct QuantizedTensor {
    std::vector<std::int8_t> values;
    Shape shape;
    double scale = 1.0;

    friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

struct QuantizedBias {
    std::vector<std::int32_t> values;
    double scale = 1.0;

    friend bool operator==(const QuantizedBias&, const QuantizedBias&) = default;
};

// Largest representable magnitude for an n-bit symmetric code: 2^(n-1) - 1.
constexpr int quant_max(int bits) { return (1 << (bits - 1)) - 1; }

// Per-tensor scale max|x| / (2^(n-1) - 1); an all-zero tensor gets scale 1.
double symmetric_scale(std::span<const double> x, int bits = 8);

// round(x * (2^(n-1) - 1) / max|x|), half away from zero. bits in [2, 8].
QuantizedTensor quantize(std::span<const double> x, const Shape& shape, int bits = 8);

// Quantizes with a caller-provided scale, saturating to [-(2^(n-1)-1), 2^(n-1)-1].
std::int8_t quantize_value(double x, double scale, int bits = 8);

std::vector<double> dequantize(const QuantizedTensor& q);

// round(b / scale) as int32; throws ArgumentError on overflow.
QuantizedBias quantize_bias(std::span<const double> b, double scale);

}  // namespace zsecc
