// SPDX-License-Identifier: Apache-2.0
#include "zsecc/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "zsecc/error.hpp"

namespace zsecc {

namespace {

void check_bits(int bits) {
    if (bits < 2 || bits > 8) throw ArgumentError("quantize: bit width must be in [2, 8], got " + std::to_string(bits));
}

double max_abs(std::span<const double> x) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw ArgumentError("quantize: non-finite value at index " + std::to_string(i));
        m = std::max(m, std::fabs(x[i]));
    }
    return m;
}

}  // namespace

double symmetric_scale(std::span<const double> x, int bits) {
    check_bits(bits);
    const double m = max_abs(x);
    return m == 0.0 ? 1.0 : m / quant_max(bits);
}

QuantizedTensor quantize(std::span<const double> x, const Shape& shape, int bits) {
    check_bits(bits);
    if (shape.count() != x.size()) {
        throw ArgumentError("quantize: shape holds " + std::to_string(shape.count()) + " elements, input has " +
                            std::to_string(x.size()));
    }
    const double m = max_abs(x);
    const int qmax = quant_max(bits);

    QuantizedTensor q;
    q.shape = shape;
    q.values.resize(x.size(), 0);
    if (m == 0.0) {
        q.scale = 1.0;
        return q;
    }
    q.scale = m / qmax;
    const double factor = qmax / m;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = std::clamp(std::round(x[i] * factor), double(-qmax), double(qmax));
        q.values[i] = static_cast<std::int8_t>(v);
    }
    return q;
}

std::int8_t quantize_value(double x, double scale, int bits) {
    const int qmax = quant_max(bits);
    const double v = std::clamp(std::round(x / scale), double(-qmax), double(qmax));
    return static_cast<std::int8_t>(v);
}

std::vector<double> dequantize(const QuantizedTensor& q) {
    std::vector<double> out(q.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = q.values[i] * q.scale;
    return out;
}

QuantizedBias quantize_bias(std::span<const double> b, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ArgumentError("quantize_bias: scale must be positive and finite");
    QuantizedBias q;
    q.scale = scale;
    q.values.resize(b.size());
    constexpr double lo = -double(std::numeric_limits<std::int32_t>::max());
    constexpr double hi = std::numeric_limits<std::int32_t>::max();
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double v = std::round(b[i] / scale);
        if (!std::isfinite(v) || v < lo || v > hi) {
            throw ArgumentError("quantize_bias: value at index " + std::to_string(i) + " overflows int32");
        }
        q.values[i] = static_cast<std::int32_t>(v);
    }
    return q;
}

}  // namespace zsecc
