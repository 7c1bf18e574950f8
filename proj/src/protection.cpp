// SPDX-License-Identifier: Apache-2.0
#include "zsecc/protection.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "zsecc/error.hpp"

namespace zsecc {

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Faulty: return "faulty";
        case Strategy::ParityZero: return "zero";
        case Strategy::StandardEcc: return "ecc";
        case Strategy::InPlace: return "in-place";
        case Strategy::Float: return "float";
    }
    return "?";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "faulty" || name == "none") return Strategy::Faulty;
    if (name == "zero" || name == "parity-zero") return Strategy::ParityZero;
    if (name == "ecc" || name == "standard-ecc") return Strategy::StandardEcc;
    if (name == "in-place" || name == "inplace") return Strategy::InPlace;
    throw ConfigError("unknown strategy '" + std::string(name) + "' (expected faulty, zero, ecc or in-place)");
}

double nominal_overhead_pct(Strategy s) {
    return s == Strategy::ParityZero || s == Strategy::StandardEcc ? 12.5 : 0.0;
}

namespace {

std::uint64_t load_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
    return v;
}

void store_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::vector<std::uint8_t> raw_padded(const QuantizedTensor& t) {
    std::vector<std::uint8_t> out(t.values.size() + block_padding(t.values.size()), 0);
    for (std::size_t i = 0; i < t.values.size(); ++i) out[i] = static_cast<std::uint8_t>(t.values[i]);
    return out;
}

StoredRecord weight_record(RecordKind kind, const LayerSpec& L, const QuantizedTensor& w, Strategy s) {
    StoredRecord r;
    r.kind = kind;
    r.dims = L.dims;
    r.scale = w.scale;
    r.pad = block_padding(w.values.size());
    switch (s) {
        case Strategy::Faulty:
            r.payload = raw_padded(w);
            break;
        case Strategy::ParityZero:
            r.payload = raw_padded(w);
            r.redundancy = parity_bits(r.payload);
            break;
        case Strategy::StandardEcc:
            r.payload = raw_padded(w);
            r.redundancy = ecc72_checks(r.payload);
            break;
        case Strategy::InPlace:
            r.payload = protect_tensor(w).bytes;
            break;
        case Strategy::Float:
            throw ArgumentError("apply_strategy_store: Float is not a protection strategy");
    }
    return r;
}

StoredRecord bias_record(const QuantizedBias& b, Strategy s) {
    StoredRecord r;
    r.kind = RecordKind::Bias;
    r.dims = {static_cast<std::uint32_t>(b.values.size()), 1, 1, 1};
    r.scale = b.scale;
    r.pad = static_cast<std::uint8_t>(b.values.size() % 2);
    r.payload.assign((b.values.size() + r.pad) * 4, 0);
    for (std::size_t i = 0; i < b.values.size(); ++i) {
        const auto u = static_cast<std::uint32_t>(b.values[i]);
        for (int k = 0; k < 4; ++k) r.payload[4 * i + k] = static_cast<std::uint8_t>(u >> (8 * k));
    }
    if (s != Strategy::Faulty) r.redundancy = ecc72_checks(r.payload);
    return r;
}

std::vector<std::uint8_t> decode_ecc72(const StoredRecord& r, RecoveryCounters& c) {
    if (r.redundancy.size() * 8 != r.payload.size()) {
        throw FormatError("record redundancy does not match (72,64,1) layout");
    }
    std::vector<std::uint8_t> out(r.payload.size());
    for (std::size_t b = 0; b < r.redundancy.size(); ++b) {
        const Ecc72Decode d = ecc72_decode(load_u64(r.payload.data() + 8 * b), r.redundancy[b]);
        switch (d.outcome.status) {
            case DecodeStatus::NoError: break;
            case DecodeStatus::CorrectedSingle: ++c.corrected; break;
            case DecodeStatus::DetectedDouble: ++c.detected_double; break;
            case DecodeStatus::DetectedUncorrectable: ++c.detected_uncorrectable; break;
        }
        store_u64(out.data() + 8 * b, d.data);
    }
    return out;
}

QuantizedTensor read_weights(const StoredRecord& r, Strategy s, RecoveryCounters& c) {
    QuantizedTensor t;
    t.shape = Shape{r.dims};
    t.scale = r.scale;
    const std::size_t count = t.shape.count();
    if (r.payload.size() != count + r.pad || r.pad != block_padding(count)) {
        throw FormatError("weight payload length inconsistent with dims and padding");
    }
    std::vector<std::uint8_t> bytes;
    switch (s) {
        case Strategy::Faulty:
            bytes = r.payload;
            break;
        case Strategy::ParityZero: {
            if (r.redundancy.size() * 8 != r.payload.size()) throw FormatError("parity array length mismatch");
            const auto expect = parity_bits(r.payload);
            bytes = r.payload;
            for (std::size_t i = 0; i < bytes.size(); ++i) {
                const bool stored = (r.redundancy[i / 8] >> (i % 8)) & 1U;
                const bool now = (expect[i / 8] >> (i % 8)) & 1U;
                if (stored != now) {
                    bytes[i] = 0;
                    if (i < count) ++c.detected_uncorrectable;
                }
            }
            break;
        }
        case Strategy::StandardEcc:
            bytes = decode_ecc72(r, c);
            break;
        case Strategy::InPlace: {
            if (!r.redundancy.empty()) throw FormatError("in-place record carries a redundancy array");
            DecodeCounters dc;
            t.values = unprotect_tensor(r.payload, count, &dc);
            c.corrected += dc.corrected;
            c.detected_double += dc.detected_double;
            c.detected_uncorrectable += dc.detected_uncorrectable;
            return t;
        }
        case Strategy::Float:
            throw ArgumentError("recover: Float checkpoints hold no quantized weights");
    }
    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) t.values[i] = static_cast<std::int8_t>(bytes[i]);
    return t;
}

QuantizedBias read_bias(const StoredRecord& r, Strategy s, RecoveryCounters& c) {
    const std::size_t count = r.dims[0];
    if (r.pad != count % 2 || r.payload.size() != (count + r.pad) * 4) {
        throw FormatError("bias payload length inconsistent with dims and padding");
    }
    const std::vector<std::uint8_t> bytes = s == Strategy::Faulty ? r.payload : decode_ecc72(r, c);
    QuantizedBias b;
    b.scale = r.scale;
    b.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t u = 0;
        for (int k = 0; k < 4; ++k) u |= std::uint32_t{bytes[4 * i + k]} << (8 * k);
        b.values[i] = static_cast<std::int32_t>(u);
    }
    return b;
}

const StoredRecord& expect_record(const ProtectedModel& p, std::size_t i, RecordKind kind) {
    if (i >= p.records.size() || p.records[i].kind != kind) {
        throw FormatError("record " + std::to_string(i) + ": expected kind " +
                          std::to_string(static_cast<int>(kind)));
    }
    return p.records[i];
}

}  // namespace

std::vector<std::uint8_t> parity_bits(std::span<const std::uint8_t> payload) {
    std::vector<std::uint8_t> out((payload.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < payload.size(); ++i) {
        if (std::popcount(payload[i]) & 1) out[i / 8] |= static_cast<std::uint8_t>(1U << (i % 8));
    }
    return out;
}

std::vector<std::uint8_t> ecc72_checks(std::span<const std::uint8_t> payload) {
    if (payload.size() % 8 != 0) throw ArgumentError("ecc72_checks: payload must be a multiple of 8 bytes");
    std::vector<std::uint8_t> out(payload.size() / 8);
    for (std::size_t b = 0; b < out.size(); ++b) out[b] = ecc72_check_byte(load_u64(payload.data() + 8 * b));
    return out;
}

SpaceAccount space_account(const ProtectedModel& m) {
    SpaceAccount a;
    for (const auto& r : m.records) {
        if (!r.holds_weights()) continue;
        a.weight_bytes += r.payload.size();
        a.redundancy_bytes += r.redundancy.size();
    }
    return a;
}

ProtectedModel apply_strategy_store(const QuantizedModel& m, Strategy strategy) {
    infer_shapes(m.input, m.layers);
    ProtectedModel p;
    p.strategy = strategy;
    p.records.push_back({RecordKind::Input, {m.input.c, m.input.h, m.input.w, 0}, m.input_scale, 0, {}, {}});
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const LayerSpec& L = m.layers[l];
        switch (L.kind) {
            case LayerKind::Conv2D:
            case LayerKind::Linear: {
                const RecordKind kind = L.kind == LayerKind::Conv2D ? RecordKind::Conv2D : RecordKind::Linear;
                try {
                    p.records.push_back(weight_record(kind, L, m.weights[l], strategy));
                } catch (const ConstraintViolation& e) {
                    throw ConstraintViolation(e.index(), l);
                }
                if (L.kind == LayerKind::Conv2D) {
                    p.records.push_back({RecordKind::ConvGeometry, {L.stride, L.padding, 0, 0}, 0.0, 0, {}, {}});
                }
                p.records.push_back(bias_record(m.biases[l], strategy));
                p.records.push_back({RecordKind::Activation, {0, 0, 0, 0}, m.out_scales[l], 0, {}, {}});
                break;
            }
            case LayerKind::ReLU:
                p.records.push_back({RecordKind::ReLU, {0, 0, 0, 0}, 0.0, 0, {}, {}});
                break;
            case LayerKind::Flatten:
                p.records.push_back({RecordKind::Flatten, {0, 0, 0, 0}, 0.0, 0, {}, {}});
                break;
            case LayerKind::MaxPool2D:
                p.records.push_back({RecordKind::MaxPool2D, {L.dims[2], L.stride, 0, 0}, 0.0, 0, {}, {}});
                break;
        }
    }
    return p;
}

Recovered recover(const ProtectedModel& p) {
    if (p.strategy == Strategy::Float) throw ArgumentError("recover: Float checkpoints hold no quantized weights");
    Recovered out;
    QuantizedModel& m = out.model;
    const StoredRecord& in = expect_record(p, 0, RecordKind::Input);
    m.input = {in.dims[0], in.dims[1], in.dims[2]};
    m.input_scale = in.scale;

    auto push_layer = [&](const LayerSpec& L) {
        m.layers.push_back(L);
        m.weights.emplace_back();
        m.biases.emplace_back();
        m.out_scales.push_back(0.0);
    };

    for (std::size_t i = 1; i < p.records.size(); ++i) {
        const StoredRecord& r = p.records[i];
        switch (r.kind) {
            case RecordKind::Conv2D:
            case RecordKind::Linear: {
                LayerSpec L;
                if (r.kind == RecordKind::Conv2D) {
                    const StoredRecord& g = expect_record(p, ++i, RecordKind::ConvGeometry);
                    L = LayerSpec::conv2d(r.dims[0], r.dims[1], r.dims[2], r.dims[3], g.dims[0], g.dims[1]);
                } else {
                    L = LayerSpec::linear(r.dims[0], r.dims[1]);
                }
                push_layer(L);
                m.weights.back() = read_weights(r, p.strategy, out.counters);
                m.biases.back() = read_bias(expect_record(p, ++i, RecordKind::Bias), p.strategy, out.counters);
                m.out_scales.back() = expect_record(p, ++i, RecordKind::Activation).scale;
                break;
            }
            case RecordKind::ReLU: push_layer(LayerSpec::relu()); break;
            case RecordKind::Flatten: push_layer(LayerSpec::flatten()); break;
            case RecordKind::MaxPool2D: push_layer(LayerSpec::maxpool(r.dims[0], r.dims[1])); break;
            default:
                throw FormatError("record " + std::to_string(i) + ": unexpected kind " +
                                  std::to_string(static_cast<int>(r.kind)));
        }
    }
    try {
        infer_shapes(m.input, m.layers);
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("stored layers are inconsistent: ") + e.what());
    }
    return out;
}

}  // namespace zsecc
