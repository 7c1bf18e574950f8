// SPDX-License-Identifier: Apache-2.0
#include "zsecc/model_file.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <system_error>

#include "zsecc/error.hpp"

namespace zsecc {

namespace {

constexpr char kMagic[4] = {'Z', 'S', 'E', 'C'};

class Writer {
public:
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    template <class T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t>& data() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
    template <class T>
    T uint() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{b_[pos_ + i]} << (8 * i));
        pos_ += sizeof(T);
        return v;
    }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    std::vector<std::uint8_t> bytes(std::uint64_t n) {
        need(n);
        std::vector<std::uint8_t> v(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                    b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return v;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::uint64_t n) {
        if (n > b_.size() - pos_) throw FormatError("model file truncated");
    }
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

bool known_strategy(std::uint8_t tag) { return tag <= 3 || tag == static_cast<std::uint8_t>(Strategy::Float); }

void check_record(const StoredRecord& r, Strategy s, std::size_t index) {
    const std::string where = "record " + std::to_string(index) + ": ";
    if (static_cast<std::uint8_t>(r.kind) > static_cast<std::uint8_t>(RecordKind::Activation)) {
        throw FormatError(where + "unknown kind " + std::to_string(static_cast<int>(r.kind)));
    }
    const bool is_float = s == Strategy::Float;
    if (r.holds_weights()) {
        const std::uint64_t count = Shape{r.dims}.count();
        if (is_float) {
            if (r.pad != 0 || r.payload.size() != count * 8) throw FormatError(where + "float payload length mismatch");
        } else if (r.pad != block_padding(count) || r.payload.size() != count + r.pad) {
            throw FormatError(where + "weight payload length inconsistent with dims and padding");
        }
        const bool has_array = s == Strategy::ParityZero || s == Strategy::StandardEcc;
        if (r.redundancy.size() != (has_array ? r.payload.size() / 8 : 0)) {
            throw FormatError(where + "redundancy length inconsistent with strategy " + std::string(to_string(s)));
        }
    } else if (r.kind == RecordKind::Bias) {
        const std::uint64_t count = r.dims[0];
        if (is_float) {
            if (r.pad != 0 || r.payload.size() != count * 8 || !r.redundancy.empty()) {
                throw FormatError(where + "float bias length mismatch");
            }
        } else {
            if (r.pad != count % 2 || r.payload.size() != (count + r.pad) * 4) {
                throw FormatError(where + "bias payload length inconsistent with dims and padding");
            }
            if (r.redundancy.size() != (s == Strategy::Faulty ? 0 : r.payload.size() / 8)) {
                throw FormatError(where + "bias redundancy length inconsistent with strategy");
            }
        }
    } else if (!r.payload.empty() || !r.redundancy.empty()) {
        throw FormatError(where + "metadata record carries data");
    }
}

void put_f64s(std::vector<std::uint8_t>& out, std::span<const double> v) {
    out.resize(v.size() * 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto u = std::bit_cast<std::uint64_t>(v[i]);
        for (int k = 0; k < 8; ++k) out[8 * i + k] = static_cast<std::uint8_t>(u >> (8 * k));
    }
}

std::vector<double> get_f64s(std::span<const std::uint8_t> b) {
    std::vector<double> v(b.size() / 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t u = 0;
        for (int k = 0; k < 8; ++k) u |= std::uint64_t{b[8 * i + k]} << (8 * k);
        v[i] = std::bit_cast<double>(u);
    }
    return v;
}

}  // namespace

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks.
    std::size_t off = 0;
    while (off < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1U << 30);
        crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize_model(const ProtectedModel& m) {
    if (m.records.size() > 0xFFFF) throw ArgumentError("serialize_model: too many records");
    Writer w;
    w.bytes({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
    w.uint<std::uint16_t>(kModelFormatVersion);
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(m.strategy));
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(m.records.size()));
    for (const auto& r : m.records) {
        w.uint<std::uint8_t>(static_cast<std::uint8_t>(r.kind));
        for (auto d : r.dims) w.uint<std::uint32_t>(d);
        w.f64(r.scale);
        w.uint<std::uint8_t>(r.pad);
        w.uint<std::uint64_t>(r.payload.size());
        w.bytes(r.payload);
        w.uint<std::uint64_t>(r.redundancy.size());
        w.bytes(r.redundancy);
    }
    const std::uint32_t crc = crc32_ieee(w.data());
    w.uint<std::uint32_t>(crc);
    return std::move(w.data());
}

ProtectedModel parse_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic (expected ZSEC)");
    Reader hdr(bytes.subspan(4));
    const auto version = hdr.uint<std::uint16_t>();
    if (version != kModelFormatVersion) {
        throw FormatError("unsupported format version " + std::to_string(version) + " (expected " +
                          std::to_string(kModelFormatVersion) + ")");
    }
    if (bytes.size() < 4 + 2 + 1 + 2 + 4) throw FormatError("model file truncated");
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t{bytes[body + i]} << (8 * i);
    if (crc32_ieee(bytes.first(body)) != stored) throw FormatError("CRC mismatch (file corrupted or truncated)");

    Reader rd(bytes.first(body));
    rd.bytes(4);
    rd.uint<std::uint16_t>();
    const auto tag = rd.uint<std::uint8_t>();
    if (!known_strategy(tag)) throw FormatError("unknown strategy tag " + std::to_string(tag));
    ProtectedModel m;
    m.strategy = static_cast<Strategy>(tag);
    const auto count = rd.uint<std::uint16_t>();
    m.records.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        StoredRecord r;
        r.kind = static_cast<RecordKind>(rd.uint<std::uint8_t>());
        for (auto& d : r.dims) d = rd.uint<std::uint32_t>();
        r.scale = rd.f64();
        r.pad = rd.uint<std::uint8_t>();
        r.payload = rd.bytes(rd.uint<std::uint64_t>());
        r.redundancy = rd.bytes(rd.uint<std::uint64_t>());
        check_record(r, m.strategy, i);
        m.records.push_back(std::move(r));
    }
    if (rd.pos() != body) throw FormatError("trailing bytes after last record");
    return m;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_model(const ProtectedModel& m, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_model(m));
}

void save_model(const QuantizedModel& m, Strategy strategy, const std::filesystem::path& path) {
    save_model(apply_strategy_store(m, strategy), path);
}

ProtectedModel load_model(const std::filesystem::path& path) { return parse_model(read_file_bytes(path)); }

ProtectedModel to_checkpoint(const FloatModel& m) {
    infer_shapes(m.input, m.layers);
    ProtectedModel p;
    p.strategy = Strategy::Float;
    p.records.push_back({RecordKind::Input, {m.input.c, m.input.h, m.input.w, 0}, 0.0, 0, {}, {}});
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const LayerSpec& L = m.layers[l];
        switch (L.kind) {
            case LayerKind::Conv2D:
            case LayerKind::Linear: {
                StoredRecord w{L.kind == LayerKind::Conv2D ? RecordKind::Conv2D : RecordKind::Linear, L.dims, 1.0, 0,
                               {}, {}};
                put_f64s(w.payload, m.weights[l]);
                p.records.push_back(std::move(w));
                if (L.kind == LayerKind::Conv2D) {
                    p.records.push_back({RecordKind::ConvGeometry, {L.stride, L.padding, 0, 0}, 0.0, 0, {}, {}});
                }
                StoredRecord b{RecordKind::Bias, {static_cast<std::uint32_t>(m.biases[l].size()), 1, 1, 1}, 1.0, 0,
                               {}, {}};
                put_f64s(b.payload, m.biases[l]);
                p.records.push_back(std::move(b));
                break;
            }
            case LayerKind::ReLU: p.records.push_back({RecordKind::ReLU, {}, 0.0, 0, {}, {}}); break;
            case LayerKind::Flatten: p.records.push_back({RecordKind::Flatten, {}, 0.0, 0, {}, {}}); break;
            case LayerKind::MaxPool2D:
                p.records.push_back({RecordKind::MaxPool2D, {L.dims[2], L.stride, 0, 0}, 0.0, 0, {}, {}});
                break;
        }
    }
    return p;
}

FloatModel from_checkpoint(const ProtectedModel& p) {
    if (p.strategy != Strategy::Float) {
        throw FormatError("expected a float checkpoint, found a '" + std::string(to_string(p.strategy)) + "' model");
    }
    if (p.records.empty() || p.records[0].kind != RecordKind::Input) throw FormatError("missing Input record");
    FloatModel m;
    m.input = {p.records[0].dims[0], p.records[0].dims[1], p.records[0].dims[2]};
    auto next = [&](std::size_t& i, RecordKind kind) -> const StoredRecord& {
        if (++i >= p.records.size() || p.records[i].kind != kind) {
            throw FormatError("record " + std::to_string(i) + ": unexpected kind in float checkpoint");
        }
        return p.records[i];
    };
    for (std::size_t i = 1; i < p.records.size(); ++i) {
        const StoredRecord& r = p.records[i];
        std::vector<double> w, b;
        switch (r.kind) {
            case RecordKind::Conv2D: {
                const StoredRecord& g = next(i, RecordKind::ConvGeometry);
                m.layers.push_back(LayerSpec::conv2d(r.dims[0], r.dims[1], r.dims[2], r.dims[3], g.dims[0], g.dims[1]));
                w = get_f64s(r.payload);
                b = get_f64s(next(i, RecordKind::Bias).payload);
                break;
            }
            case RecordKind::Linear:
                m.layers.push_back(LayerSpec::linear(r.dims[0], r.dims[1]));
                w = get_f64s(r.payload);
                b = get_f64s(next(i, RecordKind::Bias).payload);
                break;
            case RecordKind::ReLU: m.layers.push_back(LayerSpec::relu()); break;
            case RecordKind::Flatten: m.layers.push_back(LayerSpec::flatten()); break;
            case RecordKind::MaxPool2D: m.layers.push_back(LayerSpec::maxpool(r.dims[0], r.dims[1])); break;
            default: throw FormatError("record " + std::to_string(i) + ": unexpected kind in float checkpoint");
        }
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    try {
        infer_shapes(m.input, m.layers);
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("stored layers are inconsistent: ") + e.what());
    }
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        if (m.biases[l].size() != m.layers[l].bias_count()) throw FormatError("bias count mismatch");
    }
    return m;
}

}  // namespace zsecc
