// SPDX-License-Identifier: Apache-2.0
#include "zsecc/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

#include "zsecc/error.hpp"
#include "zsecc/rng.hpp"

namespace zsecc {

namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Segment {
    double x0, y0, x1, y1;
};

double segment_distance(const Segment& s, double px, double py) {
    const double dx = s.x1 - s.x0;
    const double dy = s.y1 - s.y0;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = s.x0 + t * dx - px;
    const double ey = s.y0 + t * dy - py;
    return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw ParseError("idx: truncated header");
    if (bytes[0] != 0 || bytes[1] != 0) throw ParseError("idx: bad magic");
    if (bytes[2] != kUnsignedByte) throw ParseError("idx: unsupported element type " + std::to_string(bytes[2]));
    const std::size_t ndims = bytes[3];
    if (ndims == 0) throw ParseError("idx: zero dimensions");
    const std::size_t header = 4 + 4 * ndims;
    if (bytes.size() < header) throw ParseError("idx: truncated dimension table");

    IdxArray a;
    std::size_t total = 1;
    for (std::size_t i = 0; i < ndims; ++i) {
        a.dims.push_back(read_be32(bytes, 4 + 4 * i));
        total *= a.dims.back();
    }
    if (bytes.size() - header != total) {
        throw ParseError("idx: expected " + std::to_string(total) + " data bytes, found " +
                         std::to_string(bytes.size() - header));
    }
    a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return a;
}

IdxArray read_idx(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_idx(bytes);
}

std::vector<std::uint8_t> serialize_idx(const IdxArray& a) {
    std::vector<std::uint8_t> out{0, 0, kUnsignedByte, static_cast<std::uint8_t>(a.dims.size())};
    for (auto d : a.dims) put_be32(out, d);
    out.insert(out.end(), a.data.begin(), a.data.end());
    return out;
}

void write_idx(const std::filesystem::path& path, const IdxArray& a) {
    const auto bytes = serialize_idx(a);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, Split split) {
    IdxArray img = read_idx(images);
    IdxArray lab = read_idx(labels);
    if (img.dims.size() != 3) throw ParseError("idx: image file must have 3 dimensions (magic 0x00000803)");
    if (lab.dims.size() != 1) throw ParseError("idx: label file must have 1 dimension (magic 0x00000801)");
    if (img.dims[0] != lab.dims[0]) throw ParseError("idx: image and label counts differ");

    Dataset ds;
    ds.rows = img.dims[1];
    ds.cols = img.dims[2];
    ds.images = std::move(img.data);
    ds.labels = std::move(lab.data);
    ds.split = split;
    std::uint32_t max_label = 0;
    for (auto l : ds.labels) max_label = std::max<std::uint32_t>(max_label, l);
    ds.classes = ds.labels.empty() ? 0 : max_label + 1;
    return ds;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images, const std::filesystem::path& labels) {
    write_idx(images, IdxArray{{static_cast<std::uint32_t>(ds.size()), ds.rows, ds.cols}, ds.images});
    write_idx(labels, IdxArray{{static_cast<std::uint32_t>(ds.size())}, ds.labels});
}

Dataset generate_synthetic(std::uint64_t seed, std::uint32_t classes, std::size_t count, Split split) {
    if (classes == 0 || classes > 256) throw ArgumentError("generate_synthetic: classes must be in [1, 256]");
    constexpr std::uint32_t kSide = 28;
    constexpr std::size_t kStrokes = 3;

    const CounterRng root(seed);
    CounterRng proto_rng = root.split(0);
    std::vector<std::array<Segment, kStrokes>> protos(classes);
    for (auto& p : protos) {
        for (auto& s : p) s = {proto_rng.uniform(5, 22), proto_rng.uniform(5, 22), proto_rng.uniform(5, 22),
                               proto_rng.uniform(5, 22)};
    }

    Dataset ds;
    ds.rows = ds.cols = kSide;
    ds.classes = classes;
    ds.split = split;
    ds.images.resize(count * kSide * kSide);
    ds.labels.resize(count);

    CounterRng rng = root.split(split == Split::Train ? 1 : 2);
    for (std::size_t n = 0; n < count; ++n) {
        const auto label = static_cast<std::uint32_t>(rng.below(classes));
        ds.labels[n] = static_cast<std::uint8_t>(label);

        const double sx = static_cast<double>(rng.below(5)) - 2.0;
        const double sy = static_cast<double>(rng.below(5)) - 2.0;
        const double width = rng.uniform(1.0, 2.0);
        const double ink = rng.uniform(0.7, 1.0);
        std::array<Segment, kStrokes> strokes = protos[label];
        for (auto& s : strokes) {
            s.x0 += sx + 1.2 * rng.normal();
            s.y0 += sy + 1.2 * rng.normal();
            s.x1 += sx + 1.2 * rng.normal();
            s.y1 += sy + 1.2 * rng.normal();
        }

        std::uint8_t* img = ds.images.data() + n * kSide * kSide;
        for (std::uint32_t y = 0; y < kSide; ++y) {
            for (std::uint32_t x = 0; x < kSide; ++x) {
                double d = 1e9;
                for (const auto& s : strokes) d = std::min(d, segment_distance(s, x, y));
                double v = ink * std::clamp(1.0 - (d - 0.5 * width), 0.0, 1.0);
                v += 0.08 * rng.normal();
                img[y * kSide + x] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
            }
        }
    }
    return ds;
}

}  // namespace zsecc
