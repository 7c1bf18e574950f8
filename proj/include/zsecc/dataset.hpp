// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace zsecc {

enum class Split : std::uint8_t { Train, Test };

// Single-channel uint8 images with class labels.
struct Dataset {
    std::vector<std::uint8_t> images;  // count * rows * cols, row-major per image
    std::vector<std::uint8_t> labels;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint32_t classes = 0;
    Split split = Split::Train;

    std::size_t size() const { return labels.size(); }
    std::size_t pixels() const { return std::size_t{rows} * cols; }
    std::span<const std::uint8_t> image(std::size_t i) const {
        return {images.data() + i * pixels(), pixels()};
    }
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Raw IDX array: big-endian header {0, 0, type, ndims}, ndims big-endian u32
// sizes, then the data. Only the unsigned-byte type (0x08) is supported.
struct IdxArray {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> data;
};

IdxArray parse_idx(std::span<const std::uint8_t> bytes);
IdxArray read_idx(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_idx(const IdxArray& a);
void write_idx(const std::filesystem::path& path, const IdxArray& a);

// Pairs an image file (magic 0x00000803) with a label file (0x00000801).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 Split split = Split::Train);
void save_idx(const Dataset& ds, const std::filesystem::path& images, const std::filesystem::path& labels);

// Seed-deterministic 28x28 stroke-pattern dataset. Class prototypes depend
// only on (seed, classes); the samples also depend on the split, so train
// and test draw different images of the same classes.
Dataset generate_synthetic(std::uint64_t seed, std::uint32_t classes, std::size_t count,
                           Split split = Split::Train);

}  // namespace zsecc
