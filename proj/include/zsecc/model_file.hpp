// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "zsecc/nn.hpp"
#include "zsecc/protection.hpp"

namespace zsecc {

// Binary container, all integers little-endian:
//   "ZSEC" | version u16 | strategy u8 | record count u16
//   per record: kind u8 | dims 4 x u32 | scale f64 | pad u8
//               | payload length u64 | payload | redundancy length u64 | redundancy
//   CRC-32 (IEEE, reflected polynomial 0xEDB88320) of all preceding bytes, u32
inline constexpr std::uint16_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const ProtectedModel& m);
// Throws FormatError on bad magic, unknown version, truncation, CRC mismatch
// or inconsistent record lengths.
ProtectedModel parse_model(std::span<const std::uint8_t> bytes);

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes);

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

void save_model(const ProtectedModel& m, const std::filesystem::path& path);
void save_model(const QuantizedModel& m, Strategy strategy, const std::filesystem::path& path);
ProtectedModel load_model(const std::filesystem::path& path);

// Float checkpoints reuse the container with strategy tag Float: weight and
// bias payloads are binary64 values, there are no Activation records and no
// redundancy.
ProtectedModel to_checkpoint(const FloatModel& m);
FloatModel from_checkpoint(const ProtectedModel& p);

}  // namespace zsecc
