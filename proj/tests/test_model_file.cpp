// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <string_view>

#include "doctest.h"
#include "zsecc/dataset.hpp"
#include "zsecc/error.hpp"
#include "zsecc/model_file.hpp"
#include "zsecc/protection.hpp"
#include "zsecc/wot.hpp"

using namespace zsecc;

namespace {

// Bitwise reflected CRC-32, independent of the library implementation.
std::uint32_t crc32_bitwise(std::span<const std::uint8_t> data) {
    std::uint32_t crc = 0xFFFFFFFFU;
    for (std::uint8_t b : data) {
        crc ^= b;
        for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320U & (0U - (crc & 1U)));
    }
    return ~crc;
}

void store_crc(std::vector<std::uint8_t>& bytes) {
    const std::uint32_t c = crc32_bitwise(std::span<const std::uint8_t>(bytes).first(bytes.size() - 4));
    for (int i = 0; i < 4; ++i) bytes[bytes.size() - 4 + i] = static_cast<std::uint8_t>(c >> (8 * i));
}

QuantizedModel small_quantized() {
    FloatModel fm = make_reference_model(4, 3);
    const Dataset ds = generate_synthetic(4, 3, 32, Split::Train);
    QuantizedModel qm = quantize_model(fm, ds, first_indices(ds, 32));
    for (auto& w : qm.weights) {
        if (!w.values.empty()) w = throttle(w);
    }
    return qm;
}

std::filesystem::path temp_dir() {
    auto p = std::filesystem::temp_directory_path() / "zsecc_test_model_file";
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("crc32") {
    const std::string_view check = "123456789";
    const std::span<const std::uint8_t> b(reinterpret_cast<const std::uint8_t*>(check.data()), check.size());
    CHECK(crc32_ieee(b) == 0xCBF43926U);
    CHECK(crc32_bitwise(b) == 0xCBF43926U);
    std::vector<std::uint8_t> data(1000);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(i * 31 + 7);
    CHECK(crc32_ieee(data) == crc32_bitwise(data));
}

TEST_CASE("round trip") {
    const QuantizedModel qm = small_quantized();
    for (Strategy s : {Strategy::Faulty, Strategy::ParityZero, Strategy::StandardEcc, Strategy::InPlace}) {
        CAPTURE(to_string(s));
        const ProtectedModel p = apply_strategy_store(qm, s);
        const auto bytes = serialize_model(p);
        CHECK(std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) == "ZSEC");
        const ProtectedModel back = parse_model(bytes);
        CHECK(back == p);
        CHECK(serialize_model(back) == bytes);
        CHECK(recover(back).model == qm);
    }

    const FloatModel fm = make_reference_model(8, 5);
    const auto ck = serialize_model(to_checkpoint(fm));
    CHECK(from_checkpoint(parse_model(ck)) == fm);
    CHECK_THROWS_AS(from_checkpoint(apply_strategy_store(qm, Strategy::Faulty)), FormatError);
}

TEST_CASE("rejects damaged files") {
    const auto good = serialize_model(apply_strategy_store(small_quantized(), Strategy::StandardEcc));

    SUBCASE("truncation") {
        for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{10}, good.size() / 2, good.size() - 1}) {
            CHECK_THROWS_AS(parse_model(std::span(good).first(n)), FormatError);
        }
    }
    SUBCASE("bad magic") {
        auto b = good;
        b[0] = 'X';
        store_crc(b);
        CHECK_THROWS_AS(parse_model(b), FormatError);
    }
    SUBCASE("unknown version") {
        auto b = good;
        b[4] = 2;
        store_crc(b);
        CHECK_THROWS_WITH_AS(parse_model(b), doctest::Contains("version"), FormatError);
    }
    SUBCASE("corrupted byte") {
        auto b = good;
        b[b.size() / 2] ^= 0x20;
        CHECK_THROWS_WITH_AS(parse_model(b), doctest::Contains("CRC"), FormatError);
    }
    SUBCASE("unknown strategy") {
        auto b = good;
        b[6] = 9;
        store_crc(b);
        CHECK_THROWS_AS(parse_model(b), FormatError);
    }
    SUBCASE("trailing bytes") {
        auto b = good;
        b.insert(b.end() - 4, 0);
        store_crc(b);
        CHECK_THROWS_AS(parse_model(b), FormatError);
    }
    SUBCASE("inconsistent record lengths") {
        ProtectedModel p = apply_strategy_store(small_quantized(), Strategy::StandardEcc);
        for (auto& r : p.records) {
            if (r.holds_weights()) {
                r.redundancy.pop_back();
                break;
            }
        }
        CHECK_THROWS_AS(parse_model(serialize_model(p)), FormatError);
    }
}

TEST_CASE("files") {
    const auto dir = temp_dir();
    const QuantizedModel qm = small_quantized();
    save_model(qm, Strategy::InPlace, dir / "m.zsec");
    CHECK(std::filesystem::exists(dir / "m.zsec"));
    CHECK_FALSE(std::filesystem::exists(dir / "m.zsec.tmp"));
    CHECK(load_model(dir / "m.zsec") == apply_strategy_store(qm, Strategy::InPlace));
    CHECK_THROWS_AS(load_model(dir / "absent.zsec"), IoError);
    std::filesystem::remove_all(dir);
}
