// SPDX-License-Identifier: Apache-2.0
#include <set>

#include "doctest.h"
#include "parity_oracle.hpp"
#include "zsecc/error.hpp"
#include "zsecc/inplace_codec.hpp"
#include "zsecc/rng.hpp"
#include "zsecc/secded.hpp"

using namespace zsecc;

namespace {

WeightBlock random_compliant_block(CounterRng& rng) {
    WeightBlock b{};
    for (std::size_t i = 0; i < 7; ++i) b[i] = static_cast<std::int8_t>(static_cast<int>(rng.below(128)) - 64);
    b[7] = static_cast<std::int8_t>(static_cast<int>(rng.below(256)) - 128);
    return b;
}

// Logical codeword bits of a physical block, built from the documented
// placement: check bit i at bit 6 of byte i, data bits at the remaining
// physical bits in ascending order.
std::vector<int> logical_from_physical(std::uint64_t phys) {
    const auto& st = secded_64_57().structure();
    std::vector<int> c(64, 0);
    std::size_t ci = 0, di = 0;
    for (std::size_t bit = 0; bit < 64; ++bit) {
        const int v = static_cast<int>((phys >> bit) & 1U);
        if (bit % 8 == 6 && bit / 8 < 7) {
            c[st.check_positions[ci++] - 1] = v;
        } else {
            c[st.data_positions[di++] - 1] = v;
        }
    }
    return c;
}

}  // namespace

TEST_CASE("non-informative bit predicate") {
    CHECK(has_noninformative_bit(0));
    CHECK(has_noninformative_bit(63));
    CHECK(has_noninformative_bit(-64));
    CHECK_FALSE(has_noninformative_bit(64));
    CHECK_FALSE(has_noninformative_bit(-65));
    CHECK_FALSE(has_noninformative_bit(127));
    CHECK_FALSE(has_noninformative_bit(-128));
    for (int v = -128; v <= 127; ++v) {
        const auto u = static_cast<std::uint8_t>(v);
        CHECK(has_noninformative_bit(static_cast<std::int8_t>(v)) == (((u >> 6) & 1U) == ((u >> 7) & 1U)));
    }
}

TEST_CASE("swizzle map covers every physical bit once") {
    const auto& m = swizzle_map();
    std::set<int> seen;
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(m.check_phys[i] == 8 * i + 6);
        seen.insert(m.check_phys[i]);
    }
    for (auto p : m.data_phys) seen.insert(p);
    CHECK(seen.size() == 64);
    CHECK(std::is_sorted(m.data_phys.begin(), m.data_phys.end()));
}

TEST_CASE("pack and unpack are little-endian") {
    WeightBlock b{1, 2, 3, 4, 5, 6, 7, -1};
    CHECK(pack_block(b) == 0xFF07060504030201ULL);
    CHECK(unpack_block(0xFF07060504030201ULL) == b);
}

TEST_CASE("encode_block") {
    SUBCASE("all zero stays zero") { CHECK(encode_block(WeightBlock{}) == WeightBlock{}); }

    SUBCASE("eighth weight and informative bits are untouched") {
        const WeightBlock b{1, 2, 3, 4, 5, 6, 7, 100};
        const WeightBlock e = encode_block(b);
        CHECK(e[7] == 100);
        for (std::size_t i = 0; i < 7; ++i) {
            CHECK((static_cast<std::uint8_t>(e[i]) & 0xBF) == (static_cast<std::uint8_t>(b[i]) & 0xBF));
        }
    }

    SUBCASE("codeword satisfies the independent parity-check matrix") {
        const auto h = testing::textbook_h(64, 7);
        CounterRng rng(21);
        for (int n = 0; n < 500; ++n) {
            const WeightBlock e = encode_block(random_compliant_block(rng));
            CHECK(testing::is_zero(testing::multiply(h, logical_from_physical(pack_block(e)))));
        }
    }

    SUBCASE("non-compliant byte is reported") {
        try {
            encode_block(WeightBlock{70, 0, 0, 0, 0, 0, 0, 0});
            FAIL("expected ConstraintViolation");
        } catch (const ConstraintViolation& e) {
            CHECK(e.index() == 0);
        }
        try {
            encode_block(WeightBlock{0, 0, 0, -100, 0, 0, 0, 0});
            FAIL("expected ConstraintViolation");
        } catch (const ConstraintViolation& e) {
            CHECK(e.index() == 3);
        }
        // The eighth weight may be anything.
        CHECK_NOTHROW(encode_block(WeightBlock{0, 0, 0, 0, 0, 0, 0, -128}));
    }
}

TEST_CASE("decode_block") {
    CounterRng rng(99);

    SUBCASE("round trip") {
        for (int n = 0; n < 1000; ++n) {
            const WeightBlock b = random_compliant_block(rng);
            const auto r = decode_block(encode_block(b));
            CHECK(r.block == b);
            CHECK(r.outcome.status == DecodeStatus::NoError);
        }
    }

    SUBCASE("every single flip is corrected") {
        for (int n = 0; n < 200; ++n) {
            const WeightBlock b = random_compliant_block(rng);
            const std::uint64_t e = pack_block(encode_block(b));
            for (int bit = 0; bit < 64; ++bit) {
                const auto r = decode_block(unpack_block(e ^ (std::uint64_t{1} << bit)));
                REQUIRE(r.block == b);
                CHECK(r.outcome.status == DecodeStatus::CorrectedSingle);
            }
        }
    }

    SUBCASE("every double flip is detected") {
        for (int n = 0; n < 10; ++n) {
            const std::uint64_t e = pack_block(encode_block(random_compliant_block(rng)));
            for (int i = 0; i < 64; ++i) {
                for (int j = i + 1; j < 64; ++j) {
                    const auto st =
                        decode_block(unpack_block(e ^ (std::uint64_t{1} << i) ^ (std::uint64_t{1} << j))).outcome.status;
                    CHECK((st == DecodeStatus::DetectedDouble || st == DecodeStatus::DetectedUncorrectable));
                }
            }
        }
    }

    SUBCASE("sign restore leaves compliant bytes unchanged") {
        for (int v = -64; v <= 63; ++v) {
            const auto u = static_cast<std::uint8_t>(v);
            const std::uint8_t restored = static_cast<std::uint8_t>((u & 0xBF) | ((u >> 1) & 0x40));
            CHECK(static_cast<std::int8_t>(restored) == v);
        }
    }
}

TEST_CASE("protect_tensor and unprotect_tensor") {
    SUBCASE("padding") {
        CHECK(block_padding(16) == 0);
        CHECK(block_padding(12) == 4);
        CHECK(block_padding(1) == 7);
        QuantizedTensor t;
        t.values = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
        t.shape.dims = {12, 1, 1, 1};
        const auto p = protect_tensor(t);
        CHECK(p.bytes.size() == 16);
        CHECK(p.pad == 4);
        DecodeCounters c;
        CHECK(unprotect_tensor(p.bytes, 12, &c) == t.values);
        CHECK(c == DecodeCounters{});
    }

    SUBCASE("flat index of the first non-compliant weight") {
        QuantizedTensor t;
        t.values.assign(24, 0);
        t.values[7] = 127;  // eighth position, fine
        t.values[13] = -90;
        t.shape.dims = {24, 1, 1, 1};
        try {
            protect_tensor(t);
            FAIL("expected ConstraintViolation");
        } catch (const ConstraintViolation& e) {
            CHECK(e.index() == 13);
        }
    }

    SUBCASE("length checks") {
        std::vector<std::uint8_t> bytes(12, 0);
        CHECK_THROWS_AS(unprotect_tensor(bytes, 12), ArgumentError);
        bytes.resize(16);
        CHECK_THROWS_AS(unprotect_tensor(bytes, 20), ArgumentError);
    }

    SUBCASE("counters follow injected flips") {
        CounterRng rng(4);
        QuantizedTensor t;
        for (int i = 0; i < 64; ++i) {
            t.values.push_back(i % 8 == 7 ? static_cast<std::int8_t>(rng.below(256) - 128)
                                          : static_cast<std::int8_t>(static_cast<int>(rng.below(128)) - 64));
        }
        t.shape.dims = {64, 1, 1, 1};
        auto p = protect_tensor(t);
        p.bytes[0] ^= 0x01;   // block 0: single
        p.bytes[9] ^= 0x80;   // block 1: single
        p.bytes[17] ^= 0x02;  // block 2: double
        p.bytes[18] ^= 0x04;
        DecodeCounters c;
        const auto out = unprotect_tensor(p.bytes, 64, &c);
        CHECK(c.corrected == 2);
        CHECK(c.detected_double == 1);
        CHECK(std::equal(out.begin(), out.begin() + 16, t.values.begin()));
        CHECK(std::equal(out.begin() + 24, out.end(), t.values.begin() + 24));
    }
}
