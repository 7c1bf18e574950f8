// SPDX-License-Identifier: Apache-2.0
#include <set>

#include "doctest.h"
#include "parity_oracle.hpp"
#include "zsecc/error.hpp"
#include "zsecc/rng.hpp"
#include "zsecc/secded.hpp"

using namespace zsecc;

namespace {

BitVec random_bits(CounterRng& rng, std::size_t n) { return BitVec(n, rng(), rng()); }

std::vector<int> to_ints(const BitVec& v) {
    std::vector<int> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v.get(i);
    return out;
}

}  // namespace

TEST_CASE("build_code parameters") {
    const auto a = SecDedCode::build(57);
    CHECK(a.spec() == CodeSpec{64, 57, 1, 7});
    const auto b = SecDedCode::build(64);
    CHECK(b.spec() == CodeSpec{72, 64, 1, 8});
    CHECK_THROWS_AS(SecDedCode::build(10), ConfigError);
    CHECK_THROWS_AS(SecDedCode::build(0), ConfigError);
}

TEST_CASE("parity structure invariants") {
    for (std::size_t d : {57u, 64u}) {
        const auto code = SecDedCode::build(d);
        const auto& spec = code.spec();
        const auto& st = code.structure();
        CAPTURE(d);
        CHECK(spec.k == spec.d + spec.r);
        CHECK((std::size_t{1} << (spec.r - 1)) >= spec.d + spec.r);
        CHECK(st.check_positions.size() == spec.r);
        CHECK(st.data_positions.size() == spec.d);
        CHECK(st.check_positions.back() == spec.k);

        std::set<std::size_t> all(st.check_positions.begin(), st.check_positions.end());
        all.insert(st.data_positions.begin(), st.data_positions.end());
        CHECK(all.size() == spec.k);
        CHECK(*all.begin() == 1);
        CHECK(*all.rbegin() == spec.k);
        CHECK(std::is_sorted(st.data_positions.begin(), st.data_positions.end()));

        const std::uint64_t hamming_mask = (std::uint64_t{1} << (spec.r - 1)) - 1;
        std::set<std::uint64_t> hamming_cols;
        for (std::size_t p = 1; p < spec.k; ++p) {
            const std::uint64_t col = st.columns[p - 1].lo();
            CHECK(col != 0);
            CHECK(((col >> (spec.r - 1)) & 1U) == 1U);
            hamming_cols.insert(col & hamming_mask);
        }
        CHECK(hamming_cols.size() == spec.k - 1);
        for (std::size_t i = 0; i + 1 < st.check_positions.size(); ++i) {
            CHECK(std::popcount(st.columns[st.check_positions[i] - 1].lo() & hamming_mask) == 1);
        }
        CHECK(st.columns[spec.k - 1].lo() == (std::uint64_t{1} << (spec.r - 1)));
    }
}

TEST_CASE("build_code is deterministic") {
    const auto a = SecDedCode::build(64);
    const auto b = SecDedCode::build(64);
    CHECK(a.structure() == b.structure());
    CHECK(a.spec() == b.spec());
}

TEST_CASE("encode") {
    const auto& code = secded_64_57();

    SUBCASE("zero maps to zero") { CHECK(code.encode(BitVec(57)) == BitVec(64)); }

    SUBCASE("length mismatch") { CHECK_THROWS_AS(code.encode(BitVec(56)), ArgumentError); }

    SUBCASE("unit data bit: check bits equal the column of its position") {
        BitVec data(57);
        data.set(0, true);
        const BitVec c = code.encode(data);
        const std::size_t pos = code.structure().data_positions[0];
        CHECK(pos == 3);
        // Column of position 3 is binary 3 plus overall parity: checks at 1 and 2
        // set, overall parity set (three ones plus the data bit is even).
        CHECK(c.get(0));
        CHECK(c.get(1));
        CHECK(c.get(2));
        CHECK(c.get(63));
        CHECK(c.popcount() == 4);
        CHECK(testing::is_zero(testing::multiply(testing::textbook_h(64, 7), to_ints(c))));
    }

    SUBCASE("random data satisfies the independent parity-check matrix") {
        CounterRng rng(7);
        for (const SecDedCode* cp : {&secded_64_57(), &secded_72_64()}) {
            const auto h = testing::textbook_h(cp->spec().k, cp->spec().r);
            for (int n = 0; n < 200; ++n) {
                const BitVec data = random_bits(rng, cp->spec().d);
                const BitVec c = cp->encode(data);
                CHECK(testing::is_zero(testing::multiply(h, to_ints(c))));
                CHECK(cp->syndrome(c) == 0);
                CHECK(c.popcount() % 2 == 0);
                CHECK(cp->extract_data(c) == data);
            }
        }
    }

    SUBCASE("linearity") {
        CounterRng rng(11);
        for (const SecDedCode* cp : {&secded_64_57(), &secded_72_64()}) {
            for (int n = 0; n < 500; ++n) {
                const BitVec a = random_bits(rng, cp->spec().d);
                const BitVec b = random_bits(rng, cp->spec().d);
                CHECK(cp->encode(a ^ b) == (cp->encode(a) ^ cp->encode(b)));
            }
        }
    }
}

TEST_CASE("decode") {
    CounterRng rng(3);
    for (const SecDedCode* cp : {&secded_64_57(), &secded_72_64()}) {
        const std::size_t k = cp->spec().k;
        CAPTURE(k);

        SUBCASE("length mismatch") { CHECK_THROWS_AS(cp->decode(BitVec(k - 1)), ArgumentError); }

        SUBCASE("round trip and every single flip") {
            for (int n = 0; n < 50; ++n) {
                const BitVec data = random_bits(rng, cp->spec().d);
                const BitVec c = cp->encode(data);
                const auto clean = cp->decode(c);
                CHECK(clean.data == data);
                CHECK(clean.outcome.status == DecodeStatus::NoError);
                for (std::size_t i = 1; i <= k; ++i) {
                    BitVec w = c;
                    w.flip(i - 1);
                    const auto r = cp->decode(w);
                    REQUIRE(r.outcome.status == DecodeStatus::CorrectedSingle);
                    CHECK(r.outcome.position == i);
                    CHECK(r.data == data);
                }
            }
        }

        SUBCASE("every double flip is detected") {
            for (int n = 0; n < 5; ++n) {
                const BitVec c = cp->encode(random_bits(rng, cp->spec().d));
                for (std::size_t i = 0; i < k; ++i) {
                    for (std::size_t j = i + 1; j < k; ++j) {
                        BitVec w = c;
                        w.flip(i);
                        w.flip(j);
                        const auto st = cp->decode(w).outcome.status;
                        CHECK((st == DecodeStatus::DetectedDouble || st == DecodeStatus::DetectedUncorrectable));
                    }
                }
            }
        }
    }
}

TEST_CASE("shortened code flags syndromes outside the code") {
    const auto& code = secded_72_64();
    // Flips at 36 and 64 give Hamming syndrome 100 (a dropped position) with
    // even parity; a third flip on the overall-parity bit makes parity odd.
    const BitVec c = code.encode(BitVec(64, 0x0123456789ABCDEFULL));
    BitVec w = c;
    w.flip(35);
    w.flip(63);
    CHECK(code.decode(w).outcome.status == DecodeStatus::DetectedDouble);
    w.flip(71);
    CHECK(code.decode(w).outcome.status == DecodeStatus::DetectedUncorrectable);
}

TEST_CASE("ecc72 memory-word helpers") {
    CounterRng rng(5);
    for (int n = 0; n < 100; ++n) {
        const std::uint64_t data = rng();
        const std::uint8_t check = ecc72_check_byte(data);
        auto r = ecc72_decode(data, check);
        CHECK(r.data == data);
        CHECK(r.outcome.status == DecodeStatus::NoError);
        for (int b = 0; b < 64; ++b) {
            r = ecc72_decode(data ^ (std::uint64_t{1} << b), check);
            CHECK(r.data == data);
            CHECK(r.outcome.status == DecodeStatus::CorrectedSingle);
        }
        for (int b = 0; b < 8; ++b) {
            r = ecc72_decode(data, static_cast<std::uint8_t>(check ^ (1U << b)));
            CHECK(r.data == data);
            CHECK(r.outcome.status == DecodeStatus::CorrectedSingle);
        }
    }
}
