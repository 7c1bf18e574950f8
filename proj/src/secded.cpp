// SPDX-License-Identifier: Apache-2.0
#include "zsecc/secded.hpp"

#include <bit>

#include "zsecc/error.hpp"

namespace zsecc {

std::string_view to_string(DecodeStatus s) {
    switch (s) {
        case DecodeStatus::NoError: return "NoError";
        case DecodeStatus::CorrectedSingle: return "CorrectedSingle";
        case DecodeStatus::DetectedDouble: return "DetectedDouble";
        case DecodeStatus::DetectedUncorrectable: return "DetectedUncorrectable";
    }
    return "?";
}

SecDedCode SecDedCode::build(std::size_t data_bits) {
    std::size_t r = 0;
    if (data_bits == 57) {
        r = 7;
    } else if (data_bits == 64) {
        r = 8;
    } else {
        throw ConfigError("unsupported SEC-DED data width " + std::to_string(data_bits) + " (expected 57 or 64)");
    }

    SecDedCode code;
    const std::size_t k = data_bits + r;
    code.spec_ = CodeSpec{k, data_bits, 1, r};

    const std::uint32_t overall = 1U << (r - 1);
    auto& st = code.structure_;
    st.columns.reserve(k);
    for (std::size_t p = 1; p <= k; ++p) {
        const std::uint32_t col = p < k ? static_cast<std::uint32_t>(p) | overall : overall;
        st.columns.emplace_back(r, col);
        if (p == k || std::has_single_bit(p)) {
            st.check_positions.push_back(p);
        } else {
            st.data_positions.push_back(p);
        }
    }

    code.rows_.assign(r, BitVec(k));
    for (std::size_t p = 1; p <= k; ++p) {
        for (std::size_t j = 0; j < r; ++j) {
            if (st.columns[p - 1].get(j)) code.rows_[j].set(p - 1, true);
        }
    }

    code.syndrome_to_pos_.assign(std::size_t{1} << r, 0);
    for (std::size_t p = 1; p <= k; ++p) {
        code.syndrome_to_pos_[st.columns[p - 1].lo()] = static_cast<std::uint16_t>(p);
    }
    return code;
}

BitVec SecDedCode::encode(const BitVec& data) const {
    if (data.size() != spec_.d) {
        throw ArgumentError("encode: expected " + std::to_string(spec_.d) + " data bits, got " +
                            std::to_string(data.size()));
    }
    BitVec word(spec_.k);
    for (std::size_t i = 0; i < spec_.d; ++i) {
        if (data.get(i)) word.set(structure_.data_positions[i] - 1, true);
    }
    // Hamming checks first (row j owns position 2^j), overall parity last.
    for (std::size_t j = 0; j + 1 < spec_.r; ++j) {
        word.set((std::size_t{1} << j) - 1, word.parity_with(rows_[j]));
    }
    word.set(spec_.k - 1, word.parity_with(rows_[spec_.r - 1]));
    return word;
}

std::uint32_t SecDedCode::syndrome(const BitVec& word) const {
    std::uint32_t s = 0;
    for (std::size_t j = 0; j < spec_.r; ++j) {
        if (word.parity_with(rows_[j])) s |= 1U << j;
    }
    return s;
}

BitVec SecDedCode::extract_data(const BitVec& word) const {
    BitVec data(spec_.d);
    for (std::size_t i = 0; i < spec_.d; ++i) {
        if (word.get(structure_.data_positions[i] - 1)) data.set(i, true);
    }
    return data;
}

DecodeResult SecDedCode::decode(const BitVec& word) const {
    if (word.size() != spec_.k) {
        throw ArgumentError("decode: expected " + std::to_string(spec_.k) + " code bits, got " +
                            std::to_string(word.size()));
    }
    const std::uint32_t s = syndrome(word);
    if (s == 0) return {extract_data(word), {DecodeStatus::NoError, 0}};

    const bool odd = (s >> (spec_.r - 1)) & 1U;
    if (!odd) return {extract_data(word), {DecodeStatus::DetectedDouble, 0}};

    const std::size_t pos = syndrome_to_pos_[s];
    if (pos == 0) return {extract_data(word), {DecodeStatus::DetectedUncorrectable, 0}};

    BitVec fixed = word;
    fixed.flip(pos - 1);
    return {extract_data(fixed), {DecodeStatus::CorrectedSingle, pos}};
}

const SecDedCode& secded_64_57() {
    static const SecDedCode code = SecDedCode::build(57);
    return code;
}

const SecDedCode& secded_72_64() {
    static const SecDedCode code = SecDedCode::build(64);
    return code;
}

}  // namespace zsecc

namespace zsecc {

std::uint8_t ecc72_check_byte(std::uint64_t data) {
    const auto& code = secded_72_64();
    const BitVec word = code.encode(BitVec(64, data));
    std::uint8_t check = 0;
    const auto& cp = code.structure().check_positions;
    for (std::size_t i = 0; i < cp.size(); ++i) {
        if (word.get(cp[i] - 1)) check |= static_cast<std::uint8_t>(1U << i);
    }
    return check;
}

Ecc72Decode ecc72_decode(std::uint64_t data, std::uint8_t check) {
    const auto& code = secded_72_64();
    const auto& st = code.structure();
    BitVec word(72);
    for (std::size_t i = 0; i < 64; ++i) {
        if ((data >> i) & 1U) word.set(st.data_positions[i] - 1, true);
    }
    for (std::size_t i = 0; i < st.check_positions.size(); ++i) {
        if ((check >> i) & 1U) word.set(st.check_positions[i] - 1, true);
    }
    const DecodeResult res = code.decode(word);
    return {res.data.lo(), res.outcome};
}

}  // namespace zsecc
