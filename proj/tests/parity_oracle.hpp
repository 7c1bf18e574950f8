// SPDX-License-Identifier: Apache-2.0
// Textbook extended-Hamming parity-check matrices, built independently of
// SecDedCode, for checking H * c = 0 on encoder output.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace zsecc::testing {

// H as r rows by k columns of 0/1. Column p (1-indexed) is binary(p) over
// the first r-1 rows with a 1 in the overall row, except column k, which is
// the overall row alone.
inline std::vector<std::vector<int>> textbook_h(std::size_t k, std::size_t r) {
    std::vector<std::vector<int>> h(r, std::vector<int>(k, 0));
    for (std::size_t p = 1; p <= k; ++p) {
        if (p < k) {
            for (std::size_t j = 0; j + 1 < r; ++j) h[j][p - 1] = (p >> j) & 1U;
        }
        h[r - 1][p - 1] = 1;
    }
    return h;
}

// H * c over GF(2), with c given as a vector of bits in logical order.
inline std::vector<int> multiply(const std::vector<std::vector<int>>& h, const std::vector<int>& c) {
    std::vector<int> s(h.size(), 0);
    for (std::size_t j = 0; j < h.size(); ++j) {
        int acc = 0;
        for (std::size_t i = 0; i < c.size(); ++i) acc ^= h[j][i] & c[i];
        s[j] = acc;
    }
    return s;
}

inline bool is_zero(const std::vector<int>& s) {
    for (int v : s) {
        if (v) return false;
    }
    return true;
}

}  // namespace zsecc::testing
