// SPDX-License-Identifier: Apache-2.0
#include "zsecc/inplace_codec.hpp"

#include <cstring>
#include <string>

#include "zsecc/error.hpp"

namespace zsecc {

namespace {

constexpr std::uint64_t kSignRestoreMask = 0x0040404040404040ULL;  // bit 6 of bytes 0..6

SwizzleMap make_swizzle() {
    SwizzleMap m;
    std::size_t c = 0;
    std::size_t d = 0;
    for (std::uint8_t bit = 0; bit < 64; ++bit) {
        if (bit % 8 == 6 && bit / 8 < 7) {
            m.check_phys[c++] = bit;
        } else {
            m.data_phys[d++] = bit;
        }
    }
    return m;
}

std::uint64_t sign_restore(std::uint64_t bits) {
    // Bit 7 of each byte shifted down onto bit 6.
    return (bits & ~kSignRestoreMask) | ((bits >> 1) & kSignRestoreMask);
}

}  // namespace

std::uint64_t pack_block(const WeightBlock& b) {
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < 8; ++i) bits |= std::uint64_t{static_cast<std::uint8_t>(b[i])} << (8 * i);
    return bits;
}

WeightBlock unpack_block(std::uint64_t bits) {
    WeightBlock b{};
    for (std::size_t i = 0; i < 8; ++i) b[i] = static_cast<std::int8_t>((bits >> (8 * i)) & 0xFF);
    return b;
}

const SwizzleMap& swizzle_map() {
    static const SwizzleMap m = make_swizzle();
    return m;
}

WeightBlock encode_block(const WeightBlock& b) {
    for (std::size_t i = 0; i < 7; ++i) {
        if (!has_noninformative_bit(b[i])) throw ConstraintViolation(i);
    }
    const auto& code = secded_64_57();
    const auto& sw = swizzle_map();
    const std::uint64_t bits = pack_block(b);

    BitVec data(57);
    for (std::size_t i = 0; i < 57; ++i) data.set(i, (bits >> sw.data_phys[i]) & 1U);
    const BitVec word = code.encode(data);

    std::uint64_t out = bits & ~kSignRestoreMask;
    const auto& cp = code.structure().check_positions;
    for (std::size_t i = 0; i < 7; ++i) {
        if (word.get(cp[i] - 1)) out |= std::uint64_t{1} << sw.check_phys[i];
    }
    return unpack_block(out);
}

BlockDecodeResult decode_block(const WeightBlock& b) {
    const auto& code = secded_64_57();
    const auto& st = code.structure();
    const auto& sw = swizzle_map();
    const std::uint64_t bits = pack_block(b);

    BitVec word(64);
    for (std::size_t i = 0; i < 57; ++i) word.set(st.data_positions[i] - 1, (bits >> sw.data_phys[i]) & 1U);
    for (std::size_t i = 0; i < 7; ++i) word.set(st.check_positions[i] - 1, (bits >> sw.check_phys[i]) & 1U);

    const DecodeResult res = code.decode(word);
    std::uint64_t out = 0;
    for (std::size_t i = 0; i < 57; ++i) {
        if (res.data.get(i)) out |= std::uint64_t{1} << sw.data_phys[i];
    }
    return {unpack_block(sign_restore(out)), res.outcome};
}

void DecodeCounters::record(const DecodeOutcome& o) {
    switch (o.status) {
        case DecodeStatus::NoError: break;
        case DecodeStatus::CorrectedSingle: ++corrected; break;
        case DecodeStatus::DetectedDouble: ++detected_double; break;
        case DecodeStatus::DetectedUncorrectable: ++detected_uncorrectable; break;
    }
}

ProtectedPayload protect_tensor(const QuantizedTensor& t) {
    ProtectedPayload p;
    p.pad = block_padding(t.values.size());
    const std::size_t padded = t.values.size() + p.pad;
    p.bytes.assign(padded, 0);
    for (std::size_t base = 0; base < padded; base += 8) {
        WeightBlock blk{};
        for (std::size_t i = 0; i < 8 && base + i < t.values.size(); ++i) blk[i] = t.values[base + i];
        WeightBlock enc;
        try {
            enc = encode_block(blk);
        } catch (const ConstraintViolation& e) {
            throw ConstraintViolation(base + e.index());
        }
        for (std::size_t i = 0; i < 8; ++i) p.bytes[base + i] = static_cast<std::uint8_t>(enc[i]);
    }
    return p;
}

std::vector<std::int8_t> unprotect_tensor(std::span<const std::uint8_t> bytes, std::size_t count,
                                          DecodeCounters* counters) {
    if (bytes.size() % 8 != 0 || count > bytes.size() || bytes.size() - count >= 8) {
        throw ArgumentError("unprotect_tensor: " + std::to_string(bytes.size()) +
                            " payload bytes cannot hold " + std::to_string(count) + " weights");
    }
    std::vector<std::int8_t> out(count);
    for (std::size_t base = 0; base < bytes.size(); base += 8) {
        WeightBlock blk;
        std::memcpy(blk.data(), bytes.data() + base, 8);
        const BlockDecodeResult r = decode_block(blk);
        if (counters) counters->record(r.outcome);
        for (std::size_t i = 0; i < 8 && base + i < count; ++i) out[base + i] = r.block[i];
    }
    return out;
}

}  // namespace zsecc
