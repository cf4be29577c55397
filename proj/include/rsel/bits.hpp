#pragma once

#include <bit>
#include <cstdint>

namespace rsel {

// Number of bits needed to write x in binary; 0 for x == 0.
inline uint32_t ceil_log2(uint64_t x) {
    if (x <= 1) return x == 0 ? 0 : 0;
    return 64 - std::countl_zero(x - 1);
}

inline uint32_t floor_log2(uint64_t x) {
    return x == 0 ? 0 : 63 - std::countl_zero(x);
}

inline uint64_t low_mask(uint32_t bits) {
    return bits >= 64 ? ~0ull : (1ull << bits) - 1;
}

// Read `width` (<= 64) bits starting at bit `pos` of a word array. The array
// must own at least one word past the last payload bit touched, so straddling
// reads never run off the end.
inline uint64_t get_bits(const uint64_t* w, uint64_t pos, uint32_t width) {
    uint64_t word = pos >> 6;
    uint32_t off = static_cast<uint32_t>(pos & 63);
    uint64_t v = w[word] >> off;
    if (off + width > 64) v |= w[word + 1] << (64 - off);
    return v & low_mask(width);
}

inline void set_bits(uint64_t* w, uint64_t pos, uint32_t width, uint64_t value) {
    uint64_t word = pos >> 6;
    uint32_t off = static_cast<uint32_t>(pos & 63);
    uint64_t m = low_mask(width);
    value &= m;
    w[word] = (w[word] & ~(m << off)) | (value << off);
    if (off + width > 64) {
        uint32_t hi = off + width - 64;
        w[word + 1] = (w[word + 1] & ~low_mask(hi)) | (value >> (64 - off));
    }
}

// 0xAB -> 0xABABAB... at stride `width` bits, for the low `count` fields.
inline uint64_t broadcast_field(uint64_t v, uint32_t width, uint32_t count) {
    uint64_t r = 0;
    for (uint32_t i = 0; i < count; ++i) r |= v << (i * width);
    return r;
}

// Fields of `bits` equal to v, among the low `count` fields of `width` bits
// each. Zero detection keeps every carry inside its field, so neighbouring
// fields cannot contaminate the result.
inline uint32_t count_matching_fields(uint64_t bits, uint32_t count, uint32_t width,
                                      uint64_t v) {
    uint64_t x = bits ^ broadcast_field(v, width, count);
    uint64_t high = broadcast_field(1ull << (width - 1), width, count);
    uint64_t low = broadcast_field((1ull << (width - 1)) - 1, width, count);
    uint64_t sum = (x & low) + low; // high bit set iff the low part is nonzero
    return static_cast<uint32_t>(std::popcount(~(sum | x | low) & high));
}

// FNV-1a, used for deterministic answer digests.
struct Fnv1a {
    uint64_t h = 1469598103934665603ull;
    void feed(const void* data, uint64_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (uint64_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    }
    void feed_u64(uint64_t v) { feed(&v, sizeof v); }
};

} // namespace rsel
