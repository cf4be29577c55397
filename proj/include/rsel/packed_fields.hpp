#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cstdint>
#include <vector>

#include "rsel/bits.hpp"
#include "rsel/error.hpp"

namespace rsel {

// Fixed-width fields packed into machine words. The most significant bit of
// every field is a zero guard: sums of two canonical fields spill into the
// guard instead of the neighbouring field, so addition and subtraction are
// exact per field modulo 2^(width-1). Fields never straddle word boundaries.
class PackedFields {
public:
    static constexpr uint32_t kMaxWords = 16;

    PackedFields() : nwords_(0), width_(0), count_(0) {}

    PackedFields(uint32_t field_count, uint32_t field_width)
        : width_(field_width), count_(field_count) {
        if (field_width < 2 || field_width > 64)
            fail(ErrorKind::layout, "field width out of range");
        uint32_t fpw = 64 / field_width;
        nwords_ = (field_count + fpw - 1) / fpw;
        if (nwords_ > kMaxWords)
            fail(ErrorKind::capacity, "packed fields exceed word budget");
        words_.fill(0);
    }

    uint32_t field_count() const { return count_; }
    uint32_t field_width() const { return width_; }
    uint32_t payload_width() const { return width_ - 1; }
    uint32_t word_count() const { return nwords_; }
    const uint64_t* words() const { return words_.data(); }
    uint64_t* words() { return words_.data(); }

    // Fields are indexed 1-based, like every rank in this library.
    uint64_t get(uint32_t i) const {
        assert(i >= 1 && i <= count_);
        uint32_t fpw = 64 / width_;
        uint32_t j = i - 1;
        return (words_[j / fpw] >> ((j % fpw) * width_)) & low_mask(width_ - 1);
    }

    void set(uint32_t i, uint64_t v) {
        assert(i >= 1 && i <= count_);
        uint32_t fpw = 64 / width_;
        uint32_t j = i - 1;
        uint64_t m = low_mask(width_) << ((j % fpw) * width_);
        words_[j / fpw] = (words_[j / fpw] & ~m) | ((v & low_mask(width_ - 1)) << ((j % fpw) * width_));
    }

    bool same_layout(const PackedFields& o) const {
        return width_ == o.width_ && count_ == o.count_;
    }

    uint64_t guard_mask() const {
        uint32_t fpw = 64 / width_;
        uint64_t g = 0;
        for (uint32_t i = 0; i < fpw; ++i) g |= (1ull << (width_ - 1)) << (i * width_);
        return g;
    }

    bool is_zero() const {
        for (uint32_t i = 0; i < nwords_; ++i)
            if (words_[i]) return false;
        return true;
    }

private:
    std::array<uint64_t, kMaxWords> words_{};
    uint32_t nwords_;
    uint32_t width_; // includes the guard bit
    uint32_t count_;

    friend PackedFields pf_add(const PackedFields&, const PackedFields&);
    friend PackedFields pf_sub(const PackedFields&, const PackedFields&);
};

// Fieldwise sum modulo 2^(width-1). Guard bits absorb per-field overflow and
// are cleared afterwards, so carries never reach the next field.
inline PackedFields pf_add(const PackedFields& a, const PackedFields& b) {
    if (!a.same_layout(b)) fail(ErrorKind::layout, "packed field layouts differ");
    PackedFields r(a.count_, a.width_);
    uint64_t g = a.guard_mask();
    for (uint32_t i = 0; i < a.nwords_; ++i)
        r.words_[i] = (a.words_[i] + b.words_[i]) & ~g;
    return r;
}

// Fieldwise difference modulo 2^(width-1). Setting the minuend guards to one
// keeps borrows inside their field.
inline PackedFields pf_sub(const PackedFields& a, const PackedFields& b) {
    if (!a.same_layout(b)) fail(ErrorKind::layout, "packed field layouts differ");
    PackedFields r(a.count_, a.width_);
    uint64_t g = a.guard_mask();
    for (uint32_t i = 0; i < a.nwords_; ++i)
        r.words_[i] = ((a.words_[i] | g) - b.words_[i]) & ~g;
    return r;
}

// A run of consecutive symbols read out of a bit-packed sequence. Stored
// symbol values are 0-based (symbol s is stored as s-1) and sym_width bits
// wide; a chunk never carries more than half a machine word of payload.
struct SymbolChunk {
    uint64_t bits = 0;
    uint32_t count = 0;
    uint32_t sym_width = 1;
};

enum class FreqKernel { table, compare };

namespace detail {

// chunk16_freq_table(w): for every 16-bit pattern, the count of each stored
// value among its floor(16/w) leading symbols. Entry layout: pattern * 2^w
// bytes of per-value counts.
inline const std::vector<uint8_t>& chunk16_freq_table(uint32_t w) {
    static std::vector<uint8_t> tables[7];
    assert(w >= 1 && w <= 6);
    std::vector<uint8_t>& t = tables[w];
    if (t.empty()) {
        uint32_t group = 16 / w;
        uint32_t vals = 1u << w;
        t.assign((1ull << 16) * vals, 0);
        for (uint32_t pat = 0; pat < (1u << 16); ++pat) {
            uint8_t* row = &t[uint64_t(pat) * vals];
            for (uint32_t j = 0; j < group; ++j)
                row[(pat >> (j * w)) & (vals - 1)]++;
        }
    }
    return t;
}

inline void freq_by_table(const SymbolChunk& c, uint32_t* counts, uint32_t nvals) {
    const uint32_t w = c.sym_width;
    const std::vector<uint8_t>& table = chunk16_freq_table(w);
    const uint32_t group = 16 / w;
    const uint32_t vals = 1u << w;
    uint32_t done = 0;
    while (done < c.count) {
        uint32_t take = std::min(group, c.count - done);
        uint64_t part = (c.bits >> (done * w)) & low_mask(take * w);
        const uint8_t* row = &table[(part & 0xFFFF) * vals];
        for (uint32_t v = 0; v < nvals; ++v) counts[v] += row[v];
        // the table always counts a full group; masked-off tail symbols
        // read as stored value 0 and must be taken back out
        counts[0] -= group - take;
        done += take;
    }
}

// Branchless comparison kernel: one zero-field detection per value of the
// alphabet, word-parallel across the chunk's symbols.
inline void freq_by_compare(const SymbolChunk& c, uint32_t* counts, uint32_t nvals) {
    for (uint32_t v = 0; v < nvals; ++v)
        counts[v] += count_matching_fields(c.bits, c.count, c.sym_width, v);
}

} // namespace detail

// Frequency of every symbol in a chunk, as packed fields: field s holds the
// number of occurrences of symbol s (1-based; stored value s-1).
inline PackedFields pf_freq(const SymbolChunk& chunk, uint32_t sigma,
                            uint32_t out_field_width = 16,
                            FreqKernel kernel = FreqKernel::table) {
    if (chunk.sym_width < 1 || chunk.sym_width > 6)
        fail(ErrorKind::layout, "symbol width out of range");
    if (chunk.count * chunk.sym_width > 32)
        fail(ErrorKind::capacity, "chunk exceeds half a machine word");
    uint32_t nvals = 1u << chunk.sym_width;
    if (sigma > nvals) nvals = sigma; // sigma may exceed 2^w only via caller bug
    uint32_t counts[64] = {0};
    if (nvals > 64) fail(ErrorKind::capacity, "alphabet too large");
    if (kernel == FreqKernel::table)
        detail::freq_by_table(chunk, counts, std::min(nvals, 1u << chunk.sym_width));
    else
        detail::freq_by_compare(chunk, counts, std::min(nvals, 1u << chunk.sym_width));
    for (uint32_t v = sigma; v < (1u << chunk.sym_width); ++v)
        if (counts[v]) fail(ErrorKind::corrupt, "stored symbol outside alphabet");
    PackedFields out(sigma, out_field_width);
    for (uint32_t s = 1; s <= sigma; ++s) out.set(s, counts[s - 1]);
    return out;
}

} // namespace rsel
