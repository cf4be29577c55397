#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

#include "rsel/bits.hpp"
#include "rsel/error.hpp"
#include "rsel/packed_fields.hpp"

namespace rsel {

// How counts are cut into sections and packed. One layout is shared by every
// matrix of a ranking tree: rows = labels [1..f1] (children of the owning
// main-tree node), and sections chop a count_bits-wide value into payload
// windows that overlap by `overlap` bits so low-order carry noise cannot
// leak across a window boundary. Section 1 holds the most significant bits.
struct SectionLayout {
    uint32_t rows = 1;        // f1
    uint32_t count_bits = 8;  // width of a stored count
    uint32_t overlap = 2;     // o
    uint32_t field_width = 8; // per-field bits in a packed word, incl. guard
    uint32_t payload = 7;     // field_width - 1
    uint32_t step = 5;        // payload - overlap
    uint32_t sections = 1;    // g
    uint32_t words_per_section = 1;

    static SectionLayout make(uint32_t rows, uint32_t count_bits, uint32_t overlap) {
        SectionLayout l;
        l.rows = rows;
        l.count_bits = count_bits;
        l.overlap = overlap;
        l.field_width = std::max(overlap + 2, rows ? 64 / rows : 64);
        if (l.field_width > 64) l.field_width = 64;
        l.payload = l.field_width - 1;
        l.step = l.payload - overlap;
        l.sections = l.payload >= count_bits
                         ? 1
                         : 1 + (count_bits - l.payload + l.step - 1) / l.step;
        uint32_t fpw = 64 / l.field_width;
        l.words_per_section = (rows + fpw - 1) / fpw;
        return l;
    }

    // low bit position of section s (1 = most significant section)
    uint32_t section_lo(uint32_t s) const {
        assert(s >= 1 && s <= sections);
        return (sections - s) * step;
    }

    uint64_t section_of(uint64_t value, uint32_t s) const {
        return (value >> section_lo(s)) & low_mask(payload);
    }
};

// Cumulative count matrix stored inside a ranking-tree node. Entry (p, q) is
// the number of points in ranking children <= q whose label is <= p, kept as
// a plain table and, per column, as packed section words. Point updates are
// buffered and folded in bulk, so a single update costs O(1) plus a flush
// every `rows` updates.
class MatrixStructure {
public:
    MatrixStructure() = default;

    // Build from per-ranking-child label counts: counts[q][p-1] = number of
    // points under ranking child q+1 with label p.
    MatrixStructure(const SectionLayout& lay, std::span<const std::vector<uint64_t>> child_label_counts)
        : lay_(lay), cols_(static_cast<uint32_t>(child_label_counts.size())) {
        table_.assign(uint64_t(lay_.rows) * cols_, 0);
        for (uint32_t q = 0; q < cols_; ++q) {
            if (child_label_counts[q].size() != lay_.rows)
                fail(ErrorKind::range, "label vector does not match row count");
            uint64_t cum = 0;
            for (uint32_t p = 0; p < lay_.rows; ++p) {
                cum += child_label_counts[q][p];
                at(p, q) = cum + (q ? at(p, q - 1) : 0);
            }
        }
        check_width();
        rebuild_packed();
    }

    uint32_t rows() const { return lay_.rows; }
    uint32_t cols() const { return cols_; }
    const SectionLayout& layout() const { return lay_; }
    size_t pending_size() const { return pending_.size(); }

    // Exact entry M[p][q] with the pending buffer applied; row 0 and column
    // 0 are virtual zeros.
    uint64_t entry(uint32_t p, uint32_t q) const {
        assert(p <= lay_.rows);
        if (q > cols_) fail(ErrorKind::range, "column out of range");
        if (q == 0 || p == 0) return 0;
        uint64_t v = at(p - 1, q - 1);
        for (const Delta& d : pending_)
            if (d.p <= p && d.q <= q) v = static_cast<uint64_t>(static_cast<int64_t>(v) + d.sign);
        return v;
    }

    // Per-row difference of two columns, pending applied exactly.
    std::vector<uint64_t> column_diff(uint32_t q_hi, uint32_t q_lo) const {
        if (q_lo > q_hi || q_hi > cols_) fail(ErrorKind::range, "column range invalid");
        std::vector<uint64_t> out(lay_.rows, 0);
        for (uint32_t p = 1; p <= lay_.rows; ++p) out[p - 1] = entry(p, q_hi) - entry(p, q_lo);
        return out;
    }

    uint64_t entry_diff(uint32_t p, uint32_t q_hi, uint32_t q_lo) const {
        return entry(p, q_hi) - entry(p, q_lo);
    }

    // Section s of column q_hi minus column q_lo, as packed fields. Requires
    // a flushed structure: the caller flushes before taking the packed path.
    PackedFields packed_section_diff(uint32_t q_hi, uint32_t q_lo, uint32_t s) const {
        if (q_lo > q_hi || q_hi > cols_) fail(ErrorKind::range, "column range invalid");
        if (s < 1 || s > lay_.sections) fail(ErrorKind::range, "section out of range");
        if (!pending_.empty())
            fail(ErrorKind::invariant, "packed query against unflushed matrix");
        return pf_sub(packed_column(q_hi, s), packed_column(q_lo, s));
    }

    // Logical M[p][q] += sign for all p >= p0, q >= q0. Buffered; flushed
    // once the buffer outgrows the row count.
    void apply(uint32_t p0, uint32_t q0, int sign) {
        assert(p0 >= 1 && p0 <= lay_.rows && q0 >= 1 && q0 <= cols_);
        assert(sign == 1 || sign == -1);
        pending_.push_back(Delta{static_cast<uint16_t>(p0), static_cast<uint16_t>(q0),
                                 static_cast<int8_t>(sign)});
        if (pending_.size() > lay_.rows) rebuild();
    }

    // Fold the pending buffer into the table and refresh the packed words.
    void rebuild() {
        if (pending_.empty()) return;
        for (const Delta& d : pending_)
            for (uint32_t p = d.p; p <= lay_.rows; ++p)
                for (uint32_t q = d.q; q <= cols_; ++q)
                    at(p - 1, q - 1) = static_cast<uint64_t>(
                        static_cast<int64_t>(at(p - 1, q - 1)) + d.sign);
        pending_.clear();
        check_width();
        rebuild_packed();
    }

    // Both representations and the monotonicity of the table; throws on any
    // mismatch. Pending deltas are allowed and checked via logical values.
    void validate(uint64_t expected_total) const {
        if (entry(lay_.rows, cols_) != expected_total)
            fail(ErrorKind::invariant, "matrix total does not match node weight");
        for (uint32_t p = 1; p <= lay_.rows; ++p)
            for (uint32_t q = 1; q <= cols_; ++q) {
                uint64_t v = entry(p, q);
                if (p > 1 && v < entry(p - 1, q))
                    fail(ErrorKind::invariant, "matrix rows not cumulative");
                if (q > 1 && v < entry(p, q - 1))
                    fail(ErrorKind::invariant, "matrix columns not cumulative");
            }
        // reassembling the stored sections must reproduce the table bits
        if (pending_.empty()) {
            for (uint32_t q = 1; q <= cols_; ++q)
                for (uint32_t p = 1; p <= lay_.rows; ++p) {
                    uint64_t v = 0;
                    for (uint32_t s = 1; s <= lay_.sections; ++s) {
                        PackedFields w = packed_column(q, s);
                        uint64_t sec = w.get(p);
                        uint64_t lo = lay_.section_lo(s);
                        v &= ~(low_mask(lay_.payload) << lo);
                        v |= sec << lo;
                    }
                    if (v != at(p - 1, q - 1))
                        fail(ErrorKind::invariant, "packed sections disagree with table");
                }
        }
    }

    uint64_t space_bits() const {
        return table_.size() * 64 + packed_.size() * 64 + pending_.capacity() * 32 + 128;
    }

private:
    struct Delta {
        uint16_t p, q;
        int8_t sign;
    };

    SectionLayout lay_;
    uint32_t cols_ = 0;
    std::vector<uint64_t> table_;   // row-major cumulative counts
    std::vector<uint64_t> packed_;  // [section][column] words
    std::vector<Delta> pending_;

    uint64_t& at(uint32_t p, uint32_t q) { return table_[uint64_t(p) * cols_ + q]; }
    uint64_t at(uint32_t p, uint32_t q) const { return table_[uint64_t(p) * cols_ + q]; }

    void check_width() const {
        if (cols_ && lay_.rows && at(lay_.rows - 1, cols_ - 1) >> lay_.count_bits)
            fail(ErrorKind::capacity, "count exceeds section bit budget");
    }

    PackedFields packed_column(uint32_t q, uint32_t s) const {
        PackedFields w(lay_.rows, lay_.field_width);
        if (q == 0) return w;
        const uint64_t* src = &packed_[(uint64_t(s - 1) * cols_ + (q - 1)) * lay_.words_per_section];
        std::copy(src, src + lay_.words_per_section, w.words());
        return w;
    }

    void rebuild_packed() {
        packed_.assign(uint64_t(lay_.sections) * cols_ * lay_.words_per_section, 0);
        for (uint32_t s = 1; s <= lay_.sections; ++s)
            for (uint32_t q = 1; q <= cols_; ++q) {
                PackedFields w(lay_.rows, lay_.field_width);
                for (uint32_t p = 1; p <= lay_.rows; ++p)
                    w.set(p, lay_.section_of(at(p - 1, q - 1), s));
                uint64_t* dst = &packed_[(uint64_t(s - 1) * cols_ + (q - 1)) * lay_.words_per_section];
                std::copy(w.words(), w.words() + lay_.words_per_section, dst);
            }
    }
};

} // namespace rsel
