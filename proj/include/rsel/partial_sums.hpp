#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

#include "rsel/error.hpp"

namespace rsel {

// Searchable partial sums over a short sequence of nonnegative counts, one
// per tree child. Kept as a plain cumulative array: with fan-outs of a few
// dozen, rebuild-on-change beats any sublinear cleverness.
class PartialSums {
public:
    PartialSums() : max_len_(0) {}

    explicit PartialSums(uint32_t max_len) : max_len_(max_len) {}

    PartialSums(uint32_t max_len, std::span<const uint64_t> values) : max_len_(max_len) {
        if (values.size() > max_len_)
            fail(ErrorKind::capacity, "partial sums over configured fan-out");
        entries_.assign(values.begin(), values.end());
        recompute();
    }

    uint32_t size() const { return static_cast<uint32_t>(entries_.size()); }
    uint64_t total() const { return prefix_.empty() ? 0 : prefix_.back(); }
    uint64_t entry(uint32_t i) const {
        assert(i >= 1 && i <= size());
        return entries_[i - 1];
    }

    // sum of the first i entries; sum(0) == 0.
    uint64_t sum(uint32_t i) const {
        if (i > size()) fail(ErrorKind::range, "prefix index past end");
        return i == 0 ? 0 : prefix_[i - 1];
    }

    // smallest i with sum(i) >= x, for 1 <= x <= total().
    uint32_t search(uint64_t x) const {
        if (x < 1 || x > total())
            fail(ErrorKind::range, "searched value outside stored total");
        auto it = std::lower_bound(prefix_.begin(), prefix_.end(), x);
        return static_cast<uint32_t>(it - prefix_.begin()) + 1;
    }

    void modify(uint32_t i, int64_t delta) {
        if (i < 1 || i > size()) fail(ErrorKind::range, "modified entry out of range");
        int64_t v = static_cast<int64_t>(entries_[i - 1]) + delta;
        if (v < 0) fail(ErrorKind::invariant, "entry would become negative");
        entries_[i - 1] = static_cast<uint64_t>(v);
        for (uint32_t j = i - 1; j < prefix_.size(); ++j)
            prefix_[j] = static_cast<uint64_t>(static_cast<int64_t>(prefix_[j]) + delta);
    }

    // Structural edits used by the owning tree; each is a full O(fan-out)
    // rebuild of the prefix array.
    void insert_entry(uint32_t pos, uint64_t value) {
        assert(pos >= 1 && pos <= size() + 1);
        if (size() + 1 > max_len_)
            fail(ErrorKind::capacity, "partial sums over configured fan-out");
        entries_.insert(entries_.begin() + (pos - 1), value);
        recompute();
    }

    void remove_entry(uint32_t pos) {
        assert(pos >= 1 && pos <= size());
        entries_.erase(entries_.begin() + (pos - 1));
        recompute();
    }

    void replace_entry(uint32_t pos, std::span<const uint64_t> values) {
        assert(pos >= 1 && pos <= size());
        if (size() - 1 + values.size() > max_len_)
            fail(ErrorKind::capacity, "partial sums over configured fan-out");
        entries_.erase(entries_.begin() + (pos - 1));
        entries_.insert(entries_.begin() + (pos - 1), values.begin(), values.end());
        recompute();
    }

    const std::vector<uint64_t>& entries() const { return entries_; }

    uint64_t space_bits() const { return (entries_.size() + prefix_.size()) * 64 + 96; }

private:
    void recompute() {
        prefix_.resize(entries_.size());
        uint64_t acc = 0;
        for (size_t j = 0; j < entries_.size(); ++j) {
            acc += entries_[j];
            prefix_[j] = acc;
        }
    }

    std::vector<uint64_t> entries_;
    std::vector<uint64_t> prefix_;
    uint32_t max_len_;
};

} // namespace rsel
