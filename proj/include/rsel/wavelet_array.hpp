#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rsel/dyn_string.hpp"
#include "rsel/error.hpp"
#include "rsel/ranking_tree.hpp"
#include "rsel/stats.hpp"

namespace rsel {

// Dynamic array over a bounded universe [1..sigma] with positional edits and
// range selection. A generalized wavelet tree whose shape depends only on
// sigma: the universe is padded to a full branch^height grid, so every level
// partitions the array into one chunk per node, stored in one dynamic string
// per level. Nodes are implicit (depth, block); ranking trees exist only for
// chunks heavier than the leaf cutoff and live in one container per level.
class WaveletArray {
public:
    explicit WaveletArray(uint64_t sigma, uint64_t capacity_hint = 0)
        : WaveletArray(sigma, std::vector<uint32_t>{}, capacity_hint) {}

    WaveletArray(uint64_t sigma, std::span<const uint32_t> values, uint64_t capacity_hint = 0) {
        if (sigma < 1) fail(ErrorKind::range, "universe must not be empty");
        sigma_ = sigma;
        double lgs = std::log2(static_cast<double>(std::max<uint64_t>(sigma_, 2)));
        branch_ = std::clamp<uint32_t>(static_cast<uint32_t>(std::ceil(std::cbrt(lgs))), 2, 16);
        height_ = 1;
        uint64_t span = branch_;
        while (span < sigma_) span *= branch_, ++height_;
        universe_ = span;
        rebuild_from(values, capacity_hint);
    }

    uint64_t size() const { return n_; }
    uint64_t sigma() const { return sigma_; }
    uint32_t branch() const { return branch_; }
    uint32_t height() const { return height_; }
    Stats& stats() { return stats_; }
    const Stats& stats() const { return stats_; }

    void insert(uint64_t i, uint64_t v) {
        if (v < 1 || v > sigma_) fail(ErrorKind::range, "value outside universe");
        if (i < 1 || i > n_ + 1) fail(ErrorKind::range, "position out of range");
        uint64_t block = 0, off = 0, len = n_;
        for (uint32_t d = 0; d < height_; ++d) {
            DynString& ds = strings_[d];
            uint32_t c = branch_of(v, d);
            ds.insert(c, off + i);
            auto it = rtrees_[d].find(block);
            if (it != rtrees_[d].end()) {
                it->second.insert(ds, off, i, c);
            } else if (len + 1 > params_.leaf_cutoff) {
                rtrees_[d].emplace(block, RankingTree::build(rt_config(), ds,
                                                             RegionHandle{off, len + 1}));
            }
            uint64_t off_next = off + below(ds, off, len + 1, c);
            uint64_t i_next = ds.rank(c, off + i) - ds.rank(c, off);
            // the next level has not absorbed the new value yet
            uint64_t len_next = ds.rank(c, off + len + 1) - ds.rank(c, off) - 1;
            block = block * branch_ + c - 1;
            off = off_next;
            i = i_next;
            len = len_next;
        }
        ++n_;
        ++updates_;
        if (n_ > 2 * params_.capacity) rebuild();
    }

    // Removes A[i] and returns it.
    uint64_t erase(uint64_t i) {
        if (i < 1 || i > n_) fail(ErrorKind::range, "position out of range");
        uint64_t block = 0, off = 0, len = n_;
        for (uint32_t d = 0; d < height_; ++d) {
            DynString& ds = strings_[d];
            uint32_t c = ds.access(off + i);
            uint64_t off_next = off + below(ds, off, len, c);
            uint64_t i_next = ds.rank(c, off + i) - ds.rank(c, off);
            // the next level still carries the value being removed
            uint64_t len_next = ds.rank(c, off + len) - ds.rank(c, off);
            ds.erase(off + i);
            auto it = rtrees_[d].find(block);
            if (it != rtrees_[d].end()) {
                if (len - 1 <= params_.leaf_cutoff) rtrees_[d].erase(it);
                else it->second.erase(ds, off, i, c);
            }
            block = block * branch_ + c - 1;
            off = off_next;
            i = i_next;
            len = len_next;
        }
        --n_;
        ++updates_;
        return block + 1;
    }

    uint64_t access(uint64_t i) const {
        if (i < 1 || i > n_) fail(ErrorKind::range, "position out of range");
        uint64_t block = 0, off = 0, len = n_;
        for (uint32_t d = 0; d < height_; ++d) {
            const DynString& ds = strings_[d];
            uint32_t c = ds.access(off + i);
            uint64_t off_next = off + below(ds, off, len, c);
            i = ds.rank(c, off + i) - ds.rank(c, off);
            len = ds.rank(c, off + len) - ds.rank(c, off);
            block = block * branch_ + c - 1;
            off = off_next;
        }
        return block + 1;
    }

    // k-th smallest value in A[i..j], multiset semantics.
    uint64_t select(uint64_t i, uint64_t j, uint64_t k) {
        if (n_ == 0) fail(ErrorKind::empty, "selection over an empty array");
        if (i < 1 || j > n_ || i > j) fail(ErrorKind::range, "positions out of range");
        if (k < 1 || k > j - i + 1)
            fail(ErrorKind::rank, "rank outside range population", j - i + 1);
        stats_.reset_query();
        uint64_t block = 0, off = 0, len = n_, r1 = i, r2 = j;
        uint32_t section_state = 1;
        for (uint32_t d = 0; d < height_; ++d) {
            stats_.tree_nodes_visited++;
            DynString& ds = strings_[d];
            uint32_t tau;
            uint64_t k_rem;
            auto it = rtrees_[d].find(block);
            if (it != rtrees_[d].end()) {
                CanonicalSet cs = it->second.canonical(r1, r2);
                stats_.rank_nodes_visited += cs.visited;
                BranchResult res = it->second.branch_fast(ds, off, cs, k, section_state, &stats_);
                tau = res.tau;
                k_rem = res.k_rem;
            } else {
                uint64_t q[64] = {0};
                ds.freq_range(off + r1, r2 - r1 + 1, q);
                tau = 1;
                uint64_t pre = 0;
                while (pre + q[tau - 1] < k) pre += q[tau - 1], ++tau;
                k_rem = k - pre;
            }
            uint64_t nr1 = ds.rank(tau, off + r1 - 1) - ds.rank(tau, off) + 1;
            uint64_t nr2 = ds.rank(tau, off + r2) - ds.rank(tau, off);
            uint64_t off_next = off + below(ds, off, len, tau);
            len = ds.rank(tau, off + len) - ds.rank(tau, off);
            block = block * branch_ + tau - 1;
            off = off_next;
            r1 = nr1;
            r2 = nr2;
            k = k_rem;
        }
        return block + 1;
    }

    // entries of A[i..j] with value in [v1..v2]; empty intersections count 0
    uint64_t range_count(uint64_t i, uint64_t j, uint64_t v1, uint64_t v2) {
        if (n_ == 0 || i > j || v1 > v2) return 0;
        i = std::max<uint64_t>(i, 1);
        j = std::min<uint64_t>(j, n_);
        v1 = std::max<uint64_t>(v1, 1);
        v2 = std::min<uint64_t>(v2, sigma_);
        if (i > j || v1 > v2) return 0;
        return count_rec(0, 0, 0, n_, i, j, 1, universe_, v1, v2);
    }

    // measured zeroth-order entropy of the current contents, in bits/symbol
    double measured_entropy() const {
        if (n_ == 0) return 0.0;
        std::vector<uint64_t> freq(sigma_, 0);
        leaf_lengths(0, 0, 0, n_, freq);
        double h = 0;
        for (uint64_t f : freq) {
            if (!f) continue;
            double p = static_cast<double>(f) / static_cast<double>(n_);
            h -= p * std::log2(p);
        }
        return h;
    }

    SpaceBreakdown space() const {
        SpaceBreakdown sp;
        for (const DynString& ds : strings_) ds.add_space(sp);
        for (const auto& level : rtrees_)
            for (const auto& [block, rt] : level) {
                rt.add_space(sp);
                sp.ranking_nodes += 128; // level-arena slot bookkeeping
            }
        return sp;
    }

    struct SpaceReport {
        SpaceBreakdown components;
        uint64_t bits_total = 0;
        double bits_per_symbol = 0;
        double entropy_bits_per_symbol = 0; // measured H0
        double lg_sigma = 0;
    };

    SpaceReport space_report() const {
        SpaceReport r;
        r.components = space();
        r.bits_total = r.components.total();
        r.bits_per_symbol = n_ ? static_cast<double>(r.bits_total) / n_ : 0.0;
        r.entropy_bits_per_symbol = measured_entropy();
        r.lg_sigma = std::log2(static_cast<double>(sigma_));
        return r;
    }

    void rebuild() {
        std::vector<uint32_t> values(n_);
        if (n_) {
            std::vector<uint64_t> idx(n_);
            for (uint64_t t = 0; t < n_; ++t) idx[t] = t + 1;
            reconstruct(0, 0, 0, n_, std::move(idx), values);
        }
        rebuild_from(values, 2 * n_);
        stats_.rebuilds++;
    }

    void validate() {
        for (DynString& ds : strings_) ds.validate();
        if (height_ && strings_[0].length() != n_)
            fail(ErrorKind::invariant, "top chunk length is not the array size");
        uint64_t trees_seen = 0;
        validate_rec(0, 0, 0, n_, trees_seen);
        uint64_t trees_stored = 0;
        for (const auto& level : rtrees_) trees_stored += level.size();
        if (trees_seen != trees_stored)
            fail(ErrorKind::invariant, "orphan ranking trees in the level arenas");
    }

private:
    struct RankParams {
        uint64_t capacity = 1024;
        uint32_t branch_rank = 4;
        uint32_t leaf_cutoff = 16;
        uint32_t count_bits = 12;
        uint32_t overlap = 2;
    };

    uint64_t sigma_ = 1;
    uint32_t branch_ = 2;
    uint32_t height_ = 1;
    uint64_t universe_ = 2;
    uint64_t n_ = 0;
    uint64_t updates_ = 0;
    RankParams params_{};
    std::vector<DynString> strings_;
    std::vector<std::unordered_map<uint64_t, RankingTree>> rtrees_;
    Stats stats_;

    RankingTree::Config rt_config() const {
        return RankingTree::Config::make(params_.branch_rank, params_.leaf_cutoff, branch_,
                                         params_.count_bits, params_.overlap);
    }

    uint32_t branch_of(uint64_t v, uint32_t d) const {
        uint64_t child_span = universe_;
        for (uint32_t t = 0; t <= d; ++t) child_span /= branch_;
        return static_cast<uint32_t>(((v - 1) / child_span) % branch_) + 1;
    }

    // symbols below c in the chunk [off+1 .. off+len]
    static uint64_t below(const DynString& ds, uint64_t off, uint64_t len, uint32_t c) {
        if (c == 1 || len == 0) return 0;
        return ds.range_count(off + 1, off + len, 1, c - 1);
    }

    void rebuild_from(std::span<const uint32_t> values, uint64_t capacity_hint) {
        uint64_t cap = std::max<uint64_t>({capacity_hint, values.size(), 1024});
        params_.capacity = cap;
        double lgn = std::log2(static_cast<double>(cap));
        double lglg = std::log2(lgn);
        params_.branch_rank =
            std::clamp<uint32_t>(static_cast<uint32_t>(std::ceil(std::cbrt(lgn))), 4, 16);
        params_.leaf_cutoff = std::max<uint32_t>(
            16, static_cast<uint32_t>(std::ceil((lgn / lglg) * (lgn / lglg))));
        params_.overlap = std::max<uint32_t>(2, static_cast<uint32_t>(std::ceil(lglg)));
        params_.count_bits = ceil_log2(cap) + 2;
        strings_.clear();
        rtrees_.assign(height_, {});
        n_ = values.size();
        updates_ = 0;
        // stable partition, level by level, nodes in block order
        std::vector<std::pair<uint64_t, std::vector<uint32_t>>> nodes;
        nodes.emplace_back(0, std::vector<uint32_t>(values.begin(), values.end()));
        for (uint32_t d = 0; d < height_; ++d) {
            std::vector<uint32_t> buf;
            buf.reserve(n_);
            std::vector<std::pair<uint64_t, std::vector<uint32_t>>> next;
            for (auto& [block, vals] : nodes) {
                std::vector<std::vector<uint32_t>> parts(branch_);
                for (uint32_t v : vals) {
                    uint32_t c = branch_of(v, d);
                    buf.push_back(c);
                    parts[c - 1].push_back(v);
                }
                for (uint32_t c = 1; c <= branch_; ++c)
                    if (!parts[c - 1].empty())
                        next.emplace_back(block * branch_ + c - 1, std::move(parts[c - 1]));
            }
            strings_.emplace_back(StringParams::derive(branch_, cap), buf);
            nodes = std::move(next);
        }
        // ranking trees for heavy chunks
        for (uint32_t d = 0; d < height_; ++d) build_level_trees(d);
    }

    void build_level_trees(uint32_t d) {
        // walk the level's regions in block order
        struct Item {
            uint64_t block, off, len;
        };
        std::vector<Item> work;
        if (n_ > 0) work.push_back({0, 0, n_});
        for (uint32_t dd = 0; dd < d; ++dd) {
            std::vector<Item> next;
            uint64_t cursor = 0;
            for (const Item& it : work) {
                for (uint32_t c = 1; c <= branch_; ++c) {
                    uint64_t clen =
                        strings_[dd].rank(c, it.off + it.len) - strings_[dd].rank(c, it.off);
                    if (clen > 0) next.push_back({it.block * branch_ + c - 1, cursor, clen});
                    cursor += clen;
                }
            }
            work = std::move(next);
        }
        for (const Item& it : work)
            if (it.len > params_.leaf_cutoff)
                rtrees_[d].emplace(it.block, RankingTree::build(rt_config(), strings_[d],
                                                                RegionHandle{it.off, it.len}));
    }

    uint64_t count_rec(uint32_t d, uint64_t block, uint64_t off, uint64_t len, uint64_t r1,
                       uint64_t r2, uint64_t lo, uint64_t hi, uint64_t v1, uint64_t v2) {
        if (r1 > r2) return 0;
        uint64_t a = std::max(lo, v1), b = std::min(hi, v2);
        if (a > b) return 0;
        if (a == lo && b == hi) return r2 - r1 + 1;
        stats_.tree_nodes_visited++;
        DynString& ds = strings_[d];
        uint64_t child_span = (hi - lo + 1) / branch_;
        uint32_t c1 = static_cast<uint32_t>((a - lo) / child_span) + 1;
        uint32_t c2 = static_cast<uint32_t>((b - lo) / child_span) + 1;
        uint64_t acc = 0;
        if (c1 + 1 <= c2 - 1) {
            auto it = rtrees_[d].find(block);
            if (it != rtrees_[d].end()) {
                CanonicalSet cs = it->second.canonical(r1, r2);
                stats_.rank_nodes_visited += cs.visited;
                acc += it->second.count_labels(ds, off, cs, c1 + 1, c2 - 1, &stats_);
            } else {
                acc += ds.range_count(off + r1, off + r2, c1 + 1, c2 - 1);
            }
        }
        uint32_t bounds[2] = {c1, c2};
        uint32_t nb = c1 == c2 ? 1 : 2;
        for (uint32_t t = 0; t < nb; ++t) {
            uint32_t c = bounds[t];
            uint64_t nr1 = ds.rank(c, off + r1 - 1) - ds.rank(c, off) + 1;
            uint64_t nr2 = ds.rank(c, off + r2) - ds.rank(c, off);
            if (nr1 > nr2) continue;
            uint64_t noff = off + below(ds, off, len, c);
            uint64_t nlen = ds.rank(c, off + len) - ds.rank(c, off);
            acc += count_rec(d + 1, block * branch_ + c - 1, noff, nlen, nr1, nr2,
                             lo + (c - 1) * child_span, lo + c * child_span - 1, v1, v2);
        }
        return acc;
    }

    void leaf_lengths(uint32_t d, uint64_t block, uint64_t off, uint64_t len,
                      std::vector<uint64_t>& freq) const {
        if (len == 0) return;
        if (d == height_) {
            if (block < freq.size()) freq[block] += len;
            return;
        }
        const DynString& ds = strings_[d];
        uint64_t cursor = off;
        for (uint32_t c = 1; c <= branch_; ++c) {
            uint64_t clen = ds.rank(c, off + len) - ds.rank(c, off);
            leaf_lengths(d + 1, block * branch_ + c - 1, cursor, clen, freq);
            cursor += clen;
        }
    }

    void reconstruct(uint32_t d, uint64_t block, uint64_t off, uint64_t len,
                     std::vector<uint64_t> idx, std::vector<uint32_t>& out) const {
        if (len == 0) return;
        if (d == height_) {
            for (uint64_t t : idx) out[t - 1] = static_cast<uint32_t>(block + 1);
            return;
        }
        std::vector<uint32_t> syms = strings_[d].substring(off + 1, off + len);
        std::vector<std::vector<uint64_t>> parts(branch_);
        for (uint64_t t = 0; t < len; ++t) parts[syms[t] - 1].push_back(idx[t]);
        for (uint32_t c = 1; c <= branch_; ++c) {
            uint64_t clen = parts[c - 1].size();
            if (clen == 0) continue;
            reconstruct(d + 1, block * branch_ + c - 1, off + below(strings_[d], off, len, c),
                        clen, std::move(parts[c - 1]), out);
        }
    }

    uint64_t validate_rec(uint32_t d, uint64_t block, uint64_t off, uint64_t len,
                          uint64_t& trees_seen) {
        if (d == height_ || len == 0) return len;
        DynString& ds = strings_[d];
        auto it = rtrees_[d].find(block);
        bool expect = len > params_.leaf_cutoff;
        if (expect != (it != rtrees_[d].end()))
            fail(ErrorKind::invariant, "ranking tree presence wrong");
        if (it != rtrees_[d].end()) {
            ++trees_seen;
            if (it->second.weight() != len)
                fail(ErrorKind::invariant, "ranking tree weight out of sync");
            it->second.validate(ds, off);
        }
        uint64_t total = 0;
        uint64_t cursor = off;
        for (uint32_t c = 1; c <= branch_; ++c) {
            uint64_t clen = len == 0 ? 0 : ds.rank(c, off + len) - ds.rank(c, off);
            total += validate_rec(d + 1, block * branch_ + c - 1, cursor, clen, trees_seen);
            cursor += clen;
        }
        if (total != len) fail(ErrorKind::invariant, "child chunks do not cover the node");
        return len;
    }
};

} // namespace rsel
