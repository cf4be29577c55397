#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <optional>
#include <vector>

#include "rsel/dyn_string.hpp"
#include "rsel/error.hpp"
#include "rsel/matrix_structure.hpp"
#include "rsel/partial_sums.hpp"
#include "rsel/stats.hpp"

namespace rsel {

// The canonical cover of a rank interval: maximal wholly-covered child runs
// expressed as (node, column interval), plus at most two partially covered
// conceptual leaves with in-leaf offsets.
struct CanonicalSet {
    struct NodePiece {
        uint32_t node;
        uint32_t q_lo, q_hi; // covered columns, inclusive
        uint64_t start;      // ranks before the first covered position
        uint64_t count;      // covered positions
    };
    struct LeafPiece {
        uint64_t start;      // ranks before the leaf
        uint64_t z_lo, z_hi; // covered in-leaf offsets, inclusive
    };
    uint64_t r1 = 0, r2 = 0;
    std::vector<NodePiece> nodes;
    std::vector<LeafPiece> leaves;
    uint32_t visited = 0;
};

struct BranchResult {
    enum class Case { good, bad, exhausted, direct };
    uint32_t tau = 0;
    uint64_t k_rem = 0;
    Case tag = Case::direct;
    std::vector<uint64_t> label_counts; // q' vector; filled by the slow path
};

// Weight-balanced B-tree over the x-rank order of one main-tree node's
// points. Internal nodes carry searchable partial sums over child weights
// and a cumulative count matrix; leaves are conceptual, referencing spans of
// the level's dynamic string. Nodes live in a per-tree arena and refer to
// each other by index.
class RankingTree {
public:
    struct Config {
        uint32_t branch = 4;     // B2
        uint32_t leaf_param = 8; // L
        uint32_t labels = 4;     // f1, degree of the owning node
        SectionLayout sections;

        static Config make(uint32_t branch, uint32_t leaf_param, uint32_t labels,
                           uint32_t count_bits, uint32_t overlap) {
            Config c;
            c.branch = std::max<uint32_t>(4, branch);
            c.leaf_param = std::max<uint32_t>(2, leaf_param);
            c.labels = std::max<uint32_t>(1, labels);
            c.sections = SectionLayout::make(c.labels, count_bits, overlap);
            return c;
        }
    };

    RankingTree() = default;
    explicit RankingTree(Config cfg) : cfg_(cfg) {}

    // Construct over a region of the level string in O(region length).
    static RankingTree build(Config cfg, const DynString& ds, RegionHandle region) {
        RankingTree t(cfg);
        if (region.len == 0) return t;
        // conceptual leaves around 3L/2 symbols each
        uint64_t target = std::max<uint64_t>(1, uint64_t(cfg.leaf_param) * 3 / 2);
        uint64_t nleaves = std::max<uint64_t>(1, (region.len + target / 2) / target);
        nleaves = std::max<uint64_t>(nleaves, (region.len + 2 * cfg.leaf_param - 1) /
                                                  (2 * cfg.leaf_param));
        while (nleaves > 1 && region.len / nleaves < (cfg.leaf_param + 1) / 2) --nleaves;
        std::vector<uint64_t> sizes(nleaves);
        uint64_t done = 0;
        for (uint64_t l = 0; l < nleaves; ++l) {
            sizes[l] = (region.len - done) / (nleaves - l);
            done += sizes[l];
        }
        // height-1 nodes over runs of leaves, then upper levels
        std::vector<uint32_t> level;
        uint64_t abs = 0;
        size_t at = 0;
        uint64_t group_w = uint64_t(cfg.branch) * cfg.leaf_param;
        for (size_t take : pack_groups(sizes, group_w)) {
            uint32_t id = t.alloc();
            Node& n = t.arena_[id];
            n.height = 1;
            n.sums = PartialSums(t.max_fan(),
                                 std::span<const uint64_t>(&sizes[at], take));
            t.rebuild_aux(id, abs, ds, region.offset);
            abs += n.sums.total();
            at += take;
            level.push_back(id);
        }
        t.build_upper(level, ds, region.offset);
        t.weight_ = region.len;
        return t;
    }

    // Boundaries (start, len) of the conceptual leaf containing rank r.
    std::pair<uint64_t, uint64_t> leaf_bounds(uint64_t r) const {
        if (r < 1 || r > weight_) fail(ErrorKind::range, "rank out of range");
        uint32_t id = root_;
        uint64_t abs = 0;
        for (;;) {
            const Node& n = arena_[id];
            uint32_t q = n.sums.search(r);
            uint64_t base = n.sums.sum(q - 1);
            if (n.height == 1) return {abs + base, n.sums.entry(q)};
            abs += base;
            r -= base;
            id = n.kids[q - 1];
        }
    }

    uint64_t weight() const { return weight_; }
    bool empty() const { return weight_ == 0; }
    uint32_t height() const { return root_ == kInvalid ? 0 : arena_[root_].height; }
    const Config& config() const { return cfg_; }
    uint32_t sections() const { return cfg_.sections.sections; }

    CanonicalSet canonical(uint64_t r1, uint64_t r2) const {
        if (r1 < 1 || r1 > r2 || r2 > weight_)
            fail(ErrorKind::range, "canonical ranks out of range");
        CanonicalSet cs;
        cs.r1 = r1;
        cs.r2 = r2;
        canonical_rec(root_, 0, r1, r2, cs);
        return cs;
    }

    // Count vector of the labels in the first z symbols of a conceptual
    // leaf, one packed chunk at a time.
    std::vector<uint64_t> leaf_rank_array(const DynString& ds, uint64_t region_offset,
                                          uint64_t leaf_start, uint64_t leaf_len,
                                          uint64_t z) const {
        if (z < 1 || z > leaf_len) fail(ErrorKind::range, "offset outside leaf");
        return scan_labels(ds, region_offset + leaf_start + 1, z);
    }

    // Exact branch decision by full evaluation of the label counts.
    BranchResult branch_slow(const DynString& ds, uint64_t region_offset,
                             const CanonicalSet& cs, uint64_t k, Stats* stats = nullptr) const {
        Eval ev = make_eval(ds, region_offset, cs, stats);
        uint64_t total = cs.r2 - cs.r1 + 1;
        if (k < 1 || k > total) fail(ErrorKind::rank, "branch rank outside interval", total);
        std::vector<uint64_t> cum = full_cumulative(ev);
        assert(cum[cfg_.labels - 1] == total);
        uint32_t tau = 1;
        while (cum[tau - 1] < k) ++tau;
        BranchResult r;
        r.tau = tau;
        r.k_rem = k - (tau > 1 ? cum[tau - 2] : 0);
        r.tag = BranchResult::Case::direct;
        r.label_counts.resize(cfg_.labels);
        for (uint32_t p = 0; p < cfg_.labels; ++p)
            r.label_counts[p] = cum[p] - (p ? cum[p - 1] : 0);
        return r;
    }

    // Branch decision through the packed section words. Exact verification
    // backs every shortcut, so the result always equals branch_slow; the
    // section cursor advances whenever a binary search was forced.
    BranchResult branch_fast(const DynString& ds, uint64_t region_offset, const CanonicalSet& cs,
                             uint64_t k, uint32_t& section_state, Stats* stats = nullptr) {
        uint64_t total = cs.r2 - cs.r1 + 1;
        if (k < 1 || k > total) fail(ErrorKind::rank, "branch rank outside interval", total);
        const SectionLayout& lay = cfg_.sections;
        if (section_state > lay.sections) {
            BranchResult r = branch_slow(ds, region_offset, cs, k, stats);
            r.tag = BranchResult::Case::exhausted;
            if (stats) stats->slow_fallbacks++;
            return r;
        }
        // the packed path reads only flushed words
        for (const auto& piece : cs.nodes) {
            MatrixStructure& mx = arena_[piece.node].mx;
            if (mx.pending_size()) {
                mx.rebuild();
                if (stats) stats->matrix_flushes++;
            }
        }
        Eval ev = make_eval(ds, region_offset, cs, stats);
        uint32_t s = section_state;
        PackedFields acc(cfg_.labels, lay.field_width);
        for (const auto& piece : cs.nodes)
            acc = pf_add(acc, arena_[piece.node].mx.packed_section_diff(piece.q_hi,
                                                                        piece.q_lo - 1, s));
        for (const auto& cum : ev.leaf_cum) {
            PackedFields w(cfg_.labels, lay.field_width);
            for (uint32_t p = 1; p <= cfg_.labels; ++p)
                w.set(p, lay.section_of(cum[p - 1], s));
            acc = pf_add(acc, w);
        }
        // candidates: fields matching k's section above the overlap bits,
        // plus the first field strictly greater there
        uint64_t k_hi = lay.section_of(k, s) >> lay.overlap;
        std::vector<uint32_t> cand;
        uint32_t first_greater = 0;
        for (uint32_t p = 1; p <= cfg_.labels; ++p) {
            uint64_t v = acc.get(p) >> lay.overlap;
            if (v == k_hi) cand.push_back(p);
            else if (v > k_hi && !first_greater) first_greater = p;
        }
        if (first_greater) {
            auto it = std::lower_bound(cand.begin(), cand.end(), first_greater);
            if (it == cand.end() || *it != first_greater) cand.insert(it, first_greater);
        }
        auto is_tau = [&](uint32_t p) {
            return exact_prefix(ev, p) >= k && exact_prefix(ev, p - 1) < k;
        };
        uint32_t tau = 0;
        bool good = false;
        if (!cand.empty()) {
            if (is_tau(cand.front())) {
                tau = cand.front();
                good = true;
            } else if (cand.size() > 1 && is_tau(cand.back())) {
                tau = cand.back();
                good = true;
            } else if (cand.size() <= 4) {
                for (size_t t = 1; t + 1 < cand.size() && !tau; ++t)
                    if (is_tau(cand[t])) tau = cand[t];
                good = tau != 0;
            }
        }
        BranchResult r;
        if (good) {
            r.tag = BranchResult::Case::good;
            if (stats) stats->good_cases++;
        } else {
            // exact binary search over the cumulative label counts
            uint32_t lo = 1, hi = cfg_.labels;
            while (lo < hi) {
                uint32_t mid = (lo + hi) / 2;
                if (exact_prefix(ev, mid) >= k) hi = mid;
                else lo = mid + 1;
            }
            tau = lo;
            r.tag = BranchResult::Case::bad;
            section_state = s + 1;
            if (stats) {
                stats->bad_cases++;
                stats->last_query_bad_cases++;
            }
        }
        r.tau = tau;
        r.k_rem = k - exact_prefix(ev, tau - 1);
        return r;
    }

    // Number of covered positions whose label lies in [a..b].
    uint64_t count_labels(const DynString& ds, uint64_t region_offset, const CanonicalSet& cs,
                          uint32_t a, uint32_t b, Stats* stats = nullptr) const {
        if (a > b) return 0;
        Eval ev = make_eval(ds, region_offset, cs, stats);
        return exact_prefix(ev, b) - exact_prefix(ev, a - 1);
    }

    void insert(const DynString& ds, uint64_t region_offset, uint64_t r_x, uint32_t label) {
        if (label < 1 || label > cfg_.labels) fail(ErrorKind::range, "label out of range");
        if (r_x < 1 || r_x > weight_ + 1) fail(ErrorKind::range, "insert rank out of range");
        if (root_ == kInvalid) {
            uint32_t id = alloc();
            Node& n = arena_[id];
            n.height = 1;
            uint64_t one = 1;
            n.sums = PartialSums(max_fan(), std::span<const uint64_t>(&one, 1));
            std::vector<std::vector<uint64_t>> counts(1, std::vector<uint64_t>(cfg_.labels, 0));
            counts[0][label - 1] = 1;
            n.mx = MatrixStructure(cfg_.sections, counts);
            root_ = id;
            weight_ = 1;
            return;
        }
        auto sib = insert_rec(root_, 0, r_x, label, ds, region_offset);
        ++weight_;
        if (sib) grow_root(*sib, ds, region_offset);
    }

    void erase(const DynString& ds, uint64_t region_offset, uint64_t r_x, uint32_t label) {
        if (label < 1 || label > cfg_.labels) fail(ErrorKind::range, "label out of range");
        if (r_x < 1 || r_x > weight_) fail(ErrorKind::range, "erase rank out of range");
        erase_rec(root_, 0, r_x, label, ds, region_offset);
        --weight_;
        if (weight_ == 0) {
            arena_.clear();
            free_.clear();
            root_ = kInvalid;
            return;
        }
        while (arena_[root_].height > 1 && arena_[root_].sums.size() == 1) {
            uint32_t old = root_;
            root_ = arena_[root_].kids[0];
            release(old);
        }
        maybe_compact();
    }

    // Invariant walk; region must be the tree's span of the level string.
    // Pending matrix buffers are flushed so section reassembly is checked on
    // every node (flushing never changes logical values).
    void validate(const DynString& ds, uint64_t region_offset) {
        if (root_ == kInvalid) {
            if (weight_ != 0) fail(ErrorKind::invariant, "empty tree with weight");
            return;
        }
        for (uint32_t id = 0; id < arena_.size(); ++id)
            if (!is_free(id)) arena_[id].mx.rebuild();
        uint64_t w = validate_rec(root_, 0, ds, region_offset, true);
        if (w != weight_) fail(ErrorKind::invariant, "tree weight out of sync");
    }

    void add_space(SpaceBreakdown& sp) const {
        for (uint32_t id = 0; id < arena_.size(); ++id) {
            if (is_free(id)) continue;
            const Node& n = arena_[id];
            sp.ranking_sums += n.sums.space_bits();
            sp.ranking_matrix_tables += uint64_t(n.mx.rows()) * n.mx.cols() * 64;
            sp.ranking_matrix_packed +=
                uint64_t(cfg_.sections.sections) * n.mx.cols() * cfg_.sections.words_per_section * 64;
            sp.ranking_nodes += 128 + n.kids.size() * 32;
        }
        sp.ranking_nodes += 64; // root handle of the fixed memory area
    }

    uint64_t arena_nodes() const { return arena_.size() - free_.size(); }

private:
    static constexpr uint32_t kInvalid = 0xFFFFFFFFu;

    struct Node {
        uint8_t height = 0;
        PartialSums sums;
        MatrixStructure mx;
        std::vector<uint32_t> kids;
        bool free = false;
    };

    Config cfg_;
    std::vector<Node> arena_;
    std::vector<uint32_t> free_;
    uint32_t root_ = kInvalid;
    uint64_t weight_ = 0;

    struct Eval {
        const CanonicalSet* cs;
        std::vector<std::vector<uint64_t>> leaf_cum; // per leaf piece, cumulative by label
    };

    uint32_t max_fan() const { return 4 * cfg_.branch + 2; }
    uint32_t min_degree() const { return std::max<uint32_t>(1, cfg_.branch / 4); }

    // Chunked label frequencies over string positions [pos .. pos+cnt-1].
    // The string's alphabet may be wider than this tree's label range; any
    // occurrence beyond it means the region is not ours.
    std::vector<uint64_t> scan_labels(const DynString& ds, uint64_t pos, uint64_t cnt) const {
        uint64_t buf[64] = {0};
        if (cnt) ds.freq_range(pos, cnt, buf);
        std::vector<uint64_t> out(cfg_.labels, 0);
        for (uint32_t s = 0; s < 64; ++s) {
            if (s < cfg_.labels) out[s] = buf[s];
            else if (buf[s]) fail(ErrorKind::corrupt, "label beyond configured fan-out");
        }
        return out;
    }

    uint64_t weight_floor(uint32_t h) const {
        uint64_t w = cfg_.leaf_param;
        for (uint32_t i = 0; i < h; ++i) w *= cfg_.branch;
        return w / 2;
    }

    uint64_t weight_cap(uint32_t h) const {
        uint64_t w = cfg_.leaf_param;
        for (uint32_t i = 0; i < h; ++i) w *= cfg_.branch;
        return 2 * w;
    }

    uint64_t leaf_min() const { return (cfg_.leaf_param + 1) / 2; }
    uint64_t leaf_max() const { return 2 * uint64_t(cfg_.leaf_param); }

    // Greedy grouping: close a group once it reaches the target weight; a
    // light tail is folded into the previous group. With branch >= 4 the
    // results stay within [target/2, 2*target] except for a lone group.
    static std::vector<size_t> pack_groups(std::span<const uint64_t> weights, uint64_t target) {
        std::vector<size_t> groups;
        uint64_t acc = 0;
        size_t count = 0;
        for (uint64_t w : weights) {
            acc += w;
            ++count;
            if (acc >= target) {
                groups.push_back(count);
                acc = 0;
                count = 0;
            }
        }
        if (count) {
            if (acc < target / 2 && !groups.empty()) groups.back() += count;
            else groups.push_back(count);
        }
        return groups;
    }

    uint32_t alloc() {
        if (!free_.empty()) {
            uint32_t id = free_.back();
            free_.pop_back();
            arena_[id] = Node{};
            return id;
        }
        arena_.push_back(Node{});
        return static_cast<uint32_t>(arena_.size() - 1);
    }

    void release(uint32_t id) {
        arena_[id] = Node{};
        arena_[id].free = true;
        free_.push_back(id);
    }

    bool is_free(uint32_t id) const { return arena_[id].free; }

    // Compact the fixed memory area once freed slots outweigh live ones 2:1.
    void maybe_compact() {
        if (free_.size() <= 2 * arena_nodes() || arena_.size() < 16) return;
        std::vector<uint32_t> remap(arena_.size(), kInvalid);
        std::vector<Node> fresh;
        fresh.reserve(arena_nodes());
        for (uint32_t id = 0; id < arena_.size(); ++id) {
            if (arena_[id].free) continue;
            remap[id] = static_cast<uint32_t>(fresh.size());
            fresh.push_back(std::move(arena_[id]));
        }
        for (Node& n : fresh)
            for (uint32_t& k : n.kids) k = remap[k];
        root_ = remap[root_];
        arena_ = std::move(fresh);
        free_.clear();
    }

    void build_upper(std::vector<uint32_t>& level, const DynString& ds, uint64_t off) {
        uint64_t target = uint64_t(cfg_.branch) * cfg_.leaf_param;
        while (level.size() > 1) {
            target *= cfg_.branch;
            std::vector<uint64_t> weights(level.size());
            for (size_t i = 0; i < level.size(); ++i)
                weights[i] = arena_[level[i]].sums.total();
            std::vector<uint32_t> up;
            size_t at = 0;
            uint64_t abs = 0;
            for (size_t take : pack_groups(weights, target)) {
                uint32_t id = alloc();
                Node& n = arena_[id];
                n.height = arena_[level[at]].height + 1;
                n.kids.assign(level.begin() + at, level.begin() + at + take);
                n.sums = PartialSums(max_fan(),
                                     std::span<const uint64_t>(&weights[at], take));
                rebuild_aux(id, abs, ds, off);
                abs += n.sums.total();
                at += take;
                up.push_back(id);
            }
            level = std::move(up);
        }
        root_ = level.empty() ? kInvalid : level.front();
    }

    // Per-child label counts: matrix last columns for internal children,
    // chunked string scans for conceptual leaves.
    std::vector<std::vector<uint64_t>> child_label_counts(uint32_t id, uint64_t abs_left,
                                                          const DynString& ds,
                                                          uint64_t off) const {
        const Node& n = arena_[id];
        std::vector<std::vector<uint64_t>> out;
        out.reserve(n.sums.size());
        if (n.height == 1) {
            for (uint32_t q = 1; q <= n.sums.size(); ++q)
                out.push_back(scan_labels(ds, off + abs_left + n.sums.sum(q - 1) + 1,
                                          n.sums.entry(q)));
        } else {
            for (uint32_t kid : n.kids) {
                const MatrixStructure& mx = arena_[kid].mx;
                std::vector<uint64_t> c(cfg_.labels, 0);
                for (uint32_t p = 1; p <= cfg_.labels; ++p)
                    c[p - 1] = mx.entry(p, mx.cols()) - mx.entry(p - 1, mx.cols());
                out.push_back(std::move(c));
            }
        }
        return out;
    }

    void rebuild_aux(uint32_t id, uint64_t abs_left, const DynString& ds, uint64_t off) {
        auto counts = child_label_counts(id, abs_left, ds, off);
        arena_[id].mx = MatrixStructure(cfg_.sections, counts);
    }

    void canonical_rec(uint32_t id, uint64_t abs_left, uint64_t lo, uint64_t hi,
                       CanonicalSet& cs) const {
        const Node& n = arena_[id];
        cs.visited++;
        uint32_t qa = n.sums.search(lo);
        uint32_t qb = n.sums.search(hi);
        uint64_t base_a = n.sums.sum(qa - 1);
        if (qa == qb) {
            if (lo == base_a + 1 && hi == base_a + n.sums.entry(qa)) {
                cs.nodes.push_back({id, qa, qa, abs_left + base_a, n.sums.entry(qa)});
            } else if (n.height == 1) {
                cs.leaves.push_back({abs_left + base_a, lo - base_a, hi - base_a});
            } else {
                canonical_rec(n.kids[qa - 1], abs_left + base_a, lo - base_a, hi - base_a, cs);
            }
            return;
        }
        uint64_t base_b = n.sums.sum(qb - 1);
        uint32_t q_lo = (lo == base_a + 1) ? qa : qa + 1;
        uint32_t q_hi = (hi == base_b + n.sums.entry(qb)) ? qb : qb - 1;
        if (q_lo <= q_hi)
            cs.nodes.push_back({id, q_lo, q_hi, abs_left + n.sums.sum(q_lo - 1),
                                n.sums.sum(q_hi) - n.sums.sum(q_lo - 1)});
        if (q_lo == qa + 1) {
            if (n.height == 1)
                cs.leaves.push_back({abs_left + base_a, lo - base_a, n.sums.entry(qa)});
            else
                canonical_rec(n.kids[qa - 1], abs_left + base_a, lo - base_a,
                              n.sums.entry(qa), cs);
        }
        if (q_hi == qb - 1) {
            if (n.height == 1)
                cs.leaves.push_back({abs_left + base_b, 1, hi - base_b});
            else
                canonical_rec(n.kids[qb - 1], abs_left + base_b, 1, hi - base_b, cs);
        }
    }

    Eval make_eval(const DynString& ds, uint64_t region_offset, const CanonicalSet& cs,
                   Stats*) const {
        Eval ev;
        ev.cs = &cs;
        for (const auto& lp : cs.leaves) {
            std::vector<uint64_t> counts =
                scan_labels(ds, region_offset + lp.start + lp.z_lo, lp.z_hi - lp.z_lo + 1);
            for (uint32_t p = 1; p < cfg_.labels; ++p) counts[p] += counts[p - 1];
            ev.leaf_cum.push_back(std::move(counts));
        }
        return ev;
    }

    // Exact count of covered positions with label <= p.
    uint64_t exact_prefix(const Eval& ev, uint32_t p) const {
        if (p == 0) return 0;
        uint64_t acc = 0;
        for (const auto& piece : ev.cs->nodes)
            acc += arena_[piece.node].mx.entry_diff(p, piece.q_hi, piece.q_lo - 1);
        for (const auto& cum : ev.leaf_cum) acc += cum[p - 1];
        return acc;
    }

    std::vector<uint64_t> full_cumulative(const Eval& ev) const {
        std::vector<uint64_t> cum(cfg_.labels, 0);
        for (const auto& piece : ev.cs->nodes) {
            auto v = arena_[piece.node].mx.column_diff(piece.q_hi, piece.q_lo - 1);
            for (uint32_t p = 0; p < cfg_.labels; ++p) cum[p] += v[p];
        }
        for (const auto& lc : ev.leaf_cum)
            for (uint32_t p = 0; p < cfg_.labels; ++p) cum[p] += lc[p];
        return cum;
    }

    std::optional<uint32_t> insert_rec(uint32_t id, uint64_t abs_left, uint64_t r,
                                       uint32_t label, const DynString& ds, uint64_t off) {
        Node& n = arena_[id];
        uint32_t q;
        uint64_t local;
        if (r > n.sums.total()) {
            q = n.sums.size();
            local = r - n.sums.sum(q - 1);
        } else {
            q = n.sums.search(r);
            local = r - n.sums.sum(q - 1);
        }
        uint64_t child_abs = abs_left + n.sums.sum(q - 1);
        n.sums.modify(q, +1);
        n.mx.apply(label, q, +1);
        if (n.height == 1) {
            if (n.sums.entry(q) > leaf_max()) {
                uint64_t sz = n.sums.entry(q);
                uint64_t halves[2] = {(sz + 1) / 2, sz - (sz + 1) / 2};
                n.sums.replace_entry(q, halves);
                rebuild_aux(id, abs_left, ds, off);
            }
        } else {
            auto sib = insert_rec(n.kids[q - 1], child_abs, local, label, ds, off);
            if (sib) {
                Node& self = arena_[id]; // re-fetch: the arena may have grown
                uint64_t w[2] = {arena_[self.kids[q - 1]].sums.total(),
                                 arena_[*sib].sums.total()};
                self.kids.insert(self.kids.begin() + q, *sib);
                self.sums.replace_entry(q, w);
                rebuild_aux(id, abs_left, ds, off);
            }
        }
        Node& self = arena_[id];
        if (self.sums.total() > weight_cap(self.height) || self.sums.size() > 4 * cfg_.branch)
            return split_node(id, abs_left, ds, off);
        return std::nullopt;
    }

    // Split at the weight midpoint, ties to the left. Returns the new right
    // sibling; the caller links it in.
    uint32_t split_node(uint32_t id, uint64_t abs_left, const DynString& ds, uint64_t off) {
        uint32_t sib = alloc();
        Node& n = arena_[id];
        uint64_t total = n.sums.total();
        uint32_t d = 1;
        while (d < n.sums.size() && 2 * n.sums.sum(d) < total) ++d;
        if (d == n.sums.size()) --d;
        std::vector<uint64_t> left_w(n.sums.entries().begin(), n.sums.entries().begin() + d);
        std::vector<uint64_t> right_w(n.sums.entries().begin() + d, n.sums.entries().end());
        Node& s = arena_[sib];
        s.height = n.height;
        if (n.height > 1) {
            s.kids.assign(n.kids.begin() + d, n.kids.end());
            n.kids.resize(d);
        }
        uint64_t left_total = 0;
        for (uint64_t w : left_w) left_total += w;
        n.sums = PartialSums(max_fan(), left_w);
        s.sums = PartialSums(max_fan(), right_w);
        rebuild_aux(id, abs_left, ds, off);
        rebuild_aux(sib, abs_left + left_total, ds, off);
        return sib;
    }

    void grow_root(uint32_t sib, const DynString& ds, uint64_t off) {
        uint32_t nr = alloc();
        Node& n = arena_[nr];
        n.height = arena_[root_].height + 1;
        n.kids = {root_, sib};
        uint64_t w[2] = {arena_[root_].sums.total(), arena_[sib].sums.total()};
        n.sums = PartialSums(max_fan(), w);
        rebuild_aux(nr, 0, ds, off);
        root_ = nr;
    }

    void erase_rec(uint32_t id, uint64_t abs_left, uint64_t r, uint32_t label,
                   const DynString& ds, uint64_t off) {
        Node& n = arena_[id];
        uint32_t q = n.sums.search(r);
        uint64_t local = r - n.sums.sum(q - 1);
        uint64_t child_abs = abs_left + n.sums.sum(q - 1);
        n.sums.modify(q, -1);
        n.mx.apply(label, q, -1);
        if (n.height == 1) {
            if (n.sums.entry(q) < leaf_min() && n.sums.size() > 1) {
                uint32_t l = q > 1 ? q - 1 : q;
                uint64_t merged = n.sums.entry(l) + n.sums.entry(l + 1);
                n.sums.remove_entry(l + 1);
                if (merged > leaf_max()) {
                    uint64_t halves[2] = {(merged + 1) / 2, merged - (merged + 1) / 2};
                    n.sums.replace_entry(l, halves);
                } else {
                    uint64_t one[1] = {merged};
                    n.sums.replace_entry(l, one);
                }
                rebuild_aux(id, abs_left, ds, off);
            }
            return;
        }
        erase_rec(n.kids[q - 1], child_abs, local, label, ds, off);
        Node& self = arena_[id];
        const Node& child = arena_[self.kids[q - 1]];
        bool underflow = child.sums.total() < weight_floor(child.height) ||
                         child.sums.size() < min_degree();
        if (underflow && self.sums.size() > 1) fix_child(id, q, abs_left, ds, off);
    }

    // Merge an underweight child with a neighbour and resplit if the result
    // is too heavy. All three touched nodes get their aux structures rebuilt.
    void fix_child(uint32_t id, uint32_t q, uint64_t abs_left, const DynString& ds,
                   uint64_t off) {
        Node& n = arena_[id];
        uint32_t l = q > 1 ? q - 1 : q; // merge children (l, l+1)
        uint32_t a = n.kids[l - 1], b = n.kids[l];
        uint64_t abs_a = abs_left + n.sums.sum(l - 1);
        {
            Node& na = arena_[a];
            Node& nb = arena_[b];
            na.kids.insert(na.kids.end(), nb.kids.begin(), nb.kids.end());
            std::vector<uint64_t> ents(na.sums.entries());
            ents.insert(ents.end(), nb.sums.entries().begin(), nb.sums.entries().end());
            na.sums = PartialSums(max_fan(), ents);
        }
        release(b);
        {
            Node& self = arena_[id];
            self.kids.erase(self.kids.begin() + l);
            uint64_t w[1] = {arena_[a].sums.total()};
            self.sums.remove_entry(l + 1);
            self.sums.replace_entry(l, w);
        }
        Node& merged = arena_[a];
        if (merged.sums.total() > weight_cap(merged.height) ||
            merged.sums.size() > 4 * cfg_.branch) {
            rebuild_aux(a, abs_a, ds, off);
            uint32_t sib = split_node(a, abs_a, ds, off);
            Node& self = arena_[id];
            self.kids.insert(self.kids.begin() + l, sib);
            uint64_t w[2] = {arena_[a].sums.total(), arena_[sib].sums.total()};
            self.sums.replace_entry(l, w);
        } else {
            rebuild_aux(a, abs_a, ds, off);
        }
        rebuild_aux(id, abs_left, ds, off);
    }

    uint64_t validate_rec(uint32_t id, uint64_t abs_left, const DynString& ds, uint64_t off,
                          bool is_root) const {
        const Node& n = arena_[id];
        uint64_t w = n.sums.total();
        if (!is_root) {
            if (w < weight_floor(n.height)) fail(ErrorKind::invariant, "node under weight floor");
            if (n.sums.size() < min_degree()) fail(ErrorKind::invariant, "node degree too small");
        } else if (n.height > 1 && n.sums.size() < 2) {
            fail(ErrorKind::invariant, "tall root with a single child");
        }
        if (w > weight_cap(n.height)) fail(ErrorKind::invariant, "node over weight cap");
        if (n.sums.size() > 4 * cfg_.branch) fail(ErrorKind::invariant, "node degree too large");
        n.mx.validate(w);
        // matrix agrees with a fresh build from the children
        auto counts = child_label_counts(id, abs_left, ds, off);
        MatrixStructure fresh(cfg_.sections, counts);
        for (uint32_t p = 1; p <= cfg_.labels; ++p)
            for (uint32_t q = 1; q <= n.mx.cols(); ++q)
                if (fresh.entry(p, q) != n.mx.entry(p, q))
                    fail(ErrorKind::invariant, "matrix disagrees with children");
        if (n.height == 1) {
            bool lone = is_root && n.sums.size() == 1;
            for (uint32_t q = 1; q <= n.sums.size(); ++q) {
                uint64_t sz = n.sums.entry(q);
                if (!lone && (sz < leaf_min() || sz > leaf_max()))
                    fail(ErrorKind::invariant, "conceptual leaf occupancy out of bounds");
            }
        } else {
            if (n.kids.size() != n.sums.size())
                fail(ErrorKind::invariant, "child list out of sync");
            uint64_t abs = abs_left;
            for (uint32_t q = 1; q <= n.sums.size(); ++q) {
                const Node& kid = arena_[n.kids[q - 1]];
                if (kid.height + 1 != n.height) fail(ErrorKind::invariant, "height mismatch");
                if (kid.sums.total() != n.sums.entry(q))
                    fail(ErrorKind::invariant, "child weight out of sync");
                validate_rec(n.kids[q - 1], abs, ds, off, false);
                abs += n.sums.entry(q);
            }
        }
        return w;
    }
};

} // namespace rsel
