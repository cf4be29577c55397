#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rsel/dyn_string.hpp"
#include "rsel/error.hpp"
#include "rsel/order_index.hpp"
#include "rsel/ranking_tree.hpp"
#include "rsel/stats.hpp"

namespace rsel {

// Relabel a parent chunk after its i-th child splits at boundary d: labels
// below i survive, labels above shift up by one, and occurrences of i go to
// i or i+1 depending on which side of the split their position in the child
// chunk falls. One simultaneous scan of both chunks.
inline std::vector<uint32_t> split_relabel(std::span<const uint32_t> y_parent,
                                           std::span<const uint32_t> y_child, uint32_t i,
                                           uint32_t d, uint32_t parent_degree) {
    std::vector<uint32_t> out;
    out.reserve(y_parent.size());
    size_t at = 0;
    for (uint32_t c : y_parent) {
        if (c < 1 || c > parent_degree) fail(ErrorKind::mismatch, "parent label out of range");
        if (c < i) {
            out.push_back(c);
        } else if (c > i) {
            out.push_back(c + 1);
        } else {
            if (at == y_child.size())
                fail(ErrorKind::mismatch, "child chunk shorter than parent occurrences");
            out.push_back(y_child[at++] <= d ? i : i + 1);
        }
    }
    if (at != y_child.size())
        fail(ErrorKind::mismatch, "child chunk longer than parent occurrences");
    return out;
}

struct PointSetParams {
    uint64_t capacity = 1024; // fixed size estimate until the next rebuild
    uint32_t branch = 4;      // main-tree branching
    uint32_t branch_rank = 4; // ranking-tree branching
    uint32_t leaf_cutoff = 16;
    uint32_t count_bits = 12;
    uint32_t overlap = 2;
    uint32_t sigma = 16; // level-string alphabet: the largest possible degree

    // branch override of 0 takes the capacity-derived value
    static PointSetParams derive(uint64_t hint, uint32_t branch_override = 0,
                                 uint32_t branch_rank_override = 0) {
        PointSetParams p;
        p.capacity = std::max<uint64_t>(hint, 1024);
        double lgn = std::log2(static_cast<double>(p.capacity));
        uint32_t derived = static_cast<uint32_t>(std::ceil(std::cbrt(lgn)));
        p.branch = std::clamp<uint32_t>(branch_override ? branch_override : derived, 4, 16);
        p.branch_rank =
            std::clamp<uint32_t>(branch_rank_override ? branch_rank_override : derived, 4, 16);
        double lglg = std::log2(lgn);
        p.leaf_cutoff = std::max<uint32_t>(
            16, static_cast<uint32_t>(std::ceil((lgn / lglg) * (lgn / lglg))));
        p.overlap = std::max<uint32_t>(2, static_cast<uint32_t>(std::ceil(lglg)));
        p.count_bits = ceil_log2(p.capacity) + 2;
        p.sigma = 4 * p.branch;
        return p;
    }
};

// Dynamic range-selection structure over a planar point set: a weight
// balanced tree in y-order whose per-level chunks live in one dynamic string
// per level, with a ranking tree per sufficiently heavy node and an x-order
// index mapping coordinate ranges to ranks. Deletions mark leaves dead and
// scrub the count structures, so queries always see live points only; a full
// rebuild runs every ~n/2 updates or when dead slots outnumber live ones.
class PointSet {
public:
    explicit PointSet(uint64_t capacity_hint = 0, uint32_t branch_override = 0,
                      uint32_t branch_rank_override = 0)
        : branch_override_(branch_override), branch_rank_override_(branch_rank_override) {
        apply_params(PointSetParams::derive(capacity_hint, branch_override,
                                            branch_rank_override));
    }

    uint64_t size() const { return live_; }
    const PointSetParams& params() const { return params_; }
    Stats& stats() { return stats_; }
    const Stats& stats() const { return stats_; }
    uint32_t height() const { return root_ ? root_->height : 0; }

    Point insert(double x, double y) {
        if (std::isnan(x) || std::isnan(y))
            fail(ErrorKind::unordered, "coordinate admits no total order");
        Point p{x, y, next_id_++};
        xindex_.insert(p);
        if (!root_) {
            root_ = std::make_unique<TNode>();
            root_->height = 1;
            root_->slots = 1;
            root_->min_key = root_->max_key = p;
            root_->kids.push_back(make_leaf(p));
            ensure_strings();
        } else {
            structural_insert(p);
        }
        count_insert(p);
        ++live_;
        ++updates_;
        maybe_rebuild();
        return p;
    }

    // Removes the live point at exactly (x, y) with the smallest id.
    void erase(double x, double y) {
        auto found = xindex_.find_min_id(x, y);
        if (!found) fail(ErrorKind::notfound, "no live point at these coordinates");
        Point p = *found;
        uint64_t r = xindex_.rank_of(p);
        xindex_.erase(p);
        TNode* v = root_.get();
        uint64_t off = 0;
        while (v->height >= 1) {
            uint32_t c = pick_child(v, p);
            DynString& ds = strings_[v->height - 1];
            uint64_t pos = off + r;
            if (ds.access(pos) != c + 1)
                fail(ErrorKind::corrupt, "level chunk disagrees with tree path");
            uint64_t r_next = ds.rank(c + 1, pos) - ds.rank(c + 1, off);
            uint64_t off_next = off + left_live(v, c);
            ds.erase(pos);
            if (v->rt) {
                if (v->live - 1 <= params_.leaf_cutoff) v->rt.reset();
                else v->rt->erase(ds, off, r, c + 1);
            }
            v->live--;
            v = v->kids[c].get();
            r = r_next;
            off = off_next;
        }
        v->alive = false;
        v->live = 0;
        ++dead_slots_;
        --live_;
        ++updates_;
        maybe_rebuild();
    }

    // k-th smallest y (with its point) among live points with x in [x1, x2].
    Point select(double x1, double x2, uint64_t k) {
        if (live_ == 0) fail(ErrorKind::empty, "selection over an empty set");
        stats_.reset_query();
        auto [r1, r2] = rank_window(x1, x2);
        if (r1 > r2) fail(ErrorKind::rank, "no points in range", 0);
        uint64_t count = r2 - r1 + 1;
        if (k < 1 || k > count) fail(ErrorKind::rank, "rank outside range population", count);
        TNode* v = root_.get();
        uint64_t off = 0;
        uint32_t section_state = 1;
        while (v->height >= 1) {
            stats_.tree_nodes_visited++;
            DynString& ds = strings_[v->height - 1];
            uint32_t tau;
            uint64_t k_rem;
            if (v->rt) {
                CanonicalSet cs = v->rt->canonical(r1, r2);
                stats_.rank_nodes_visited += cs.visited;
                BranchResult res = v->rt->branch_fast(ds, off, cs, k, section_state, &stats_);
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
            off += left_live(v, tau - 1);
            v = v->kids[tau - 1].get();
            r1 = nr1;
            r2 = nr2;
            k = k_rem;
        }
        if (!v->alive || k != 1 || r1 != 1 || r2 != 1)
            fail(ErrorKind::corrupt, "selection descent ended off a live point");
        return v->pt;
    }

    // live points with x in [x1, x2] and y in [y1, y2]
    uint64_t count(double x1, double x2, double y1, double y2) {
        if (live_ == 0) return 0;
        if (!(x1 <= x2) || !(y1 <= y2)) return 0;
        auto [r1, r2] = rank_window(x1, x2);
        if (r1 > r2) return 0;
        return count_rec(root_.get(), 0, r1, r2, y1, y2);
    }

    // Rebuild from the live points with fresh capacity-derived parameters.
    void rebuild() {
        std::vector<Point> pts;
        pts.reserve(live_);
        collect_live(root_.get(), pts);
        apply_params(PointSetParams::derive(pts.size(), branch_override_,
                                            branch_rank_override_));
        build_from_y_sorted(pts);
        updates_ = 0;
        dead_slots_ = 0;
        stats_.rebuilds++;
    }

    // Full invariant walk: weight balance, conservation between levels,
    // ranking-tree and string internals, key bracketing, index agreement.
    void validate() {
        for (DynString& ds : strings_) ds.validate();
        xindex_.validate();
        if (xindex_.size() != live_) fail(ErrorKind::invariant, "index size out of sync");
        if (!root_) {
            if (live_ != 0) fail(ErrorKind::invariant, "points without a tree");
            return;
        }
        for (uint32_t h = 1; h <= root_->height; ++h)
            if (strings_[h - 1].length() != live_)
                fail(ErrorKind::invariant, "level chunk length is not the live count");
        validate_rec(root_.get(), 0, true);
    }

    SpaceBreakdown space() const {
        SpaceBreakdown sp;
        for (const DynString& ds : strings_) ds.add_space(sp);
        xindex_.add_space(sp);
        space_rec(root_.get(), sp);
        return sp;
    }

    uint64_t dead_slots() const { return dead_slots_; }
    uint32_t max_sections() const {
        return SectionLayout::make(params_.sigma, params_.count_bits, params_.overlap).sections;
    }

private:
    struct TNode {
        uint32_t height = 0;
        bool alive = true;
        Point pt{};
        Point min_key{}, max_key{};
        uint64_t live = 0, slots = 0;
        std::vector<std::unique_ptr<TNode>> kids;
        std::unique_ptr<RankingTree> rt;

        uint32_t degree() const { return static_cast<uint32_t>(kids.size()); }
    };

    PointSetParams params_;
    uint32_t branch_override_, branch_rank_override_;
    std::unique_ptr<TNode> root_;
    std::vector<DynString> strings_; // index = node height - 1
    OrderIndex xindex_;
    uint64_t next_id_ = 0;
    uint64_t live_ = 0;
    uint64_t updates_ = 0;
    uint64_t dead_slots_ = 0;
    Stats stats_;

    void apply_params(PointSetParams p) {
        params_ = p;
        root_.reset();
        strings_.clear();
        xindex_.clear();
        live_ = 0;
        dead_slots_ = 0;
    }

    static std::unique_ptr<TNode> make_leaf(const Point& p) {
        auto leaf = std::make_unique<TNode>();
        leaf->pt = leaf->min_key = leaf->max_key = p;
        leaf->slots = 1;
        leaf->live = 0; // counted when its symbols are placed
        return leaf;
    }

    void ensure_strings() {
        while (strings_.size() < root_->height)
            strings_.emplace_back(StringParams::derive(params_.sigma, params_.capacity));
    }

    RankingTree::Config rt_config(uint32_t degree) const {
        return RankingTree::Config::make(params_.branch_rank, params_.leaf_cutoff, degree,
                                         params_.count_bits, params_.overlap);
    }

    void rebuild_rt(TNode* v, uint64_t off) {
        if (v->live > params_.leaf_cutoff) {
            v->rt = std::make_unique<RankingTree>(RankingTree::build(
                rt_config(v->degree()), strings_[v->height - 1], RegionHandle{off, v->live}));
        } else {
            v->rt.reset();
        }
    }

    uint64_t slot_cap(uint32_t h) const {
        uint64_t w = 1;
        for (uint32_t i = 0; i < h; ++i) w *= params_.branch;
        return 2 * w;
    }

    static uint64_t left_live(const TNode* v, uint32_t c) {
        uint64_t acc = 0;
        for (uint32_t j = 0; j < c; ++j) acc += v->kids[j]->live;
        return acc;
    }

    // first child whose key range can hold p: binary search over max keys
    static uint32_t pick_child(const TNode* v, const Point& p) {
        uint32_t lo = 0, hi = v->degree() - 1;
        while (lo < hi) {
            uint32_t mid = (lo + hi) / 2;
            if (y_less(v->kids[mid]->max_key, p)) lo = mid + 1;
            else hi = mid;
        }
        return lo;
    }

    std::pair<uint64_t, uint64_t> rank_window(double x1, double x2) const {
        if (std::isnan(x1) || std::isnan(x2)) return {1, 0};
        uint64_t r1 = xindex_.count_x_below(x1, false) + 1;
        uint64_t r2 = xindex_.count_x_below(x2, true);
        return {r1, r2};
    }

    void expand_keys(TNode* v, const Point& p) {
        if (y_less(p, v->min_key)) v->min_key = p;
        if (y_less(v->max_key, p)) v->max_key = p;
    }

    void structural_insert(const Point& p) {
        struct_rec(root_.get(), p, 0);
        if (root_->slots > slot_cap(root_->height) || root_->degree() > 4 * params_.branch) {
            // lift the root, then split it as the only child of the new one
            auto nr = std::make_unique<TNode>();
            nr->height = root_->height + 1;
            nr->slots = root_->slots;
            nr->live = root_->live;
            nr->min_key = root_->min_key;
            nr->max_key = root_->max_key;
            nr->kids.push_back(std::move(root_));
            root_ = std::move(nr);
            ensure_strings();
            std::vector<uint32_t> all_ones(root_->live, 1);
            strings_[root_->height - 1] = DynString(
                StringParams::derive(params_.sigma, params_.capacity), all_ones);
            split_child(root_.get(), 0, 0, 0);
        }
    }

    void struct_rec(TNode* v, const Point& p, uint64_t off) {
        v->slots++;
        expand_keys(v, p);
        if (v->height == 1) {
            uint32_t c = 0;
            while (c < v->degree() && y_less(v->kids[c]->pt, p)) ++c;
            v->kids.insert(v->kids.begin() + c, make_leaf(p));
            // the new slot shifts the labels of every leaf to its right
            if (v->live > 0 && c + 1 < v->degree()) {
                DynString& ds = strings_[0];
                std::vector<uint32_t> region = ds.substring(off + 1, off + v->live);
                bool changed = false;
                for (uint32_t& s : region)
                    if (s >= c + 1) ++s, changed = true;
                if (changed) overwrite_region(ds, off, region);
            }
            rebuild_rt(v, off);
            return;
        }
        uint32_t c = pick_child(v, p);
        uint64_t child_off = off + left_live(v, c);
        struct_rec(v->kids[c].get(), p, child_off);
        TNode* child = v->kids[c].get();
        if (child->slots > slot_cap(child->height) || child->degree() > 4 * params_.branch)
            split_child(v, c, off, child_off);
    }

    // Split child c of parent: relabel the parent chunk, partition the
    // child's chunk, and rebuild the ranking trees of all three nodes.
    void split_child(TNode* parent, uint32_t c, uint64_t parent_off, uint64_t child_off) {
        TNode* v = parent->kids[c].get();
        uint32_t i = c + 1;
        DynString& ds_p = strings_[parent->height - 1];
        DynString& ds_v = strings_[v->height - 1];
        std::vector<uint32_t> y_parent =
            ds_p.substring(parent_off + 1, parent_off + parent->live);
        std::vector<uint32_t> y_child = ds_v.substring(child_off + 1, child_off + v->live);
        // slot-weight midpoint, ties to the left
        uint32_t d = 1;
        uint64_t acc = v->kids[0]->slots;
        while (d < v->degree() && 2 * acc < v->slots) acc += v->kids[d]->slots, ++d;
        if (d == v->degree()) --d;
        std::vector<uint32_t> relabeled =
            split_relabel(y_parent, y_child, i, d, parent->degree());
        std::vector<uint32_t> partitioned;
        partitioned.reserve(y_child.size());
        for (uint32_t s : y_child)
            if (s <= d) partitioned.push_back(s);
        for (uint32_t s : y_child)
            if (s > d) partitioned.push_back(s - d);
        // structural move
        auto v2 = std::make_unique<TNode>();
        v2->height = v->height;
        v2->kids.assign(std::make_move_iterator(v->kids.begin() + d),
                        std::make_move_iterator(v->kids.end()));
        v->kids.resize(d);
        refresh_summary(v);
        refresh_summary(v2.get());
        TNode* v2p = v2.get();
        parent->kids.insert(parent->kids.begin() + c + 1, std::move(v2));
        // rewrite both level chunks, then refresh the ranking trees
        overwrite_region(ds_p, parent_off, relabeled);
        overwrite_region(ds_v, child_off, partitioned);
        rebuild_rt(v, child_off);
        rebuild_rt(v2p, child_off + v->live);
        rebuild_rt(parent, parent_off);
    }

    void refresh_summary(TNode* v) {
        v->slots = 0;
        v->live = 0;
        v->min_key = v->kids.front()->min_key;
        v->max_key = v->kids.front()->max_key;
        for (const auto& k : v->kids) {
            v->slots += k->slots;
            v->live += k->live;
            if (y_less(k->min_key, v->min_key)) v->min_key = k->min_key;
            if (y_less(v->max_key, k->max_key)) v->max_key = k->max_key;
        }
    }

    // batch rewrite above the threshold, plain edits below it
    void overwrite_region(DynString& ds, uint64_t off, std::span<const uint32_t> vals) {
        if (vals.empty()) return;
        if (vals.size() > ds.params().batch_threshold_syms) {
            ds.batch_overwrite(off + 1, vals);
        } else {
            for (size_t j = 0; j < vals.size(); ++j) {
                if (ds.access(off + 1 + j) != vals[j]) {
                    ds.erase(off + 1 + j);
                    ds.insert(vals[j], off + 1 + j);
                }
            }
        }
    }

    void count_insert(const Point& p) {
        uint64_t r = xindex_.rank_of(p);
        TNode* v = root_.get();
        uint64_t off = 0;
        while (v->height >= 1) {
            uint32_t c = pick_child(v, p);
            DynString& ds = strings_[v->height - 1];
            ds.insert(c + 1, off + r);
            v->live++;
            if (v->rt) v->rt->insert(ds, off, r, c + 1);
            else if (v->live > params_.leaf_cutoff) rebuild_rt(v, off);
            uint64_t off_next = off + left_live(v, c);
            r = ds.rank(c + 1, off + r) - ds.rank(c + 1, off);
            off = off_next;
            v = v->kids[c].get();
        }
        v->live = 1;
    }

    uint64_t count_rec(TNode* v, uint64_t off, uint64_t r1, uint64_t r2, double y1, double y2) {
        stats_.tree_nodes_visited++;
        if (v->height == 0) return v->alive && v->pt.y >= y1 && v->pt.y <= y2 ? 1 : 0;
        uint32_t tlo = 1;
        while (tlo <= v->degree() && v->kids[tlo - 1]->max_key.y < y1) ++tlo;
        uint32_t thi = v->degree();
        while (thi >= 1 && v->kids[thi - 1]->min_key.y > y2) --thi;
        if (tlo > thi || tlo > v->degree() || thi < 1) return 0;
        DynString& ds = strings_[v->height - 1];
        uint64_t acc = 0;
        if (tlo + 1 <= thi - 1) {
            if (v->rt) {
                CanonicalSet cs = v->rt->canonical(r1, r2);
                stats_.rank_nodes_visited += cs.visited;
                acc += v->rt->count_labels(ds, off, cs, tlo + 1, thi - 1, &stats_);
            } else {
                acc += ds.range_count(off + r1, off + r2, tlo + 1, thi - 1);
            }
        }
        uint32_t bounds[2] = {tlo, thi};
        uint32_t nbounds = tlo == thi ? 1 : 2;
        for (uint32_t t = 0; t < nbounds; ++t) {
            uint32_t tau = bounds[t];
            uint64_t nr1 = ds.rank(tau, off + r1 - 1) - ds.rank(tau, off) + 1;
            uint64_t nr2 = ds.rank(tau, off + r2) - ds.rank(tau, off);
            if (nr1 > nr2) continue;
            acc += count_rec(v->kids[tau - 1].get(), off + left_live(v, tau - 1), nr1, nr2,
                             y1, y2);
        }
        return acc;
    }

    void collect_live(const TNode* v, std::vector<Point>& out) const {
        if (!v) return;
        if (v->height == 0) {
            if (v->alive) out.push_back(v->pt);
            return;
        }
        for (const auto& k : v->kids) collect_live(k.get(), out);
    }

    void maybe_rebuild() {
        uint64_t threshold = std::max<uint64_t>(8, (live_ + 1) / 2);
        if (updates_ >= threshold || dead_slots_ > live_) rebuild();
    }

    void build_from_y_sorted(std::span<const Point> pts) {
        if (pts.empty()) return;
        // bottom level: one leaf per point
        std::vector<std::unique_ptr<TNode>> level;
        level.reserve(pts.size());
        for (const Point& p : pts) {
            auto leaf = make_leaf(p);
            leaf->live = 1;
            level.push_back(std::move(leaf));
        }
        uint64_t target = 1;
        while (level.size() > 1 || level.front()->height == 0) {
            target *= params_.branch;
            std::vector<std::unique_ptr<TNode>> up;
            size_t at = 0;
            while (at < level.size()) {
                uint64_t acc = 0;
                size_t take = 0;
                while (at + take < level.size() && acc < target)
                    acc += level[at + take++]->slots;
                // fold a light tail into this group
                uint64_t rest = 0;
                for (size_t j = at + take; j < level.size(); ++j) rest += level[j]->slots;
                if (rest > 0 && rest < target / 2) take = level.size() - at;
                auto nd = std::make_unique<TNode>();
                nd->height = level[at]->height + 1;
                for (size_t t = 0; t < take; ++t) nd->kids.push_back(std::move(level[at + t]));
                refresh_summary(nd.get());
                at += take;
                up.push_back(std::move(nd));
            }
            level = std::move(up);
        }
        root_ = std::move(level.front());
        // level chunks: one simultaneous x-ordered pass per node
        std::vector<std::vector<uint32_t>> bufs(root_->height);
        std::vector<Point> xsorted(pts.begin(), pts.end());
        std::sort(xsorted.begin(), xsorted.end(), x_less);
        fill_chunks(root_.get(), xsorted, bufs);
        strings_.clear();
        for (uint32_t h = 1; h <= root_->height; ++h)
            strings_.emplace_back(StringParams::derive(params_.sigma, params_.capacity),
                                  bufs[h - 1]);
        std::vector<uint64_t> cursor(root_->height, 0);
        place_rts(root_.get(), cursor);
        xindex_.build_from_x_sorted(xsorted);
        live_ = pts.size();
    }

    void fill_chunks(TNode* v, std::vector<Point>& recs, std::vector<std::vector<uint32_t>>& bufs) {
        if (v->height == 0) return;
        std::vector<std::vector<Point>> parts(v->degree());
        for (const Point& p : recs) {
            uint32_t c = pick_child(v, p);
            bufs[v->height - 1].push_back(c + 1);
            parts[c].push_back(p);
        }
        for (uint32_t c = 0; c < v->degree(); ++c) fill_chunks(v->kids[c].get(), parts[c], bufs);
    }

    void place_rts(TNode* v, std::vector<uint64_t>& cursor) {
        if (v->height == 0) return;
        uint64_t off = cursor[v->height - 1];
        cursor[v->height - 1] += v->live;
        rebuild_rt(v, off);
        for (auto& k : v->kids) place_rts(k.get(), cursor);
    }

    uint64_t validate_rec(TNode* v, uint64_t off, bool is_root) {
        if (v->height == 0) {
            if (v->alive != (v->live == 1)) fail(ErrorKind::invariant, "leaf liveness wrong");
            if (v->slots != 1) fail(ErrorKind::invariant, "leaf slot weight wrong");
            return v->live;
        }
        uint64_t slots = 0, lives = 0;
        for (const auto& k : v->kids) {
            slots += k->slots;
            lives += k->live;
        }
        if (slots != v->slots || lives != v->live)
            fail(ErrorKind::invariant, "node summaries stale");
        if (v->slots > slot_cap(v->height)) fail(ErrorKind::invariant, "node over slot cap");
        if (!is_root && 2 * v->slots < slot_cap(v->height) / 2)
            fail(ErrorKind::invariant, "node under slot floor");
        if (v->degree() > 4 * params_.branch) fail(ErrorKind::invariant, "degree too large");
        DynString& ds = strings_[v->height - 1];
        // conservation: the chunk's per-symbol counts are the children's
        // live weights
        if (v->live > 0) {
            uint64_t freq[64] = {0};
            ds.freq_range(off + 1, v->live, freq);
            for (uint32_t c = 0; c < v->degree(); ++c)
                if (freq[c] != v->kids[c]->live)
                    fail(ErrorKind::invariant, "chunk counts disagree with child weights");
            for (uint32_t s = v->degree(); s < params_.sigma; ++s)
                if (freq[s]) fail(ErrorKind::invariant, "chunk labels beyond node degree");
        }
        bool expect_rt = v->live > params_.leaf_cutoff;
        if (expect_rt != (v->rt != nullptr))
            fail(ErrorKind::invariant, "ranking tree presence wrong");
        if (v->rt) {
            if (v->rt->weight() != v->live)
                fail(ErrorKind::invariant, "ranking tree weight out of sync");
            v->rt->validate(ds, off);
        }
        uint64_t child_off = off;
        for (const auto& k : v->kids) {
            if (k->height + 1 != v->height) fail(ErrorKind::invariant, "ragged heights");
            if (k->live > 0) {
                if (y_less(k->min_key, v->min_key) || y_less(v->max_key, k->max_key))
                    fail(ErrorKind::invariant, "child keys outside parent bracket");
            }
            validate_rec(k.get(), child_off, false);
            child_off += k->live;
        }
        // children key ranges must be disjoint and ordered
        for (uint32_t c = 0; c + 1 < v->degree(); ++c)
            if (y_less(v->kids[c + 1]->min_key, v->kids[c]->max_key))
                fail(ErrorKind::invariant, "sibling key ranges overlap");
        return v->live;
    }

    void space_rec(const TNode* v, SpaceBreakdown& sp) const {
        if (!v) return;
        if (v->height == 0) {
            sp.tree_nodes += 256;
            return;
        }
        sp.tree_nodes += 2 * 192 + 128 + 64 + v->degree() * 64;
        if (v->rt) v->rt->add_space(sp);
        for (const auto& k : v->kids) space_rec(k.get(), sp);
    }
};

} // namespace rsel
