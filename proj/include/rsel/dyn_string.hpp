#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rsel/bits.hpp"
#include "rsel/error.hpp"
#include "rsel/packed_fields.hpp"
#include "rsel/stats.hpp"

namespace rsel {

// Sizing of a dynamic string instance, fixed at build time from a capacity
// estimate. Leaves are superblocks of at most 2W bits; W shrinks the tree
// enough that rank/insert stay cheap while batched rewrites touch whole
// blocks. Small estimates clamp to floors so occupancy bounds stay sound.
struct StringParams {
    uint32_t sigma = 2;
    uint32_t sym_width = 1;
    uint64_t w_bits = 256;               // W
    uint64_t superblock_bits = 512;      // 2W
    uint64_t block_bits = 64;
    uint32_t max_leaf_syms = 0;
    uint32_t min_leaf_syms = 0;
    uint32_t batch_threshold_syms = 0;   // batched path required above this

    static StringParams derive(uint32_t sigma, uint64_t capacity_hint) {
        if (sigma < 1 || sigma > 64)
            fail(ErrorKind::alphabet, "alphabet size must be in [1..64]");
        StringParams p;
        p.sigma = sigma;
        p.sym_width = std::max<uint32_t>(1, ceil_log2(sigma));
        uint64_t n = std::max<uint64_t>(capacity_hint, 16);
        uint64_t lgn = std::max<uint64_t>(ceil_log2(n), 4);
        double lglg = std::log2(static_cast<double>(lgn));
        p.w_bits = std::max<uint64_t>(256, static_cast<uint64_t>(
                       std::ceil(static_cast<double>(lgn * lgn) / lglg)));
        p.superblock_bits = 2 * p.w_bits;
        uint64_t blk = std::max<uint64_t>(64, static_cast<uint64_t>(
                           std::ceil(std::pow(static_cast<double>(lgn), 1.5))));
        uint64_t rem = blk % p.sym_width;
        p.block_bits = rem ? blk + (p.sym_width - rem) : blk;
        p.max_leaf_syms = std::max<uint32_t>(2, static_cast<uint32_t>(p.superblock_bits / p.sym_width));
        p.min_leaf_syms = std::max<uint32_t>(1, p.max_leaf_syms / 2);
        p.batch_threshold_syms = static_cast<uint32_t>(5 * p.w_bits / p.sym_width);
        return p;
    }
};

// Position of a node's chunk within the per-level string it lives in.
struct RegionHandle {
    uint64_t offset = 0; // symbols before the region
    uint64_t len = 0;
};

// Dynamic sequence over a small alphabet [1..sigma] with positional access,
// rank, range counting, insert/delete and batched overwrite. A B-tree of
// routing nodes carries per-child (length, per-symbol count) summaries;
// leaves are bit-packed superblocks chained for sequential scans. All
// positions and ranks are 1-based.
class DynString {
public:
    static constexpr uint32_t kFan = 16;
    static constexpr uint32_t kMinFan = 8;

    struct Leaf {
        std::vector<uint64_t> bits;
        uint32_t size = 0;
        Leaf* next = nullptr;
    };

    struct LeafLocation {
        const Leaf* leaf = nullptr;
        uint32_t offset = 0; // 1-based within the leaf
        uint32_t leaf_size = 0;
    };

    explicit DynString(uint32_t sigma, uint64_t capacity_hint)
        : DynString(StringParams::derive(sigma, capacity_hint)) {}

    explicit DynString(StringParams p) : p_(p) {
        root_ = std::make_unique<Node>();
        root_->leaf_children = true;
        root_->leaves.push_back(new_leaf());
        root_->sums.push_back(Child{0, std::vector<uint32_t>(p_.sigma, 0)});
    }

    DynString(StringParams p, std::span<const uint32_t> symbols) : p_(p) {
        build_from(symbols);
    }

    DynString(DynString&&) noexcept = default;
    DynString& operator=(DynString&&) noexcept = default;

    uint64_t length() const { return len_; }
    uint32_t sigma() const { return p_.sigma; }
    const StringParams& params() const { return p_; }

    uint32_t access(uint64_t i) const {
        check_pos(i, len_, "access");
        const Node* nd = root_.get();
        for (;;) {
            uint32_t c = pick_child_at(nd, i);
            if (nd->leaf_children)
                return leaf_get(*nd->leaves[c], static_cast<uint32_t>(i - 1)) + 1;
            nd = nd->nodes[c].get();
        }
    }

    // occurrences of sym in the prefix of length i; rank(sym, 0) == 0.
    uint64_t rank(uint32_t sym, uint64_t i) const {
        check_sym(sym);
        if (i > len_) fail(ErrorKind::range, "rank prefix past end");
        if (i == 0) return 0;
        uint32_t v = sym - 1;
        const Node* nd = root_.get();
        uint64_t acc = 0;
        for (;;) {
            uint32_t c = pick_child_at(nd, i);
            for (uint32_t j = 0; j < c; ++j) acc += nd->sums[j].cnt[v];
            if (nd->leaf_children)
                return acc + leaf_count_prefix(*nd->leaves[c], static_cast<uint32_t>(i), v);
            nd = nd->nodes[c].get();
        }
    }

    // |{p in [x1..x2] : value in [y1..y2]}|; empty position range gives 0.
    uint64_t range_count(uint64_t x1, uint64_t x2, uint32_t y1, uint32_t y2) const {
        if (x1 < 1 || x2 > len_ || x1 > x2 + 1)
            fail(ErrorKind::range, "count positions out of range");
        if (y1 < 1 || y2 > p_.sigma || y1 > y2)
            fail(ErrorKind::range, "count values out of range");
        if (x1 > x2) return 0;
        return count_rec(root_.get(), x1, x2, y1 - 1, y2 - 1);
    }

    void insert(uint32_t sym, uint64_t i) {
        check_sym(sym);
        if (i < 1 || i > len_ + 1) fail(ErrorKind::range, "insert position out of range");
        auto sibling = insert_rec(root_.get(), i, sym - 1);
        if (sibling) grow_root(std::move(sibling));
        ++len_;
    }

    void erase(uint64_t i) {
        check_pos(i, len_, "erase");
        erase_rec(root_.get(), i);
        --len_;
        while (!root_->leaf_children && root_->sums.size() == 1) {
            auto child = std::move(root_->nodes[0]);
            root_ = std::move(child);
        }
    }

    // Overwrite values[j] onto position i+j. Length is unchanged; ancestor
    // summaries are fixed once per touched leaf.
    void batch_overwrite(uint64_t i, std::span<const uint32_t> values) {
        if (values.empty()) return;
        if (i < 1 || i + values.size() - 1 > len_)
            fail(ErrorKind::range, "overwrite region out of range");
        for (uint32_t v : values) check_sym(v);
        std::vector<int64_t> delta(p_.sigma, 0);
        overwrite_rec(root_.get(), i, values, delta.data());
    }

    std::vector<uint32_t> substring(uint64_t i, uint64_t j) const {
        if (i < 1 || j > len_ || i > j + 1)
            fail(ErrorKind::range, "substring out of range");
        std::vector<uint32_t> out;
        if (i > j) return out;
        out.reserve(j - i + 1);
        LeafLocation loc = locate_leaf(i);
        const Leaf* lf = loc.leaf;
        uint32_t off = loc.offset - 1;
        uint64_t remaining = j - i + 1;
        while (remaining > 0) {
            uint32_t take = static_cast<uint32_t>(std::min<uint64_t>(remaining, lf->size - off));
            for (uint32_t t = 0; t < take; ++t) out.push_back(leaf_get(*lf, off + t) + 1);
            remaining -= take;
            lf = lf->next;
            off = 0;
        }
        return out;
    }

    LeafLocation locate_leaf(uint64_t r) const {
        check_pos(r, len_, "locate");
        const Node* nd = root_.get();
        for (;;) {
            uint32_t c = pick_child_at(nd, r);
            if (nd->leaf_children)
                return LeafLocation{nd->leaves[c].get(), static_cast<uint32_t>(r),
                                    nd->leaves[c]->size};
            nd = nd->nodes[c].get();
        }
    }

    // Adds the symbol frequencies of [pos..pos+count-1] into out[0..sigma).
    // Word-parallel: each step consumes up to half a word of symbols.
    void freq_range(uint64_t pos, uint64_t count, uint64_t* out) const {
        if (count == 0) return;
        if (pos < 1 || pos + count - 1 > len_)
            fail(ErrorKind::range, "frequency range out of range");
        LeafLocation loc = locate_leaf(pos);
        const Leaf* lf = loc.leaf;
        uint32_t off = loc.offset - 1;
        uint64_t remaining = count;
        const uint32_t chunk_syms = 32 / p_.sym_width;
        const uint32_t acc_width = kFreqAccWidth;
        while (remaining > 0) {
            uint32_t take = static_cast<uint32_t>(std::min<uint64_t>(remaining, lf->size - off));
            PackedFields acc(p_.sigma, acc_width);
            uint32_t done = 0;
            while (done < take) {
                uint32_t nsym = std::min(chunk_syms, take - done);
                SymbolChunk ch{get_bits(lf->bits.data(), uint64_t(off + done) * p_.sym_width,
                                        nsym * p_.sym_width),
                               nsym, p_.sym_width};
                acc = pf_add(acc, pf_freq(ch, p_.sigma, acc_width));
                done += nsym;
            }
            for (uint32_t s = 1; s <= p_.sigma; ++s) out[s - 1] += acc.get(s);
            remaining -= take;
            lf = lf->next;
            off = 0;
        }
    }

    // Full consistency walk; throws ErrorKind::invariant on any violation.
    void validate() const {
        uint64_t total = validate_rec(root_.get(), root_.get());
        if (total != len_) fail(ErrorKind::invariant, "length does not match leaf total");
        // leaf chain must enumerate leaves in order
        std::vector<const Leaf*> inorder;
        collect_leaves(root_.get(), inorder);
        for (size_t i = 0; i + 1 < inorder.size(); ++i)
            if (inorder[i]->next != inorder[i + 1])
                fail(ErrorKind::invariant, "leaf chain broken");
        if (!inorder.empty() && inorder.back()->next != nullptr)
            fail(ErrorKind::invariant, "leaf chain tail not terminated");
    }

    void add_space(SpaceBreakdown& sp) const { space_rec(root_.get(), sp); }

private:
    struct Child {
        uint64_t len = 0;
        std::vector<uint32_t> cnt; // per stored value
    };

    struct Node {
        bool leaf_children = false;
        std::vector<Child> sums;
        std::vector<std::unique_ptr<Node>> nodes;
        std::vector<std::unique_ptr<Leaf>> leaves;

        uint32_t degree() const { return static_cast<uint32_t>(sums.size()); }
    };

    static constexpr uint32_t kFreqAccWidth = 12; // counts within one leaf

    StringParams p_;
    std::unique_ptr<Node> root_;
    uint64_t len_ = 0;

    void check_sym(uint32_t sym) const {
        if (sym < 1 || sym > p_.sigma) fail(ErrorKind::alphabet, "symbol outside alphabet");
    }

    static void check_pos(uint64_t i, uint64_t n, const char* what) {
        if (i < 1 || i > n) fail(ErrorKind::range, std::string(what) + " position out of range");
    }

    std::unique_ptr<Leaf> new_leaf() const {
        auto lf = std::make_unique<Leaf>();
        lf->bits.assign(leaf_words(), 0);
        return lf;
    }

    size_t leaf_words() const {
        return static_cast<size_t>((uint64_t(p_.max_leaf_syms) * p_.sym_width + 63) / 64 + 1);
    }

    uint32_t leaf_get(const Leaf& lf, uint32_t idx0) const {
        return static_cast<uint32_t>(
            get_bits(lf.bits.data(), uint64_t(idx0) * p_.sym_width, p_.sym_width));
    }

    void leaf_set(Leaf& lf, uint32_t idx0, uint32_t v) const {
        set_bits(lf.bits.data(), uint64_t(idx0) * p_.sym_width, p_.sym_width, v);
    }

    void leaf_insert(Leaf& lf, uint32_t idx0, uint32_t v) const {
        uint64_t w = p_.sym_width;
        uint64_t from = uint64_t(idx0) * w;
        uint64_t nbits = (uint64_t(lf.size) - idx0) * w;
        // move the tail up by one symbol, high chunks first
        uint64_t done = 0;
        while (done < nbits) {
            uint32_t chunk = static_cast<uint32_t>(std::min<uint64_t>(64, nbits - done));
            uint64_t src = from + (nbits - done - chunk);
            set_bits(lf.bits.data(), src + w, chunk, get_bits(lf.bits.data(), src, chunk));
            done += chunk;
        }
        set_bits(lf.bits.data(), from, static_cast<uint32_t>(w), v);
        ++lf.size;
    }

    uint32_t leaf_erase(Leaf& lf, uint32_t idx0) const {
        uint64_t w = p_.sym_width;
        uint32_t v = leaf_get(lf, idx0);
        uint64_t from = uint64_t(idx0) * w;
        uint64_t nbits = (uint64_t(lf.size) - idx0 - 1) * w;
        uint64_t done = 0;
        while (done < nbits) {
            uint32_t chunk = static_cast<uint32_t>(std::min<uint64_t>(64, nbits - done));
            set_bits(lf.bits.data(), from + done, chunk,
                     get_bits(lf.bits.data(), from + w + done, chunk));
            done += chunk;
        }
        --lf.size;
        return v;
    }

    // occurrences of stored value v among the first z symbols of a leaf
    uint32_t leaf_count_prefix(const Leaf& lf, uint32_t z, uint32_t v) const {
        const uint32_t w = p_.sym_width;
        const uint32_t chunk_syms = 64 / w;
        uint32_t total = 0;
        uint32_t done = 0;
        while (done < z) {
            uint32_t nsym = std::min(chunk_syms, z - done);
            uint64_t bits = get_bits(lf.bits.data(), uint64_t(done) * w, nsym * w);
            total += count_matching_fields(bits, nsym, w, v);
            done += nsym;
        }
        return total;
    }

    Child leaf_summary(const Leaf& lf) const {
        Child c;
        c.len = lf.size;
        c.cnt.assign(p_.sigma, 0);
        std::vector<uint64_t> tmp(p_.sigma, 0);
        leaf_freq(lf, 0, lf.size, tmp.data());
        for (uint32_t v = 0; v < p_.sigma; ++v) c.cnt[v] = static_cast<uint32_t>(tmp[v]);
        return c;
    }

    void leaf_freq(const Leaf& lf, uint32_t from, uint32_t count, uint64_t* out) const {
        const uint32_t chunk_syms = 32 / p_.sym_width;
        PackedFields acc(p_.sigma, kFreqAccWidth);
        uint32_t done = 0;
        while (done < count) {
            uint32_t nsym = std::min(chunk_syms, count - done);
            SymbolChunk ch{get_bits(lf.bits.data(), uint64_t(from + done) * p_.sym_width,
                                    nsym * p_.sym_width),
                           nsym, p_.sym_width};
            acc = pf_add(acc, pf_freq(ch, p_.sigma, kFreqAccWidth));
            done += nsym;
        }
        for (uint32_t s = 1; s <= p_.sigma; ++s) out[s - 1] += acc.get(s);
    }

    Child node_summary(const Node& nd) const {
        Child c;
        c.cnt.assign(p_.sigma, 0);
        for (const Child& s : nd.sums) {
            c.len += s.len;
            for (uint32_t v = 0; v < p_.sigma; ++v) c.cnt[v] += s.cnt[v];
        }
        return c;
    }

    // child holding position i (1-based); i <= total length of the node
    static uint32_t pick_child_at(const Node* nd, uint64_t& i) {
        for (uint32_t c = 0;; ++c) {
            assert(c < nd->sums.size());
            if (i <= nd->sums[c].len) return c;
            i -= nd->sums[c].len;
        }
    }

    // child receiving an insertion at position i; boundary inserts go left
    static uint32_t pick_child_ins(const Node* nd, uint64_t& i) {
        uint32_t last = nd->degree() - 1;
        for (uint32_t c = 0;; ++c) {
            if (c == last || i <= nd->sums[c].len + 1) return c;
            i -= nd->sums[c].len;
        }
    }

    uint64_t count_rec(const Node* nd, uint64_t x1, uint64_t x2, uint32_t v1, uint32_t v2) const {
        uint64_t acc = 0;
        uint64_t cum = 0;
        for (uint32_t c = 0; c < nd->degree() && cum < x2; ++c) {
            uint64_t lo = cum + 1, hi = cum + nd->sums[c].len;
            cum = hi;
            if (hi < x1 || lo > x2 || lo > hi) continue;
            if (x1 <= lo && hi <= x2) {
                for (uint32_t v = v1; v <= v2; ++v) acc += nd->sums[c].cnt[v];
            } else if (nd->leaf_children) {
                uint32_t from = static_cast<uint32_t>(std::max(x1, lo) - lo);
                uint32_t cnt = static_cast<uint32_t>(std::min(x2, hi) - std::max(x1, lo) + 1);
                uint64_t freq[64] = {0};
                leaf_freq(*nd->leaves[c], from, cnt, freq);
                for (uint32_t v = v1; v <= v2; ++v) acc += freq[v];
            } else {
                acc += count_rec(nd->nodes[c].get(), std::max(x1, lo) - lo + 1,
                                 std::min(x2, hi) - lo + 1, v1, v2);
            }
        }
        return acc;
    }

    std::unique_ptr<Node> insert_rec(Node* nd, uint64_t i, uint32_t v) {
        uint32_t c = pick_child_ins(nd, i);
        if (nd->leaf_children) {
            Leaf& lf = *nd->leaves[c];
            leaf_insert(lf, static_cast<uint32_t>(i - 1), v);
            nd->sums[c].len++;
            nd->sums[c].cnt[v]++;
            if (lf.size > p_.max_leaf_syms) split_leaf(nd, c);
        } else {
            auto sibling = insert_rec(nd->nodes[c].get(), i, v);
            nd->sums[c].len++;
            nd->sums[c].cnt[v]++;
            if (sibling) {
                Child sum = node_summary(*sibling);
                nd->nodes.insert(nd->nodes.begin() + c + 1, std::move(sibling));
                nd->sums.insert(nd->sums.begin() + c + 1, std::move(sum));
                nd->sums[c] = node_summary(*nd->nodes[c]);
            }
        }
        if (nd->degree() > kFan) return split_node(nd);
        return nullptr;
    }

    void split_leaf(Node* nd, uint32_t c) {
        Leaf& lf = *nd->leaves[c];
        uint32_t left = (lf.size + 1) / 2;
        auto right = new_leaf();
        uint32_t moved = lf.size - left;
        uint64_t w = p_.sym_width;
        uint64_t done = 0, nbits = uint64_t(moved) * w;
        while (done < nbits) {
            uint32_t chunk = static_cast<uint32_t>(std::min<uint64_t>(64, nbits - done));
            set_bits(right->bits.data(), done, chunk,
                     get_bits(lf.bits.data(), uint64_t(left) * w + done, chunk));
            done += chunk;
        }
        right->size = moved;
        lf.size = left;
        right->next = lf.next;
        lf.next = right.get();
        Child rs = leaf_summary(*right);
        nd->leaves.insert(nd->leaves.begin() + c + 1, std::move(right));
        nd->sums.insert(nd->sums.begin() + c + 1, std::move(rs));
        nd->sums[c] = leaf_summary(*nd->leaves[c]);
    }

    std::unique_ptr<Node> split_node(Node* nd) {
        uint32_t keep = nd->degree() / 2;
        auto right = std::make_unique<Node>();
        right->leaf_children = nd->leaf_children;
        right->sums.assign(std::make_move_iterator(nd->sums.begin() + keep),
                           std::make_move_iterator(nd->sums.end()));
        nd->sums.resize(keep);
        if (nd->leaf_children) {
            right->leaves.assign(std::make_move_iterator(nd->leaves.begin() + keep),
                                 std::make_move_iterator(nd->leaves.end()));
            nd->leaves.resize(keep);
        } else {
            right->nodes.assign(std::make_move_iterator(nd->nodes.begin() + keep),
                                std::make_move_iterator(nd->nodes.end()));
            nd->nodes.resize(keep);
        }
        return right;
    }

    void grow_root(std::unique_ptr<Node> sibling) {
        auto nr = std::make_unique<Node>();
        nr->leaf_children = false;
        nr->sums.push_back(node_summary(*root_));
        nr->sums.push_back(node_summary(*sibling));
        nr->nodes.push_back(std::move(root_));
        nr->nodes.push_back(std::move(sibling));
        root_ = std::move(nr);
    }

    uint32_t erase_rec(Node* nd, uint64_t i) {
        uint32_t c = pick_child_at(nd, i);
        uint32_t v;
        if (nd->leaf_children) {
            v = leaf_erase(*nd->leaves[c], static_cast<uint32_t>(i - 1));
            nd->sums[c].len--;
            nd->sums[c].cnt[v]--;
            fix_leaf_underflow(nd, c);
        } else {
            v = erase_rec(nd->nodes[c].get(), i);
            nd->sums[c].len--;
            nd->sums[c].cnt[v]--;
            if (nd->nodes[c]->degree() < kMinFan) fix_node_underflow(nd, c);
        }
        return v;
    }

    void fix_leaf_underflow(Node* nd, uint32_t c) {
        if (nd->leaves[c]->size >= p_.min_leaf_syms) return;
        if (nd->degree() == 1) return; // lone leaf may be short
        uint32_t l = c > 0 ? c - 1 : c; // merge pair (l, l+1)
        Leaf& a = *nd->leaves[l];
        Leaf& b = *nd->leaves[l + 1];
        uint32_t total = a.size + b.size;
        if (total <= p_.max_leaf_syms) {
            uint64_t w = p_.sym_width;
            uint64_t done = 0, nbits = uint64_t(b.size) * w;
            while (done < nbits) {
                uint32_t chunk = static_cast<uint32_t>(std::min<uint64_t>(64, nbits - done));
                set_bits(a.bits.data(), uint64_t(a.size) * w + done, chunk,
                         get_bits(b.bits.data(), done, chunk));
                done += chunk;
            }
            a.size = total;
            a.next = b.next;
            nd->leaves.erase(nd->leaves.begin() + l + 1);
            nd->sums.erase(nd->sums.begin() + l + 1);
            nd->sums[l] = leaf_summary(a);
        } else {
            // redistribute evenly through a scratch buffer
            std::vector<uint32_t> tmp;
            tmp.reserve(total);
            for (uint32_t t = 0; t < a.size; ++t) tmp.push_back(leaf_get(a, t));
            for (uint32_t t = 0; t < b.size; ++t) tmp.push_back(leaf_get(b, t));
            uint32_t half = (total + 1) / 2;
            a.size = half;
            b.size = total - half;
            for (uint32_t t = 0; t < half; ++t) leaf_set(a, t, tmp[t]);
            for (uint32_t t = 0; t < total - half; ++t) leaf_set(b, t, tmp[half + t]);
            nd->sums[l] = leaf_summary(a);
            nd->sums[l + 1] = leaf_summary(b);
        }
    }

    void fix_node_underflow(Node* nd, uint32_t c) {
        if (nd->degree() == 1) return;
        uint32_t l = c > 0 ? c - 1 : c;
        Node& a = *nd->nodes[l];
        Node& b = *nd->nodes[l + 1];
        if (a.degree() + b.degree() <= kFan) {
            std::move(b.sums.begin(), b.sums.end(), std::back_inserter(a.sums));
            if (a.leaf_children)
                std::move(b.leaves.begin(), b.leaves.end(), std::back_inserter(a.leaves));
            else
                std::move(b.nodes.begin(), b.nodes.end(), std::back_inserter(a.nodes));
            nd->nodes.erase(nd->nodes.begin() + l + 1);
            nd->sums.erase(nd->sums.begin() + l + 1);
            nd->sums[l] = node_summary(a);
        } else if (a.degree() < b.degree()) {
            // borrow b's first child
            a.sums.push_back(std::move(b.sums.front()));
            b.sums.erase(b.sums.begin());
            if (a.leaf_children) {
                a.leaves.push_back(std::move(b.leaves.front()));
                b.leaves.erase(b.leaves.begin());
            } else {
                a.nodes.push_back(std::move(b.nodes.front()));
                b.nodes.erase(b.nodes.begin());
            }
            nd->sums[l] = node_summary(a);
            nd->sums[l + 1] = node_summary(b);
        } else {
            // borrow a's last child
            b.sums.insert(b.sums.begin(), std::move(a.sums.back()));
            a.sums.pop_back();
            if (a.leaf_children) {
                b.leaves.insert(b.leaves.begin(), std::move(a.leaves.back()));
                a.leaves.pop_back();
            } else {
                b.nodes.insert(b.nodes.begin(), std::move(a.nodes.back()));
                a.nodes.pop_back();
            }
            nd->sums[l] = node_summary(a);
            nd->sums[l + 1] = node_summary(b);
        }
    }

    void overwrite_rec(Node* nd, uint64_t i, std::span<const uint32_t> vals, int64_t* delta) {
        uint64_t cum = 0;
        uint64_t lo_target = i, hi_target = i + vals.size() - 1;
        for (uint32_t c = 0; c < nd->degree() && cum < hi_target; ++c) {
            uint64_t lo = cum + 1, hi = cum + nd->sums[c].len;
            cum = hi;
            if (hi < lo_target || lo > hi_target || lo > hi) continue;
            uint64_t from = std::max(lo_target, lo);
            uint64_t to = std::min(hi_target, hi);
            std::span<const uint32_t> sub = vals.subspan(from - lo_target, to - from + 1);
            if (nd->leaf_children) {
                Leaf& lf = *nd->leaves[c];
                uint32_t at = static_cast<uint32_t>(from - lo);
                uint64_t oldf[64] = {0}, newf[64] = {0};
                leaf_freq(lf, at, static_cast<uint32_t>(sub.size()), oldf);
                for (size_t t = 0; t < sub.size(); ++t)
                    leaf_set(lf, at + static_cast<uint32_t>(t), sub[t] - 1);
                leaf_freq(lf, at, static_cast<uint32_t>(sub.size()), newf);
                for (uint32_t v = 0; v < p_.sigma; ++v) {
                    int64_t d = static_cast<int64_t>(newf[v]) - static_cast<int64_t>(oldf[v]);
                    nd->sums[c].cnt[v] = static_cast<uint32_t>(nd->sums[c].cnt[v] + d);
                    delta[v] += d;
                }
            } else {
                std::vector<int64_t> sub_delta(p_.sigma, 0);
                overwrite_rec(nd->nodes[c].get(), from - lo + 1, sub, sub_delta.data());
                for (uint32_t v = 0; v < p_.sigma; ++v) {
                    nd->sums[c].cnt[v] = static_cast<uint32_t>(nd->sums[c].cnt[v] + sub_delta[v]);
                    delta[v] += sub_delta[v];
                }
            }
        }
    }

    void build_from(std::span<const uint32_t> symbols) {
        for (uint32_t s : symbols) check_sym(s);
        len_ = symbols.size();
        // fill leaves to ~3/2 W so both bounds have slack
        uint64_t target = std::max<uint64_t>(1, uint64_t(p_.max_leaf_syms) * 3 / 4);
        uint64_t nleaves = std::max<uint64_t>(1, (symbols.size() + target - 1) / target);
        if (nleaves > 1) {
            while (nleaves > 1 && symbols.size() / nleaves < p_.min_leaf_syms) --nleaves;
        }
        std::vector<std::unique_ptr<Leaf>> leaves;
        std::vector<Child> sums;
        uint64_t done = 0;
        for (uint64_t l = 0; l < nleaves; ++l) {
            uint64_t take = (symbols.size() - done) / (nleaves - l);
            auto lf = new_leaf();
            for (uint64_t t = 0; t < take; ++t)
                leaf_set(*lf, static_cast<uint32_t>(t), symbols[done + t] - 1);
            lf->size = static_cast<uint32_t>(take);
            done += take;
            sums.push_back(leaf_summary(*lf));
            leaves.push_back(std::move(lf));
        }
        for (size_t l = 0; l + 1 < leaves.size(); ++l) leaves[l]->next = leaves[l + 1].get();
        // group leaves, then nodes, kFan*3/4 at a time
        std::vector<std::unique_ptr<Node>> level;
        const uint32_t group = kFan * 3 / 4;
        for (size_t at = 0; at < leaves.size();) {
            size_t take = std::min<size_t>(group, leaves.size() - at);
            if (leaves.size() - at - take > 0 && leaves.size() - at - take < kMinFan)
                take = leaves.size() - at; // avoid a short trailing node
            if (take > kFan) take = (leaves.size() - at + 1) / 2;
            auto nd = std::make_unique<Node>();
            nd->leaf_children = true;
            for (size_t t = 0; t < take; ++t) {
                nd->leaves.push_back(std::move(leaves[at + t]));
                nd->sums.push_back(std::move(sums[at + t]));
            }
            at += take;
            level.push_back(std::move(nd));
        }
        while (level.size() > 1) {
            std::vector<std::unique_ptr<Node>> up;
            for (size_t at = 0; at < level.size();) {
                size_t take = std::min<size_t>(group, level.size() - at);
                if (level.size() - at - take > 0 && level.size() - at - take < kMinFan)
                    take = level.size() - at;
                if (take > kFan) take = (level.size() - at + 1) / 2;
                auto nd = std::make_unique<Node>();
                nd->leaf_children = false;
                for (size_t t = 0; t < take; ++t) {
                    nd->sums.push_back(node_summary(*level[at + t]));
                    nd->nodes.push_back(std::move(level[at + t]));
                }
                at += take;
                up.push_back(std::move(nd));
            }
            level = std::move(up);
        }
        root_ = std::move(level.front());
    }

    uint64_t validate_rec(const Node* nd, const Node* root) const {
        if (nd != root && (nd->degree() < kMinFan || nd->degree() > kFan))
            fail(ErrorKind::invariant, "routing node degree out of bounds");
        if (nd->degree() == 0) fail(ErrorKind::invariant, "empty routing node");
        uint64_t total = 0;
        bool lone_leaf = nd == root && nd->leaf_children && nd->degree() == 1;
        for (uint32_t c = 0; c < nd->degree(); ++c) {
            const Child& s = nd->sums[c];
            if (nd->leaf_children) {
                const Leaf& lf = *nd->leaves[c];
                if (lf.size != s.len) fail(ErrorKind::invariant, "leaf summary length wrong");
                if (!lone_leaf &&
                    (lf.size < p_.min_leaf_syms || lf.size > p_.max_leaf_syms))
                    fail(ErrorKind::invariant, "leaf occupancy out of bounds");
                Child fresh = leaf_summary(lf);
                if (fresh.cnt != s.cnt) fail(ErrorKind::invariant, "leaf summary counts wrong");
                uint64_t used = 0;
                for (uint32_t v = 0; v < p_.sigma; ++v) used += fresh.cnt[v];
                if (used != lf.size) fail(ErrorKind::invariant, "leaf holds foreign symbols");
            } else {
                const Node& ch = *nd->nodes[c];
                Child fresh = node_summary(ch);
                if (fresh.len != s.len || fresh.cnt != s.cnt)
                    fail(ErrorKind::invariant, "node summary stale");
                validate_rec(&ch, root);
            }
            total += s.len;
        }
        return total;
    }

    void collect_leaves(const Node* nd, std::vector<const Leaf*>& out) const {
        if (nd->leaf_children) {
            for (const auto& lf : nd->leaves) out.push_back(lf.get());
        } else {
            for (const auto& ch : nd->nodes) collect_leaves(ch.get(), out);
        }
    }

    void space_rec(const Node* nd, SpaceBreakdown& sp) const {
        sp.string_nodes += 64 + 64; // node header, child vector overhead
        sp.string_summaries += nd->degree() * (64 + uint64_t(p_.sigma) * 32);
        if (nd->leaf_children) {
            for (const auto& lf : nd->leaves) {
                uint64_t payload = uint64_t(lf->size) * p_.sym_width;
                uint64_t blocks = (payload + p_.block_bits - 1) / p_.block_bits;
                sp.string_payload += std::max<uint64_t>(blocks, 1) * p_.block_bits;
                sp.string_nodes += 128; // leaf header + chain pointer
            }
        } else {
            for (const auto& ch : nd->nodes) space_rec(ch.get(), sp);
        }
    }
};

} // namespace rsel
