#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rsel/error.hpp"
#include "rsel/stats.hpp"

namespace rsel {

// A planar point. Coordinates are opaque ordered values; id is the insertion
// sequence number and breaks ties between exact duplicates.
struct Point {
    double x = 0;
    double y = 0;
    uint64_t id = 0;
};

inline bool x_less(const Point& a, const Point& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.id < b.id;
}

inline bool y_less(const Point& a, const Point& b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.id < b.id;
}

// AVL tree over live points in (x, y, id) order with subtree counts; answers
// the x-rank queries that anchor every selection, and removes deleted points
// immediately.
class OrderIndex {
public:
    uint64_t size() const { return count(root_.get()); }

    void insert(const Point& p) { root_ = insert_rec(std::move(root_), p); }

    void erase(const Point& p) {
        bool found = false;
        root_ = erase_rec(std::move(root_), p, found);
        if (!found) fail(ErrorKind::notfound, "point not in index");
    }

    // live points with x strictly below (or at) the given coordinate
    uint64_t count_x_below(double x, bool inclusive) const {
        uint64_t acc = 0;
        const Node* n = root_.get();
        while (n) {
            bool go_right = inclusive ? n->p.x <= x : n->p.x < x;
            if (go_right) {
                acc += count(n->l.get()) + 1;
                n = n->r.get();
            } else {
                n = n->l.get();
            }
        }
        return acc;
    }

    // 1-based rank of a live point in (x, y, id) order
    uint64_t rank_of(const Point& p) const {
        uint64_t acc = 0;
        const Node* n = root_.get();
        while (n) {
            if (x_less(n->p, p)) {
                acc += count(n->l.get()) + 1;
                n = n->r.get();
            } else {
                n = n->l.get();
            }
        }
        return acc + 1;
    }

    // the live point at exactly (x, y) with the smallest id, if any
    std::optional<Point> find_min_id(double x, double y) const {
        const Node* n = root_.get();
        const Node* best = nullptr;
        Point probe{x, y, 0};
        while (n) {
            if (x_less(n->p, probe)) {
                n = n->r.get();
            } else {
                best = n;
                n = n->l.get();
            }
        }
        if (best && best->p.x == x && best->p.y == y) return best->p;
        return std::nullopt;
    }

    void clear() { root_.reset(); }

    void build_from_x_sorted(std::span<const Point> pts) {
        root_ = build_rec(pts);
    }

    void validate() const {
        if (root_) validate_rec(root_.get(), nullptr, nullptr);
    }

    void add_space(SpaceBreakdown& sp) const {
        sp.order_index += count(root_.get()) * (192 + 64 + 64 + 128);
    }

private:
    struct Node {
        Point p;
        std::unique_ptr<Node> l, r;
        uint32_t h = 1;
        uint64_t n = 1;
    };

    std::unique_ptr<Node> root_;

    static uint64_t count(const Node* n) { return n ? n->n : 0; }
    static uint32_t height(const Node* n) { return n ? n->h : 0; }

    static void pull(Node* n) {
        n->h = 1 + std::max(height(n->l.get()), height(n->r.get()));
        n->n = 1 + count(n->l.get()) + count(n->r.get());
    }

    static std::unique_ptr<Node> rot_left(std::unique_ptr<Node> n) {
        auto r = std::move(n->r);
        n->r = std::move(r->l);
        pull(n.get());
        r->l = std::move(n);
        pull(r.get());
        return r;
    }

    static std::unique_ptr<Node> rot_right(std::unique_ptr<Node> n) {
        auto l = std::move(n->l);
        n->l = std::move(l->r);
        pull(n.get());
        l->r = std::move(n);
        pull(l.get());
        return l;
    }

    static std::unique_ptr<Node> balance(std::unique_ptr<Node> n) {
        pull(n.get());
        int d = static_cast<int>(height(n->l.get())) - static_cast<int>(height(n->r.get()));
        if (d > 1) {
            if (height(n->l->l.get()) < height(n->l->r.get())) n->l = rot_left(std::move(n->l));
            return rot_right(std::move(n));
        }
        if (d < -1) {
            if (height(n->r->r.get()) < height(n->r->l.get())) n->r = rot_right(std::move(n->r));
            return rot_left(std::move(n));
        }
        return n;
    }

    static std::unique_ptr<Node> insert_rec(std::unique_ptr<Node> n, const Point& p) {
        if (!n) {
            auto fresh = std::make_unique<Node>();
            fresh->p = p;
            return fresh;
        }
        if (x_less(p, n->p)) n->l = insert_rec(std::move(n->l), p);
        else n->r = insert_rec(std::move(n->r), p);
        return balance(std::move(n));
    }

    static std::unique_ptr<Node> pop_min(std::unique_ptr<Node> n, Point& out) {
        if (!n->l) {
            out = n->p;
            return std::move(n->r);
        }
        n->l = pop_min(std::move(n->l), out);
        return balance(std::move(n));
    }

    static std::unique_ptr<Node> erase_rec(std::unique_ptr<Node> n, const Point& p, bool& found) {
        if (!n) return nullptr;
        if (!x_less(p, n->p) && !x_less(n->p, p)) {
            found = true;
            if (!n->l) return std::move(n->r);
            if (!n->r) return std::move(n->l);
            Point succ;
            n->r = pop_min(std::move(n->r), succ);
            n->p = succ;
            return balance(std::move(n));
        }
        if (x_less(p, n->p)) n->l = erase_rec(std::move(n->l), p, found);
        else n->r = erase_rec(std::move(n->r), p, found);
        return balance(std::move(n));
    }

    static std::unique_ptr<Node> build_rec(std::span<const Point> pts) {
        if (pts.empty()) return nullptr;
        size_t mid = pts.size() / 2;
        auto n = std::make_unique<Node>();
        n->p = pts[mid];
        n->l = build_rec(pts.first(mid));
        n->r = build_rec(pts.subspan(mid + 1));
        pull(n.get());
        return n;
    }

    static void validate_rec(const Node* n, const Point* lo, const Point* hi) {
        if (lo && !x_less(*lo, n->p)) fail(ErrorKind::invariant, "index order broken");
        if (hi && !x_less(n->p, *hi)) fail(ErrorKind::invariant, "index order broken");
        if (n->n != 1 + count(n->l.get()) + count(n->r.get()))
            fail(ErrorKind::invariant, "index subtree count stale");
        int d = static_cast<int>(height(n->l.get())) - static_cast<int>(height(n->r.get()));
        if (d < -1 || d > 1) fail(ErrorKind::invariant, "index out of balance");
        if (n->l) validate_rec(n->l.get(), lo, &n->p);
        if (n->r) validate_rec(n->r.get(), &n->p, hi);
    }
};

} // namespace rsel
