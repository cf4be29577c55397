#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "rsel/error.hpp"
#include "rsel/order_index.hpp"

namespace rsel {

// Brute-force references for differential testing. These share nothing with
// the real structures beyond the Point type and the error taxonomy, so their
// failure modes are independent.
class OraclePointSet {
public:
    uint64_t size() const { return pts_.size(); }

    Point insert(double x, double y) {
        if (std::isnan(x) || std::isnan(y))
            fail(ErrorKind::unordered, "coordinate admits no total order");
        Point p{x, y, next_id_++};
        pts_.push_back(p);
        return p;
    }

    void erase(double x, double y) {
        size_t best = pts_.size();
        for (size_t t = 0; t < pts_.size(); ++t)
            if (pts_[t].x == x && pts_[t].y == y &&
                (best == pts_.size() || pts_[t].id < pts_[best].id))
                best = t;
        if (best == pts_.size()) fail(ErrorKind::notfound, "no live point at these coordinates");
        pts_.erase(pts_.begin() + best);
    }

    Point select(double x1, double x2, uint64_t k) const {
        if (pts_.empty()) fail(ErrorKind::empty, "selection over an empty set");
        std::vector<Point> in;
        for (const Point& p : pts_)
            if (p.x >= x1 && p.x <= x2) in.push_back(p);
        if (in.empty()) fail(ErrorKind::rank, "no points in range", 0);
        if (k < 1 || k > in.size())
            fail(ErrorKind::rank, "rank outside range population", in.size());
        std::sort(in.begin(), in.end(), y_less);
        return in[k - 1];
    }

    uint64_t count(double x1, double x2, double y1, double y2) const {
        if (!(x1 <= x2) || !(y1 <= y2)) return 0;
        uint64_t c = 0;
        for (const Point& p : pts_)
            c += p.x >= x1 && p.x <= x2 && p.y >= y1 && p.y <= y2;
        return c;
    }

private:
    std::vector<Point> pts_;
    uint64_t next_id_ = 0;
};

class OracleArray {
public:
    uint64_t size() const { return v_.size(); }
    uint64_t sigma() const { return sigma_; }

    explicit OracleArray(uint64_t sigma) : sigma_(sigma) {
        if (sigma < 1) fail(ErrorKind::range, "universe must not be empty");
    }

    void insert(uint64_t i, uint64_t val) {
        if (val < 1 || val > sigma_) fail(ErrorKind::range, "value outside universe");
        if (i < 1 || i > v_.size() + 1) fail(ErrorKind::range, "position out of range");
        v_.insert(v_.begin() + (i - 1), val);
    }

    uint64_t erase(uint64_t i) {
        if (i < 1 || i > v_.size()) fail(ErrorKind::range, "position out of range");
        uint64_t val = v_[i - 1];
        v_.erase(v_.begin() + (i - 1));
        return val;
    }

    uint64_t access(uint64_t i) const {
        if (i < 1 || i > v_.size()) fail(ErrorKind::range, "position out of range");
        return v_[i - 1];
    }

    uint64_t select(uint64_t i, uint64_t j, uint64_t k) const {
        if (v_.empty()) fail(ErrorKind::empty, "selection over an empty array");
        if (i < 1 || j > v_.size() || i > j) fail(ErrorKind::range, "positions out of range");
        if (k < 1 || k > j - i + 1)
            fail(ErrorKind::rank, "rank outside range population", j - i + 1);
        std::vector<uint64_t> slice(v_.begin() + (i - 1), v_.begin() + j);
        std::sort(slice.begin(), slice.end());
        return slice[k - 1];
    }

    uint64_t range_count(uint64_t i, uint64_t j, uint64_t v1, uint64_t v2) const {
        if (v_.empty() || i > j || v1 > v2) return 0;
        i = std::max<uint64_t>(i, 1);
        j = std::min<uint64_t>(j, v_.size());
        if (i > j) return 0;
        uint64_t c = 0;
        for (uint64_t t = i; t <= j; ++t) c += v_[t - 1] >= v1 && v_[t - 1] <= v2;
        return c;
    }

private:
    uint64_t sigma_;
    std::vector<uint64_t> v_;
};

} // namespace rsel
