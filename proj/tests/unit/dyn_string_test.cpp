#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rsel/dyn_string.hpp"

using namespace rsel;

namespace {

const std::vector<uint32_t> kParentChunk = {1, 3, 3, 2, 4, 1, 2, 3, 3, 4, 3, 1};

DynString from(const std::vector<uint32_t>& syms, uint32_t sigma, uint64_t hint = 1024) {
    return DynString(StringParams::derive(sigma, hint), syms);
}

// positional-shift reference
struct ShiftArray {
    std::vector<uint32_t> v;
    void insert(uint32_t sym, size_t i) { v.insert(v.begin() + (i - 1), sym); }
    void erase(size_t i) { v.erase(v.begin() + (i - 1)); }
    uint64_t rank(uint32_t sym, size_t i) const {
        uint64_t c = 0;
        for (size_t j = 0; j < i; ++j) c += v[j] == sym;
        return c;
    }
    uint64_t range_count(size_t x1, size_t x2, uint32_t y1, uint32_t y2) const {
        uint64_t c = 0;
        for (size_t j = x1; j <= x2; ++j) c += v[j - 1] >= y1 && v[j - 1] <= y2;
        return c;
    }
};

} // namespace

TEST_CASE("access on known strings") {
    DynString s = from(kParentChunk, 5);
    CHECK(s.access(2) == 3);
    CHECK(s.access(1) == 1);
    CHECK(s.access(12) == 1);
    DynString one = from({7}, 8);
    CHECK(one.access(1) == 7);
    CHECK_THROWS_AS(one.access(2), Error);
    std::mt19937_64 rng(31);
    std::vector<uint32_t> v(2000);
    for (auto& x : v) x = 1 + rng() % 9;
    DynString big = from(v, 9);
    for (int round = 0; round < 500; ++round) {
        size_t i = 1 + rng() % v.size();
        CHECK(big.access(i) == v[i - 1]);
    }
}

TEST_CASE("rank prefix counts") {
    DynString s = from(kParentChunk, 5);
    CHECK(s.rank(3, 5) == 2);
    CHECK(s.rank(3, 0) == 0);
    CHECK(s.rank(1, 12) == 3);
    std::mt19937_64 rng(32);
    std::vector<uint32_t> v(3000);
    for (auto& x : v) x = 1 + rng() % 6;
    DynString big = from(v, 6);
    ShiftArray oracle{v};
    for (int round = 0; round < 10000; ++round) {
        uint32_t sym = 1 + rng() % 6;
        size_t i = rng() % (v.size() + 1);
        CHECK(big.rank(sym, i) == oracle.rank(sym, i));
    }
}

TEST_CASE("rank changes exactly at matching positions") {
    std::mt19937_64 rng(33);
    std::vector<uint32_t> v(800);
    for (auto& x : v) x = 1 + rng() % 4;
    DynString s = from(v, 4);
    for (size_t i = 1; i <= v.size(); ++i) {
        for (uint32_t sym = 1; sym <= 4; ++sym) {
            uint64_t step = s.rank(sym, i) - s.rank(sym, i - 1);
            CHECK(step == (s.access(i) == sym ? 1 : 0));
        }
    }
    uint64_t sum = 0;
    for (uint32_t sym = 1; sym <= 4; ++sym) sum += s.rank(sym, v.size());
    CHECK(sum == v.size());
}

TEST_CASE("range counting") {
    DynString s = from(kParentChunk, 5);
    CHECK(s.range_count(1, 5, 3, 4) == 3);
    CHECK(s.range_count(1, 12, 1, 5) == 12);
    CHECK(s.range_count(4, 3, 1, 5) == 0); // empty position range
    std::mt19937_64 rng(34);
    std::vector<uint32_t> v(2500);
    for (auto& x : v) x = 1 + rng() % 8;
    DynString big = from(v, 8);
    ShiftArray oracle{v};
    for (int round = 0; round < 3000; ++round) {
        size_t x1 = 1 + rng() % v.size();
        size_t x2 = x1 + rng() % (v.size() - x1 + 1);
        uint32_t y1 = 1 + rng() % 8;
        uint32_t y2 = y1 + rng() % (8 - y1 + 1);
        CHECK(big.range_count(x1, x2, y1, y2) == oracle.range_count(x1, x2, y1, y2));
        // consistency with per-symbol ranks
        uint64_t via_rank = 0;
        for (uint32_t a = y1; a <= y2; ++a)
            via_rank += big.rank(a, x2) - big.rank(a, x1 - 1);
        CHECK(big.range_count(x1, x2, y1, y2) == via_rank);
    }
}

TEST_CASE("insert and delete") {
    DynString s(4, 0);
    CHECK(s.length() == 0);
    s.insert(3, 1);
    CHECK(s.length() == 1);
    CHECK(s.access(1) == 3);
    s.erase(1);
    CHECK(s.length() == 0);
    CHECK_THROWS_AS(s.erase(1), Error);
    CHECK_THROWS_AS(s.insert(5, 1), Error); // alphabet
    CHECK_THROWS_AS(s.insert(1, 3), Error); // position
}

TEST_CASE("random edits match the shift array") {
    std::mt19937_64 rng(35);
    DynString s(6, 256);
    ShiftArray oracle;
    for (int round = 0; round < 10000; ++round) {
        bool ins = oracle.v.empty() || rng() % 3 != 0;
        if (ins) {
            uint32_t sym = 1 + rng() % 6;
            size_t i = 1 + rng() % (oracle.v.size() + 1);
            s.insert(sym, i);
            oracle.insert(sym, i);
        } else {
            size_t i = 1 + rng() % oracle.v.size();
            s.erase(i);
            oracle.erase(i);
        }
        if (round % 512 == 0) s.validate();
        if (!oracle.v.empty()) {
            size_t i = 1 + rng() % oracle.v.size();
            CHECK(s.access(i) == oracle.v[i - 1]);
            uint32_t sym = 1 + rng() % 6;
            CHECK(s.rank(sym, i) == oracle.rank(sym, i));
        }
        CHECK(s.length() == oracle.v.size());
    }
    s.validate();
}

TEST_CASE("batched overwrite") {
    DynString s = from(kParentChunk, 5);
    std::vector<uint32_t> same = kParentChunk;
    s.batch_overwrite(1, same);
    CHECK(s.substring(1, 12) == kParentChunk);

    std::vector<uint32_t> relabeled = {1, 3, 3, 2, 5, 1, 2, 4, 4, 5, 3, 1};
    s.batch_overwrite(1, relabeled);
    for (size_t i = 1; i <= relabeled.size(); ++i) CHECK(s.access(i) == relabeled[i - 1]);
    CHECK(s.length() == 12);
    s.validate();
}

TEST_CASE("batched overwrite equals sequential edits") {
    std::mt19937_64 rng(36);
    std::vector<uint32_t> base(4000);
    for (auto& x : base) x = 1 + rng() % 4;
    for (int round = 0; round < 50; ++round) {
        DynString a = from(base, 4, 4096);
        DynString b = from(base, 4, 4096);
        size_t at = 1 + rng() % base.size();
        size_t len = 1 + rng() % (base.size() - at + 1);
        std::vector<uint32_t> vals(len);
        for (auto& x : vals) x = 1 + rng() % 4;
        a.batch_overwrite(at, vals);
        for (size_t j = 0; j < len; ++j) {
            b.erase(at + j);
            b.insert(vals[j], at + j);
        }
        CHECK(a.substring(1, a.length()) == b.substring(1, b.length()));
        a.validate();
        b.validate();
    }
}

TEST_CASE("substring extraction") {
    DynString s = from(kParentChunk, 5);
    CHECK(s.substring(1, 12) == kParentChunk);
    CHECK(s.substring(7, 6).empty());
    std::mt19937_64 rng(37);
    std::vector<uint32_t> v(1500);
    for (auto& x : v) x = 1 + rng() % 5;
    DynString big = from(v, 5);
    for (int round = 0; round < 200; ++round) {
        size_t i = 1 + rng() % v.size();
        size_t j = i - 1 + rng() % (v.size() - i + 2);
        std::vector<uint32_t> expect(v.begin() + (i - 1), v.begin() + j);
        CHECK(big.substring(i, j) == expect);
    }
}

TEST_CASE("leaf location is consistent with cumulative lengths") {
    std::mt19937_64 rng(38);
    std::vector<uint32_t> v(100000);
    for (auto& x : v) x = 1 + rng() % 16;
    DynString s = from(v, 16, v.size());
    CHECK(s.locate_leaf(1).offset == 1);
    auto last = s.locate_leaf(s.length());
    CHECK(last.offset == last.leaf_size);
    const DynString::Leaf* cur = nullptr;
    uint64_t base = 0;
    for (uint64_t r = 1; r <= s.length(); ++r) {
        auto loc = s.locate_leaf(r);
        if (loc.leaf != cur) {
            if (cur) CHECK(loc.offset == 1);
            base = r - 1;
            cur = loc.leaf;
        }
        CHECK(loc.offset == r - base);
    }
}

TEST_CASE("widest and narrowest alphabets") {
    // sigma 64 exercises 6-bit symbols, sigma 1 the degenerate 1-bit case
    std::mt19937_64 rng(40);
    DynString wide(64, 4096);
    ShiftArray oracle;
    for (int round = 0; round < 3000; ++round) {
        if (oracle.v.empty() || rng() % 3 != 0) {
            uint32_t sym = 1 + rng() % 64;
            size_t i = 1 + rng() % (oracle.v.size() + 1);
            wide.insert(sym, i);
            oracle.insert(sym, i);
        } else {
            size_t i = 1 + rng() % oracle.v.size();
            wide.erase(i);
            oracle.erase(i);
        }
        if (!oracle.v.empty()) {
            size_t i = 1 + rng() % oracle.v.size();
            CHECK(wide.access(i) == oracle.v[i - 1]);
            uint32_t sym = 1 + rng() % 64;
            CHECK(wide.rank(sym, i) == oracle.rank(sym, i));
        }
    }
    wide.validate();
    CHECK_THROWS_AS(DynString(65, 16), Error);

    DynString unary(1, 16);
    for (int t = 0; t < 700; ++t) unary.insert(1, 1);
    CHECK(unary.rank(1, 700) == 700);
    CHECK(unary.range_count(10, 20, 1, 1) == 11);
    unary.validate();
}

TEST_CASE("frequency scan matches per-symbol ranks") {
    std::mt19937_64 rng(39);
    std::vector<uint32_t> v(5000);
    for (auto& x : v) x = 1 + rng() % 11;
    DynString s = from(v, 11, v.size());
    for (int round = 0; round < 300; ++round) {
        size_t pos = 1 + rng() % v.size();
        size_t len = 1 + rng() % (v.size() - pos + 1);
        std::vector<uint64_t> freq(11, 0);
        s.freq_range(pos, len, freq.data());
        for (uint32_t sym = 1; sym <= 11; ++sym)
            CHECK(freq[sym - 1] == s.rank(sym, pos + len - 1) - s.rank(sym, pos - 1));
    }
}
