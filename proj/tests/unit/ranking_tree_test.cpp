#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "rsel/dyn_string.hpp"
#include "rsel/ranking_tree.hpp"

using namespace rsel;

namespace {

const std::vector<uint32_t> kParentChunk = {1, 3, 3, 2, 4, 1, 2, 3, 3, 4, 3, 1};

struct Fixture {
    DynString ds;
    RankingTree rt;

    Fixture(const std::vector<uint32_t>& syms, uint32_t labels, uint32_t branch = 4,
            uint32_t leaf = 4, uint32_t count_bits = 0)
        : ds(StringParams::derive(std::max<uint32_t>(labels, 2), 4096), syms),
          rt(RankingTree::build(
              RankingTree::Config::make(
                  branch, leaf, labels,
                  count_bits ? count_bits
                             : std::max<uint32_t>(8, ceil_log2(syms.size() + 2) + 2),
                  2),
              ds, RegionHandle{0, syms.size()})) {}

    void insert(uint64_t r, uint32_t label) {
        ds.insert(label, r);
        rt.insert(ds, 0, r, label);
    }

    void erase(uint64_t r) {
        uint32_t label = ds.access(r);
        ds.erase(r);
        rt.erase(ds, 0, r, label);
    }

    std::vector<uint64_t> scan_counts(uint64_t r1, uint64_t r2, uint32_t labels) const {
        std::vector<uint64_t> q(labels, 0);
        for (uint64_t r = r1; r <= r2; ++r) q[ds.access(r) - 1]++;
        return q;
    }
};

std::vector<uint32_t> random_labels(std::mt19937_64& rng, size_t n, uint32_t labels) {
    std::vector<uint32_t> v(n);
    for (auto& x : v) x = 1 + rng() % labels;
    return v;
}

} // namespace

TEST_CASE("build over small regions") {
    DynString empty_ds(4, 16);
    RankingTree t = RankingTree::build(RankingTree::Config::make(4, 4, 4, 16, 2), empty_ds,
                                       RegionHandle{0, 0});
    CHECK(t.empty());
    CHECK(t.weight() == 0);

    Fixture f(kParentChunk, 4);
    CHECK(f.rt.weight() == 12);
    auto cs = f.rt.canonical(1, 12);
    auto res = f.rt.branch_slow(f.ds, 0, cs, 1);
    // per-label counts of the worked example, cumulative (3,5,10,12)
    CHECK(res.label_counts == std::vector<uint64_t>{3, 2, 5, 2});
    f.rt.validate(f.ds, 0);
}

TEST_CASE("build validates on random regions") {
    std::mt19937_64 rng(51);
    for (size_t n : {1, 7, 40, 331, 5000, 100000}) {
        auto syms = random_labels(rng, n, 4);
        Fixture f(syms, 4, 4, 16);
        f.rt.validate(f.ds, 0);
        auto cs = f.rt.canonical(1, n);
        auto res = f.rt.branch_slow(f.ds, 0, cs, 1);
        CHECK(res.label_counts == f.scan_counts(1, n, 4));
    }
}

TEST_CASE("canonical sets cover exactly the requested interval") {
    std::mt19937_64 rng(52);
    auto syms = random_labels(rng, 2000, 4);
    Fixture f(syms, 4, 4, 8);

    auto check_cover = [&](uint64_t r1, uint64_t r2) {
        auto cs = f.rt.canonical(r1, r2);
        std::vector<std::pair<uint64_t, uint64_t>> iv;
        for (const auto& p : cs.nodes) iv.push_back({p.start + 1, p.start + p.count});
        for (const auto& l : cs.leaves) iv.push_back({l.start + l.z_lo, l.start + l.z_hi});
        std::sort(iv.begin(), iv.end());
        REQUIRE(!iv.empty());
        CHECK(iv.front().first == r1);
        CHECK(iv.back().second == r2);
        for (size_t t = 0; t + 1 < iv.size(); ++t) CHECK(iv[t].second + 1 == iv[t + 1].first);
        CHECK(cs.leaves.size() <= 2);
    };

    check_cover(1, 2000);
    check_cover(500, 500);
    for (int round = 0; round < 500; ++round) {
        uint64_t r1 = 1 + rng() % 2000;
        uint64_t r2 = r1 + rng() % (2000 - r1 + 1);
        check_cover(r1, r2);
    }
    // the full range is one all-columns piece at the root
    auto full = f.rt.canonical(1, 2000);
    CHECK(full.nodes.size() == 1);
    CHECK(full.leaves.empty());
    CHECK(full.nodes[0].q_lo == 1);
}

TEST_CASE("leaf rank arrays match a counting scan") {
    std::mt19937_64 rng(53);
    auto syms = random_labels(rng, 800, 3);
    Fixture f(syms, 3);
    // small worked example on a fresh fixture
    Fixture tiny(std::vector<uint32_t>{1, 3, 3, 2}, 3, 4, 8);
    auto c = tiny.rt.leaf_rank_array(tiny.ds, 0, 0, 4, 3);
    CHECK(c == std::vector<uint64_t>{1, 0, 2});

    // conservation: summed over all leaves the totals equal the region's
    uint64_t covered = 0;
    std::vector<uint64_t> totals(3, 0);
    while (covered < f.rt.weight()) {
        auto [start, len] = f.rt.leaf_bounds(covered + 1);
        CHECK(start == covered);
        auto arr = f.rt.leaf_rank_array(f.ds, 0, start, len, len);
        for (int v = 0; v < 3; ++v) totals[v] += arr[v];
        // random interior offset against a direct scan
        uint64_t z = 1 + rng() % len;
        auto part = f.rt.leaf_rank_array(f.ds, 0, start, len, z);
        CHECK(part == f.scan_counts(start + 1, start + z, 3));
        covered += len;
    }
    CHECK(totals == f.scan_counts(1, f.rt.weight(), 3));
}

TEST_CASE("slow branching on the worked example") {
    Fixture f(kParentChunk, 4);
    auto cs = f.rt.canonical(1, 12);
    auto res = f.rt.branch_slow(f.ds, 0, cs, 6);
    CHECK(res.label_counts == std::vector<uint64_t>{3, 2, 5, 2});
    CHECK(res.tau == 3);
    CHECK(res.k_rem == 1);

    // single-label region: tau is always 1 and k passes through
    Fixture ones(std::vector<uint32_t>(20, 1), 1, 4, 4);
    auto cs1 = ones.rt.canonical(3, 17);
    auto r1 = ones.rt.branch_slow(ones.ds, 0, cs1, 9);
    CHECK(r1.tau == 1);
    CHECK(r1.k_rem == 9);
}

TEST_CASE("slow branching matches a label scan") {
    std::mt19937_64 rng(54);
    auto syms = random_labels(rng, 3000, 5);
    Fixture f(syms, 5, 4, 8);
    for (int round = 0; round < 2000; ++round) {
        uint64_t r1 = 1 + rng() % 3000;
        uint64_t r2 = r1 + rng() % (3000 - r1 + 1);
        auto cs = f.rt.canonical(r1, r2);
        uint64_t k = 1 + rng() % (r2 - r1 + 1);
        auto res = f.rt.branch_slow(f.ds, 0, cs, k);
        auto q = f.scan_counts(r1, r2, 5);
        CHECK(res.label_counts == q);
        uint64_t pre = 0;
        uint32_t tau = 1;
        while (pre + q[tau - 1] < k) pre += q[tau - 1], ++tau;
        CHECK(res.tau == tau);
        CHECK(res.k_rem == k - pre);
        CHECK_THROWS_AS(f.rt.branch_slow(f.ds, 0, cs, r2 - r1 + 2), Error);
    }
}

TEST_CASE("fast branching equals slow branching") {
    std::mt19937_64 rng(55);
    SECTION("random labels") {
        auto syms = random_labels(rng, 4000, 6);
        Fixture f(syms, 6, 4, 8);
        Stats stats;
        for (int round = 0; round < 3000; ++round) {
            uint64_t r1 = 1 + rng() % 4000;
            uint64_t r2 = r1 + rng() % (4000 - r1 + 1);
            uint64_t k = 1 + rng() % (r2 - r1 + 1);
            auto cs = f.rt.canonical(r1, r2);
            auto slow = f.rt.branch_slow(f.ds, 0, cs, k);
            uint32_t state = 1;
            auto fast = f.rt.branch_fast(f.ds, 0, cs, k, state, &stats);
            CHECK(fast.tau == slow.tau);
            CHECK(fast.k_rem == slow.k_rem);
        }
        CHECK(stats.good_cases + stats.bad_cases + stats.slow_fallbacks == 3000);
    }
    SECTION("adversarial equal counts") {
        // labels cycle so every aligned window has near-identical counts
        std::vector<uint32_t> syms(4096);
        for (size_t i = 0; i < syms.size(); ++i) syms[i] = 1 + i % 8;
        Fixture f(syms, 8, 4, 8);
        Stats stats;
        for (int round = 0; round < 3000; ++round) {
            uint64_t r1 = 1 + rng() % 4096;
            uint64_t r2 = r1 + rng() % (4096 - r1 + 1);
            uint64_t k = 1 + rng() % (r2 - r1 + 1);
            auto cs = f.rt.canonical(r1, r2);
            auto slow = f.rt.branch_slow(f.ds, 0, cs, k);
            uint32_t state = 1;
            uint64_t bad_before = stats.bad_cases;
            auto fast = f.rt.branch_fast(f.ds, 0, cs, k, state, &stats);
            CHECK(fast.tau == slow.tau);
            CHECK(fast.k_rem == slow.k_rem);
            // one branch decision costs at most one bad case
            CHECK(stats.bad_cases - bad_before <= 1);
        }
    }
    SECTION("widely separated counts stay in the good case") {
        std::vector<uint32_t> syms;
        for (uint32_t label = 1; label <= 4; ++label)
            syms.insert(syms.end(), 1u << (2 * label + 4), label);
        std::shuffle(syms.begin(), syms.end(), rng);
        Fixture f(syms, 4, 4, 64);
        Stats stats;
        auto cs = f.rt.canonical(1, syms.size());
        for (uint64_t k :
             {uint64_t(1), uint64_t(100), uint64_t(5000), uint64_t(syms.size())}) {
            uint32_t state = 1;
            auto fast = f.rt.branch_fast(f.ds, 0, cs, k, state, &stats);
            auto slow = f.rt.branch_slow(f.ds, 0, cs, k);
            CHECK(fast.tau == slow.tau);
            CHECK(fast.tag == BranchResult::Case::good);
        }
        CHECK(stats.bad_cases == 0);
    }
}

TEST_CASE("section cursor exhausts into the exact path") {
    std::mt19937_64 rng(56);
    auto syms = random_labels(rng, 1000, 4);
    Fixture f(syms, 4);
    auto cs = f.rt.canonical(1, 1000);
    uint32_t state = f.rt.sections() + 1;
    Stats stats;
    auto fast = f.rt.branch_fast(f.ds, 0, cs, 500, state, &stats);
    auto slow = f.rt.branch_slow(f.ds, 0, cs, 500);
    CHECK(fast.tau == slow.tau);
    CHECK(fast.tag == BranchResult::Case::exhausted);
    CHECK(stats.slow_fallbacks == 1);
}

TEST_CASE("inserts and deletes keep branch decisions exact") {
    std::mt19937_64 rng(57);
    Fixture f(std::vector<uint32_t>{}, 4, 4, 4, 16);
    std::vector<uint32_t> shadow;
    for (int round = 0; round < 3000; ++round) {
        bool ins = shadow.empty() || rng() % 3 != 0;
        if (ins) {
            uint64_t r = 1 + rng() % (shadow.size() + 1);
            uint32_t label = 1 + rng() % 4;
            f.insert(r, label);
            shadow.insert(shadow.begin() + (r - 1), label);
        } else {
            uint64_t r = 1 + rng() % shadow.size();
            f.erase(r);
            shadow.erase(shadow.begin() + (r - 1));
        }
        CHECK(f.rt.weight() == shadow.size());
        if (!shadow.empty() && round % 7 == 0) {
            uint64_t r1 = 1 + rng() % shadow.size();
            uint64_t r2 = r1 + rng() % (shadow.size() - r1 + 1);
            uint64_t k = 1 + rng() % (r2 - r1 + 1);
            auto cs = f.rt.canonical(r1, r2);
            auto slow = f.rt.branch_slow(f.ds, 0, cs, k);
            std::vector<uint64_t> q(4, 0);
            for (uint64_t r = r1; r <= r2; ++r) q[shadow[r - 1] - 1]++;
            CHECK(slow.label_counts == q);
            uint32_t state = 1;
            auto fast = f.rt.branch_fast(f.ds, 0, cs, k, state, nullptr);
            CHECK(fast.tau == slow.tau);
            CHECK(fast.k_rem == slow.k_rem);
        }
        if (round % 251 == 0) f.rt.validate(f.ds, 0);
    }
    f.rt.validate(f.ds, 0);
}

TEST_CASE("insert then delete restores branch results") {
    std::mt19937_64 rng(58);
    auto syms = random_labels(rng, 600, 4);
    Fixture f(syms, 4, 4, 4);
    auto cs_before = f.rt.canonical(100, 500);
    auto before = f.rt.branch_slow(f.ds, 0, cs_before, 77);
    f.insert(250, 2);
    f.erase(250);
    auto cs_after = f.rt.canonical(100, 500);
    auto after = f.rt.branch_slow(f.ds, 0, cs_after, 77);
    CHECK(before.tau == after.tau);
    CHECK(before.k_rem == after.k_rem);
    CHECK(before.label_counts == after.label_counts);
}

TEST_CASE("ascending inserts force splits and keep balance") {
    Fixture f(std::vector<uint32_t>{}, 4, 4, 4, 16);
    for (uint64_t i = 1; i <= 3000; ++i) {
        f.insert(i, 1 + i % 4);
        if (i % 500 == 0) f.rt.validate(f.ds, 0);
    }
    CHECK(f.rt.height() >= 3);
    f.rt.validate(f.ds, 0);
    // drain from the front, exercising merges
    for (uint64_t i = 3000; i >= 1; --i) {
        f.erase(1);
        if (i % 500 == 0) f.rt.validate(f.ds, 0);
    }
    CHECK(f.rt.empty());
}

TEST_CASE("label counts over canonical intervals") {
    std::mt19937_64 rng(59);
    auto syms = random_labels(rng, 2000, 6);
    Fixture f(syms, 6, 4, 8);
    for (int round = 0; round < 500; ++round) {
        uint64_t r1 = 1 + rng() % 2000;
        uint64_t r2 = r1 + rng() % (2000 - r1 + 1);
        uint32_t a = 1 + rng() % 6;
        uint32_t b = a + rng() % (6 - a + 1);
        auto cs = f.rt.canonical(r1, r2);
        uint64_t got = f.rt.count_labels(f.ds, 0, cs, a, b);
        uint64_t expect = 0;
        auto q = f.scan_counts(r1, r2, 6);
        for (uint32_t j = a; j <= b; ++j) expect += q[j - 1];
        CHECK(got == expect);
    }
}
