#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rsel/point_set.hpp"

using namespace rsel;

TEST_CASE("relabeling the worked example") {
    std::vector<uint32_t> y_child = {1, 2, 3, 4, 1};
    std::vector<uint32_t> y_parent = {1, 3, 3, 2, 4, 1, 2, 3, 3, 4, 3, 1};
    auto out = split_relabel(y_parent, y_child, 3, 2, 4);
    CHECK(out == std::vector<uint32_t>{1, 3, 3, 2, 5, 1, 2, 4, 4, 5, 3, 1});
}

TEST_CASE("splitting the last child keeps earlier labels") {
    // i = f_p and every child label on the left side of the split
    std::vector<uint32_t> y_parent = {1, 3, 2, 3, 1, 3};
    std::vector<uint32_t> y_child = {1, 2, 1};
    auto out = split_relabel(y_parent, y_child, 3, 2, 3);
    CHECK(out == std::vector<uint32_t>{1, 3, 2, 3, 1, 3});
}

TEST_CASE("mismatched chunks are rejected") {
    std::vector<uint32_t> y_parent = {1, 2, 1};
    std::vector<uint32_t> y_child = {1};
    CHECK_THROWS_MATCHES(split_relabel(y_parent, y_child, 1, 1, 2), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::mismatch;
                         }));
    std::vector<uint32_t> too_long = {1, 1, 1};
    CHECK_THROWS_AS(split_relabel(y_parent, too_long, 2, 1, 2), Error);
}

TEST_CASE("relabeling agrees with per-point simulation") {
    std::mt19937_64 rng(61);
    for (int round = 0; round < 500; ++round) {
        uint32_t f_p = 2 + rng() % 6;
        uint32_t f_v = 2 + rng() % 6;
        uint32_t i = 1 + rng() % f_p;
        uint32_t d = 1 + rng() % (f_v - 1);
        size_t n = 1 + rng() % 60;
        // each point carries its parent label; points under child i also
        // carry their label within the splitting child
        std::vector<uint32_t> y_parent(n), y_child;
        std::vector<uint32_t> expected;
        for (size_t t = 0; t < n; ++t) {
            uint32_t c = 1 + rng() % f_p;
            y_parent[t] = c;
            if (c < i) {
                expected.push_back(c);
            } else if (c > i) {
                expected.push_back(c + 1);
            } else {
                uint32_t cc = 1 + rng() % f_v;
                y_child.push_back(cc);
                expected.push_back(cc <= d ? i : i + 1);
            }
        }
        CHECK(split_relabel(y_parent, y_child, i, d, f_p) == expected);
    }
}
