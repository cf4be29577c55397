#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rsel/matrix_structure.hpp"

using namespace rsel;

namespace {

// raw[q][p-1] = points under ranking child q+1 with label p
MatrixStructure build(uint32_t f1, std::vector<std::vector<uint64_t>> raw,
                      uint32_t count_bits = 16, uint32_t overlap = 2) {
    SectionLayout lay = SectionLayout::make(f1, count_bits, overlap);
    return MatrixStructure(lay, raw);
}

// brute-force cumulative count
uint64_t brute(const std::vector<std::vector<uint64_t>>& raw, uint32_t p, uint32_t q) {
    uint64_t c = 0;
    for (uint32_t qq = 1; qq <= q; ++qq)
        for (uint32_t pp = 1; pp <= p; ++pp) c += raw[qq - 1][pp - 1];
    return c;
}

std::vector<std::vector<uint64_t>> random_raw(std::mt19937_64& rng, uint32_t f1, uint32_t f2,
                                              uint64_t maxv) {
    std::vector<std::vector<uint64_t>> raw(f2, std::vector<uint64_t>(f1));
    for (auto& col : raw)
        for (auto& v : col) v = rng() % maxv;
    return raw;
}

} // namespace

TEST_CASE("cumulative table from child labels") {
    // child 1 holds one point of label 1, child 2 one point of label 2
    MatrixStructure m = build(2, {{1, 0}, {0, 1}});
    CHECK(m.entry(1, 1) == 1);
    CHECK(m.entry(1, 2) == 1);
    CHECK(m.entry(2, 1) == 1);
    CHECK(m.entry(2, 2) == 2);

    // all labels equal 1: first row tracks column sizes
    MatrixStructure ones = build(3, {{2, 0, 0}, {5, 0, 0}, {1, 0, 0}});
    CHECK(ones.entry(1, 1) == 2);
    CHECK(ones.entry(1, 2) == 7);
    CHECK(ones.entry(1, 3) == 8);
    CHECK(ones.entry(3, 3) == 8);

    std::mt19937_64 rng(41);
    auto raw = random_raw(rng, 4, 4, 9);
    MatrixStructure r = build(4, raw);
    for (uint32_t p = 1; p <= 4; ++p)
        for (uint32_t q = 1; q <= 4; ++q) CHECK(r.entry(p, q) == brute(raw, p, q));
    r.validate(brute(raw, 4, 4));
}

TEST_CASE("column differences") {
    std::mt19937_64 rng(42);
    auto raw = random_raw(rng, 5, 6, 20);
    MatrixStructure m = build(5, raw);
    auto zero = m.column_diff(3, 3);
    for (uint64_t v : zero) CHECK(v == 0);
    auto full = m.column_diff(6, 0);
    for (uint32_t p = 1; p <= 5; ++p) CHECK(full[p - 1] == brute(raw, p, 6));
    for (int round = 0; round < 100; ++round) {
        uint32_t qlo = rng() % 7;
        uint32_t qhi = qlo + rng() % (7 - qlo);
        auto d = m.column_diff(qhi, qlo);
        for (uint32_t p = 1; p <= 5; ++p)
            CHECK(d[p - 1] == brute(raw, p, qhi) - brute(raw, p, qlo));
    }
    CHECK_THROWS_AS(m.column_diff(7, 0), Error);
    CHECK_THROWS_AS(m.column_diff(1, 2), Error);
}

TEST_CASE("packed sections reproduce exact differences") {
    std::mt19937_64 rng(43);
    for (int round = 0; round < 50; ++round) {
        uint32_t f1 = 1 + rng() % 8;
        uint32_t f2 = 1 + rng() % 8;
        auto raw = random_raw(rng, f1, f2, 50);
        MatrixStructure m = build(f1, raw);
        const SectionLayout& lay = m.layout();
        uint32_t qlo = rng() % (f2 + 1);
        uint32_t qhi = qlo + rng() % (f2 + 1 - qlo);
        PackedFields z = m.packed_section_diff(qlo, qlo, lay.sections);
        CHECK(z.is_zero());
        for (uint32_t s = 1; s <= lay.sections; ++s) {
            PackedFields d = m.packed_section_diff(qhi, qlo, s);
            for (uint32_t p = 1; p <= f1; ++p) {
                // mask-and-shift of the exact table entries
                uint64_t a = lay.section_of(brute(raw, p, qhi), s);
                uint64_t b = lay.section_of(brute(raw, p, qlo), s);
                uint64_t mod = 1ull << lay.payload;
                CHECK(d.get(p) == (a + mod - b) % mod);
            }
        }
    }
}

TEST_CASE("small counts in one section equal the exact difference") {
    // counts fit entirely in the least significant section
    auto raw = std::vector<std::vector<uint64_t>>{{1, 2, 0, 1}, {0, 1, 1, 1}};
    MatrixStructure m = build(4, raw, 8, 2);
    const SectionLayout& lay = m.layout();
    PackedFields d = m.packed_section_diff(2, 0, lay.sections);
    auto exact = m.column_diff(2, 0);
    for (uint32_t p = 1; p <= 4; ++p) CHECK(d.get(p) == exact[p - 1]);
}

TEST_CASE("buffered updates are transparent to column reads") {
    std::mt19937_64 rng(44);
    auto raw = random_raw(rng, 4, 5, 10);
    MatrixStructure m = build(4, raw);
    // build, bump everything from (1,1), check the full difference
    m.apply(1, 1, +1);
    auto d = m.column_diff(5, 0);
    for (uint32_t p = 1; p <= 4; ++p) CHECK(d[p - 1] == brute(raw, p, 5) + 1);
    m.apply(1, 1, -1);
    auto d2 = m.column_diff(5, 0);
    for (uint32_t p = 1; p <= 4; ++p) CHECK(d2[p - 1] == brute(raw, p, 5));

    // random applies with interleaved reads against a rebuilt-from-scratch twin
    auto shadow = raw;
    for (int round = 0; round < 1000; ++round) {
        uint32_t p0 = 1 + rng() % 4, q0 = 1 + rng() % 5;
        int sign = rng() % 2 ? +1 : -1;
        if (sign < 0 && shadow[q0 - 1][p0 - 1] == 0) sign = +1;
        shadow[q0 - 1][p0 - 1] += sign;
        m.apply(p0, q0, sign);
        uint32_t qlo = rng() % 6, qhi = qlo + rng() % (6 - qlo);
        auto got = m.column_diff(qhi, qlo);
        for (uint32_t p = 1; p <= 4; ++p)
            CHECK(got[p - 1] == brute(shadow, p, qhi) - brute(shadow, p, qlo));
    }
    m.rebuild();
    CHECK(m.pending_size() == 0);
    m.validate(brute(shadow, 4, 5));

    // pending-vs-flushed equality
    m.apply(2, 3, +1);
    shadow[2][1] += 1;
    auto before = m.column_diff(4, 1);
    m.rebuild();
    auto after = m.column_diff(4, 1);
    CHECK(before == after);
    m.validate(brute(shadow, 4, 5));
}

TEST_CASE("packed reads require a flushed buffer") {
    auto raw = std::vector<std::vector<uint64_t>>{{1, 1}, {2, 0}};
    MatrixStructure m = build(2, raw);
    m.apply(1, 1, +1);
    CHECK_THROWS_MATCHES(m.packed_section_diff(2, 0, 1), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::invariant;
                         }));
    m.rebuild();
    CHECK_NOTHROW(m.packed_section_diff(2, 0, 1));
    CHECK_THROWS_AS(m.packed_section_diff(2, 0, m.layout().sections + 1), Error);
}

TEST_CASE("fold after k applies equals direct construction") {
    std::mt19937_64 rng(45);
    auto raw = random_raw(rng, 6, 6, 30);
    MatrixStructure m = build(6, raw);
    m.rebuild(); // no-op on empty pending
    auto twin = raw;
    for (int k = 0; k < 23; ++k) {
        uint32_t p0 = 1 + rng() % 6, q0 = 1 + rng() % 6;
        twin[q0 - 1][p0 - 1] += 1;
        m.apply(p0, q0, +1);
    }
    m.rebuild();
    MatrixStructure fresh = build(6, twin);
    for (uint32_t p = 1; p <= 6; ++p)
        for (uint32_t q = 1; q <= 6; ++q) CHECK(m.entry(p, q) == fresh.entry(p, q));
    m.validate(brute(twin, 6, 6));
}
