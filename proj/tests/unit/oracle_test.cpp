#include <catch2/catch_amalgamated.hpp>

#include "rsel/oracle.hpp"

using namespace rsel;

TEST_CASE("oracle point set semantics") {
    OraclePointSet o;
    o.insert(1, 10);
    o.insert(2, 5);
    o.insert(3, 7);
    CHECK(o.select(1, 3, 2).y == 7);
    CHECK(o.count(-100, 100, -100, 100) == 3);
    CHECK(o.count(1, 2, 5, 5) == 1);
    CHECK_THROWS_MATCHES(o.select(10, 20, 1), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::rank && e.detail() == 0;
                         }));
    o.erase(2, 5);
    CHECK(o.size() == 2);
    CHECK_THROWS_AS(o.erase(2, 5), Error);
    OraclePointSet empty;
    CHECK_THROWS_MATCHES(empty.select(0, 1, 1), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::empty;
                         }));
}

TEST_CASE("oracle point set deletes the smallest id") {
    OraclePointSet o;
    o.insert(1, 1); // id 0
    o.insert(1, 1); // id 1
    o.erase(1, 1);
    CHECK(o.select(1, 1, 1).id == 1);
}

TEST_CASE("oracle array semantics") {
    OracleArray o(9);
    uint64_t i = 1;
    for (uint32_t v : {3, 1, 4, 1, 5}) o.insert(i++, v);
    CHECK(o.select(1, 5, 3) == 3);
    CHECK(o.access(3) == 4);
    o.insert(1, 9);
    CHECK(o.access(1) == 9);
    CHECK(o.access(4) == 4); // shifted
    CHECK(o.range_count(1, 6, 1, 3) == 3);
    while (o.size()) o.erase(1);
    CHECK(o.size() == 0);
    CHECK_THROWS_AS(o.access(1), Error);
    CHECK_THROWS_MATCHES(o.select(1, 1, 1), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::empty;
                         }));
}
