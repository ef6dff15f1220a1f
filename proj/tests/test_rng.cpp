#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "vortexlab/rng.hpp"

using namespace vortexlab;

TEST_CASE("same seed gives identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams are independent of draw order") {
    Rng s1 = rng_stream(7, {Rng::key("aug"), 3, 12});
    Rng s2 = rng_stream(7, {Rng::key("aug"), 3, 12});
    (void)rng_stream(7, {Rng::key("other"), 1}).next_u64();
    CHECK(s1.next_u64() == s2.next_u64());
    Rng s3 = rng_stream(7, {Rng::key("aug"), 3, 13});
    Rng s4 = rng_stream(8, {Rng::key("aug"), 3, 12});
    CHECK(s1.next_u64() != s3.next_u64());
    CHECK(s2.next_u64() != s4.next_u64());
}

TEST_CASE("uniform stays in range, normal has right moments") {
    Rng rng(123);
    double sum = 0, sum2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < n; ++i) {
        const double g = rng.normal();
        sum += g;
        sum2 += g * g;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum2 / n - 1.0) < 0.02);
}

TEST_CASE("sample_without_replacement is sorted and distinct") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto idx = rng.sample_without_replacement(37, 12);
        CHECK(idx.size() == 12);
        std::set<int> s(idx.begin(), idx.end());
        CHECK(s.size() == 12);
        for (size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
        for (int v : idx) {
            CHECK(v >= 0);
            CHECK(v < 37);
        }
    }
}

TEST_CASE("uniform_int covers inclusive bounds") {
    Rng rng(9);
    std::set<int> seen;
    for (int i = 0; i < 1000; ++i) seen.insert(rng.uniform_int(3, 5));
    CHECK(seen == std::set<int>{3, 4, 5});
}
