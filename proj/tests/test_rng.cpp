#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "attsolver/rng.hpp"

using namespace attsolver;

TEST_CASE("same seed reproduces the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("seed/stream pairs give distinct streams") {
    Rng a(42, 0), b(42, 1);
    int equal = 0;
    for (int i = 0; i < 64; ++i)
        if (a.uniform() == b.uniform()) ++equal;
    CHECK(equal < 4);
}

TEST_CASE("mix_seed separates indices") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(mix_seed(7, i));
    CHECK(seen.size() == 1000);
    CHECK(mix_seed(7, 3) != mix_seed(8, 3));
}

TEST_CASE("uniform ranges") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double v = rng.uniform(-2.5, 2.5);
        CHECK(v >= -2.5);
        CHECK(v < 2.5);
    }
}

TEST_CASE("below is in range and hits every bucket") {
    Rng rng(9);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto k = rng.below(7);
        REQUIRE(k < 7);
        ++counts[static_cast<int>(k)];
    }
    for (int c : counts) CHECK(c > 700);
}

TEST_CASE("normal has roughly standard moments") {
    Rng rng(123);
    const int n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(var == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    Rng rng(5);
    shuffle(v, rng);
    std::vector<int> w(50);
    std::iota(w.begin(), w.end(), 0);
    Rng rng2(5);
    shuffle(w, rng2);
    CHECK(v == w);
    CHECK(v != [] {
        std::vector<int> id(50);
        std::iota(id.begin(), id.end(), 0);
        return id;
    }());
    std::sort(v.begin(), v.end());
    for (int i = 0; i < 50; ++i) CHECK(v[i] == i);
}
