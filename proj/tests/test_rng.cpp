#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "thor/rng.hpp"

using namespace thor;

TEST_CASE("rng: identical seeds replay the identical stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(42), d(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(c.uniform() == d.uniform());
        CHECK(c.normal() == d.normal());
    }
}

TEST_CASE("rng: different seeds diverge") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("rng: uniform ranges and argument checks") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double v = rng.uniform(-3.0, 5.0);
        CHECK(v >= -3.0);
        CHECK(v < 5.0);
    }
    CHECK_THROWS_AS(rng.uniform(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(rng.uniform_int(0), std::invalid_argument);
    CHECK_THROWS_AS(rng.uniform_int(-3), std::invalid_argument);
}

TEST_CASE("rng: uniform_int is uniform (chi-square over 10 bins)") {
    Rng rng(123);
    const int n = 100000, bins = 10;
    std::vector<int> count(bins, 0);
    for (int i = 0; i < n; ++i) ++count[static_cast<std::size_t>(rng.uniform_int(bins))];
    const double expected = static_cast<double>(n) / bins;
    double chi2 = 0.0;
    for (int c : count) chi2 += (c - expected) * (c - expected) / expected;
    // 99.9% quantile of chi-square with 9 degrees of freedom is 27.9.
    CHECK(chi2 < 27.9);
}

TEST_CASE("rng: categorical matches its weights") {
    Rng rng(5);
    const std::vector<double> w = {1.0, 3.0, 0.5, 2.0};
    const double total = 6.5;
    const int n = 100000;
    std::vector<int> count(w.size(), 0);
    for (int i = 0; i < n; ++i) ++count[static_cast<std::size_t>(rng.categorical(w))];
    double chi2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double expected = n * w[i] / total;
        chi2 += (count[i] - expected) * (count[i] - expected) / expected;
    }
    // 99.9% quantile with 3 degrees of freedom is 16.3.
    CHECK(chi2 < 16.3);

    CHECK_THROWS_AS(rng.categorical(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(rng.categorical(std::vector<double>{1.0, -0.1}), std::invalid_argument);
    CHECK_THROWS_AS(rng.categorical(std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("rng: normal moments") {
    Rng rng(11);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rng: spawn is deterministic and independent of parent consumption") {
    Rng parent_a(99), parent_b(99);
    parent_b.next_u64();
    parent_b.uniform();
    Rng child_a = parent_a.spawn(17);
    Rng child_b = parent_b.spawn(17);
    for (int i = 0; i < 50; ++i) CHECK(child_a.next_u64() == child_b.next_u64());
}

TEST_CASE("rng: spawned streams do not collide") {
    Rng root(3);
    std::set<std::uint64_t> seen;
    for (std::uint64_t id = 0; id < 1000; ++id) {
        Rng child = root.spawn(id);
        seen.insert(child.next_u64());
        seen.insert(child.next_u64());
    }
    // Parent stream included: all draws distinct.
    seen.insert(root.next_u64());
    seen.insert(root.next_u64());
    CHECK(seen.size() == 2002);
}

TEST_CASE("rng: spawned stream differs from the parent stream") {
    Rng root(21);
    Rng child = root.spawn(0);
    Rng fresh(21);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (child.next_u64() == fresh.next_u64()) ++same;
    CHECK(same == 0);
}
