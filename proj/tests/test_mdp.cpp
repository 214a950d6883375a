#include <cmath>
#include <vector>

#include "doctest.h"
#include "thor/mdp.hpp"

using namespace thor;

namespace {

/// Two-state swap chain: both states move to the other one under the single
/// action; costs 0 and 1.
TabularMdp swap_chain(double discount) {
    TabularMdp mdp(2, 1, discount);
    mdp.transition[0] << 0, 1, 1, 0;
    mdp.cost_mean << 0, 1;
    mdp.initial_dist << 1, 0;
    mdp.validate();
    return mdp;
}

} // namespace

TEST_CASE("mdp: validate accepts a well-formed instance") {
    CHECK_NOTHROW(swap_chain(0.5));
}

TEST_CASE("mdp: validate rejects broken invariants") {
    TabularMdp mdp = swap_chain(0.5);

    SUBCASE("row sum off") {
        mdp.transition[0](0, 1) = 0.5;
        CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
    }
    SUBCASE("negative probability") {
        mdp.transition[0](0, 0) = -0.2;
        mdp.transition[0](0, 1) = 1.2;
        CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
    }
    SUBCASE("discount at one") {
        mdp.discount = 1.0;
        CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
    }
    SUBCASE("negative discount") {
        mdp.discount = -0.1;
        CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
    }
    SUBCASE("initial distribution not normalized") {
        mdp.initial_dist << 0.7, 0.7;
        CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
    }
    SUBCASE("negative cost noise") {
        mdp.cost_noise_std(1, 0) = -1.0;
        CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
    }
}

TEST_CASE("mdp: sample_transition on a one-hot row always lands there") {
    TabularMdp mdp(4, 1, 0.9);
    for (int s = 0; s < 4; ++s) mdp.transition[0](s, 3) = 1.0;
    mdp.initial_dist.setConstant(0.25);
    mdp.validate();
    Rng rng(0);
    for (int s = 0; s < 4; ++s)
        for (int i = 0; i < 20; ++i) CHECK(sample_transition(mdp, s, 0, rng) == 3);
}

TEST_CASE("mdp: sample_transition rejects bad indices") {
    TabularMdp mdp = swap_chain(0.5);
    Rng rng(0);
    CHECK_THROWS_AS(sample_transition(mdp, -1, 0, rng), std::out_of_range);
    CHECK_THROWS_AS(sample_transition(mdp, 2, 0, rng), std::out_of_range);
    CHECK_THROWS_AS(sample_transition(mdp, 0, 1, rng), std::out_of_range);
}

TEST_CASE("mdp: sample_transition frequencies match the row") {
    SUBCASE("uniform over two states") {
        TabularMdp mdp(2, 1, 0.9);
        mdp.transition[0] << 0.5, 0.5, 0.5, 0.5;
        mdp.initial_dist << 1, 0;
        mdp.validate();
        Rng rng(77);
        const int n = 100000;
        int zeros = 0;
        for (int i = 0; i < n; ++i)
            if (sample_transition(mdp, 0, 0, rng) == 0) ++zeros;
        const double freq = static_cast<double>(zeros) / n;
        CHECK(std::abs(freq - 0.5) < 0.01);
    }
    SUBCASE("random row within 1 percent total variation") {
        Rng rng(5);
        TabularMdp mdp = random_mdp(6, 2, 0.9, rng);
        const int n = 100000;
        std::vector<int> count(6, 0);
        Rng sampler(8);
        for (int i = 0; i < n; ++i) ++count[static_cast<std::size_t>(sample_transition(mdp, 2, 1, sampler))];
        double tv = 0.0;
        for (int s = 0; s < 6; ++s)
            tv += std::abs(static_cast<double>(count[s]) / n - mdp.transition[1](2, s));
        CHECK(tv / 2.0 < 0.01);
    }
}

TEST_CASE("mdp: sample_cost is exact without noise and centered with noise") {
    TabularMdp mdp = swap_chain(0.5);
    Rng rng(1);
    CHECK(sample_cost(mdp, 1, 0, rng) == 1.0);

    mdp.cost_noise_std(1, 0) = 0.5;
    const int n = 50000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double c = sample_cost(mdp, 1, 0, rng);
        sum += c;
        sumsq += c * c;
    }
    const double mean = sum / n;
    const double stddev = std::sqrt(sumsq / n - mean * mean);
    CHECK(std::abs(mean - 1.0) < 0.01);
    CHECK(std::abs(stddev - 0.5) < 0.01);
}

TEST_CASE("mdp: random_mdp satisfies every structural invariant") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const TabularMdp mdp = random_mdp(2 + rng.uniform_int(10), 1 + rng.uniform_int(4), 0.9, rng);
        CHECK_NOTHROW(mdp.validate());
        CHECK((mdp.cost_mean.array() >= 0.0).all());
        CHECK((mdp.cost_mean.array() <= 1.0).all());
        CHECK((mdp.cost_noise_std.array() == 0.0).all());
        const double expected = 1.0 / mdp.num_states;
        CHECK((mdp.initial_dist.array() - expected).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("mdp: cost_under picks the per-state action costs") {
    TabularMdp mdp(2, 2, 0.9);
    mdp.transition[0] << 1, 0, 0, 1;
    mdp.transition[1] << 1, 0, 0, 1;
    mdp.cost_mean << 0.25, 0.5, 0.75, 1.0;
    mdp.initial_dist << 0.5, 0.5;
    mdp.validate();
    const Eigen::VectorXd c = mdp.cost_under({1, 0});
    CHECK(c(0) == 0.5);
    CHECK(c(1) == 0.75);
}
