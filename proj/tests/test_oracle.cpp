#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "thor/env.hpp"
#include "thor/exact_dp.hpp"
#include "thor/mdp.hpp"
#include "thor/oracle.hpp"
#include "thor/policy.hpp"

using namespace thor;

namespace {

DemoSet collect_demos(const TabularMdp& mdp, const std::vector<int>& terminal_states,
                      const Policy& policy, int episodes, int horizon, unsigned long long seed) {
    TabularEnv env(mdp, horizon, terminal_states);
    const Rng root(seed);
    DemoSet demos;
    demos.env_name = env.name();
    demos.expert_descriptor = "test policy";
    for (int e = 0; e < episodes; ++e) {
        Rng stream = root.spawn(static_cast<unsigned long long>(e));
        demos.trajectories.push_back(rollout(env, policy, stream, e));
    }
    return demos;
}

/// Deterministic 4-cycle with one action and state-dependent costs.
TabularMdp cycle_mdp(double discount) {
    TabularMdp mdp(4, 1, discount);
    const double costs[4] = {0.2, 0.8, 0.1, 0.5};
    for (int s = 0; s < 4; ++s) {
        mdp.transition[0](s, (s + 1) % 4) = 1.0;
        mdp.cost_mean(s, 0) = costs[s];
        mdp.initial_dist(s) = 0.25;
    }
    mdp.validate();
    return mdp;
}

/// Three-state chain that always terminates: 0 -> 1 -> 2 (absorbing), with
/// action-dependent costs so different episodes see different returns.
TabularMdp terminating_chain() {
    TabularMdp mdp(3, 2, 0.8);
    for (int a = 0; a < 2; ++a) {
        mdp.transition[static_cast<std::size_t>(a)](0, 1) = 1.0;
        mdp.transition[static_cast<std::size_t>(a)](1, 2) = 1.0;
        mdp.transition[static_cast<std::size_t>(a)](2, 2) = 1.0;
    }
    mdp.cost_mean << 0.3, 0.7, 0.2, 0.4, 0.0, 0.0;
    mdp.initial_dist << 0.5, 0.5, 0.0;
    mdp.validate();
    return mdp;
}

} // namespace

TEST_CASE("oracle: DemoSet validation") {
    DemoSet demos;
    demos.env_name = "x";
    CHECK_THROWS_AS(demos.validate(), std::invalid_argument);

    Trajectory a;
    a.episode_id = 0;
    a.records.push_back({1, {0.0, 1.0}, Action::discrete(0), 0.5, {}, std::vector<double>{1.0, 0.0}, false});
    a.records.push_back({2, {1.0, 0.0}, Action::discrete(0), 0.5, {}, std::vector<double>{1.0, 1.0}, true});
    demos.trajectories.push_back(a);
    CHECK(demos.state_dim() == 2);
    demos.validate();

    SUBCASE("inconsistent state dimensions rejected") {
        Trajectory b = a;
        b.episode_id = 1;
        b.records[0].state = {0.0};
        b.records[0].next_state = std::vector<double>{1.0};
        b.records[1].state = {1.0};
        b.records[1].next_state = std::vector<double>{0.0};
        demos.trajectories.push_back(b);
        CHECK_THROWS_AS(demos.validate(), std::invalid_argument);
    }
    SUBCASE("mixed action kinds rejected") {
        Trajectory b = a;
        b.episode_id = 1;
        for (auto& rec : b.records) rec.action = Action::continuous({0.25});
        demos.trajectories.push_back(b);
        CHECK_THROWS_AS(demos.validate(), std::invalid_argument);
    }
}

TEST_CASE("oracle: fit_td recovers the expert value of a deterministic cycle") {
    const TabularMdp mdp = cycle_mdp(0.9);
    const TabularPolicy policy = TabularPolicy::uniform(4, 1);
    const DemoSet demos = collect_demos(mdp, {}, policy, 40, 60, 123);

    TdOptions options;
    options.lambda = 0.9;
    options.lr = 0.1;
    options.epochs = 200;
    options.validation_fraction = 0.1;
    options.patience = 50;
    Rng rng(7);
    const ValueOracle oracle = fit_td(demos, 0.9, options, rng);

    REQUIRE(oracle.is_tabular());
    const ValueTable exact = policy_evaluation(mdp, policy);
    CHECK(oracle_error(oracle, exact.v) <= 1e-3);
    CHECK(oracle.source() == PotentialSource::td_fitted);

    // Structure of the training report.
    const OracleFitReport& report = oracle.fit_report;
    CHECK(report.epochs_run >= 1);
    CHECK(report.train_epoch_loss.size() == static_cast<std::size_t>(report.epochs_run));
    CHECK(report.validation_epoch_loss.size() == static_cast<std::size_t>(report.epochs_run));
    CHECK(report.best_epoch >= 0);
    CHECK(report.best_epoch < report.epochs_run);
}

TEST_CASE("oracle: fit_td on a zero-cost environment learns zero") {
    TabularMdp mdp = cycle_mdp(0.9);
    mdp.cost_mean.setZero();
    const TabularPolicy policy = TabularPolicy::uniform(4, 1);
    const DemoSet demos = collect_demos(mdp, {}, policy, 10, 30, 5);
    TdOptions options;
    options.epochs = 20;
    options.validation_fraction = 0.0;
    Rng rng(7);
    const ValueOracle oracle = fit_td(demos, 0.9, options, rng);
    CHECK(oracle_error(oracle, Eigen::VectorXd::Zero(4)) <= 1e-6);
}

TEST_CASE("oracle: fit_td(lambda=1, 1/visit lr) equals Monte-Carlo averaging") {
    const TabularMdp mdp = terminating_chain();
    const TabularPolicy policy = TabularPolicy::uniform(3, 2);
    const DemoSet demos = collect_demos(mdp, {2}, policy, 30, 10, 321);

    TdOptions td;
    td.lambda = 1.0;
    td.inverse_visit_lr = true;
    td.epochs = 1;
    td.validation_fraction = 0.0;
    Rng rng_td(1);
    const ValueOracle via_td = fit_td(demos, 0.8, td, rng_td);

    Rng rng_mc(2);
    const ValueOracle via_mc = fit_mc(demos, 0.8, McOptions{}, rng_mc);

    REQUIRE(via_td.is_tabular());
    REQUIRE(via_mc.is_tabular());
    REQUIRE(via_td.table().size() == via_mc.table().size());
    for (std::size_t s = 0; s < via_td.table().size(); ++s)
        CHECK(via_td.table()[s] == doctest::Approx(via_mc.table()[s]).epsilon(1e-6));
}

TEST_CASE("oracle: fit_mc tabular is the per-state mean of returns-to-go") {
    Rng mdp_rng(11);
    const TabularMdp mdp = random_mdp(4, 2, 0.95, mdp_rng);
    const TabularPolicy policy = TabularPolicy::uniform(4, 2);
    const DemoSet demos = collect_demos(mdp, {}, policy, 10, 12, 77);

    Rng rng(3);
    const ValueOracle oracle = fit_mc(demos, 0.95, McOptions{}, rng);
    REQUIRE(oracle.is_tabular());
    CHECK(oracle.source() == PotentialSource::mc_fitted);

    std::vector<double> sum(4, 0.0);
    std::vector<double> count(4, 0.0);
    for (const Trajectory& traj : demos.trajectories) {
        double g = 0.0;
        std::vector<double> rtg(traj.records.size());
        for (long t = static_cast<long>(traj.records.size()) - 1; t >= 0; --t) {
            g = traj.records[static_cast<std::size_t>(t)].cost + 0.95 * g;
            rtg[static_cast<std::size_t>(t)] = g;
        }
        for (std::size_t t = 0; t < traj.records.size(); ++t) {
            const int s = static_cast<int>(traj.records[t].state[0]);
            sum[static_cast<std::size_t>(s)] += rtg[t];
            count[static_cast<std::size_t>(s)] += 1.0;
        }
    }
    for (int s = 0; s < 4; ++s) {
        const double want = count[static_cast<std::size_t>(s)] > 0.0
                                ? sum[static_cast<std::size_t>(s)] / count[static_cast<std::size_t>(s)]
                                : 0.0;
        CHECK(oracle.table()[static_cast<std::size_t>(s)] == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("oracle: fit_mc single visit equals its observed return-to-go") {
    Trajectory traj;
    traj.episode_id = 0;
    traj.records.push_back({1, {0.0}, Action::discrete(0), 1.0, {}, std::vector<double>{1.0}, false});
    traj.records.push_back({2, {1.0}, Action::discrete(0), 0.5, {}, std::vector<double>{1.0}, true});
    DemoSet demos;
    demos.trajectories.push_back(traj);
    demos.env_name = "hand";
    demos.expert_descriptor = "hand";

    Rng rng(1);
    const ValueOracle oracle = fit_mc(demos, 0.5, McOptions{}, rng);
    REQUIRE(oracle.is_tabular());
    CHECK(oracle.table()[0] == doctest::Approx(1.0 + 0.5 * 0.5).epsilon(1e-12));
    CHECK(oracle.table()[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("oracle: fit_td converges on a 10-state MDP with 500 demo episodes") {
    Rng mdp_rng(19);
    const TabularMdp mdp = random_mdp(10, 3, 0.95, mdp_rng);
    std::vector<int> actions(10);
    for (int s = 0; s < 10; ++s) actions[static_cast<std::size_t>(s)] = s % 3;
    const TabularPolicy expert = deterministic_policy(actions, 3);
    const DemoSet demos = collect_demos(mdp, {}, expert, 500, 100, 2024);

    TdOptions options;
    options.lambda = 0.9;
    options.inverse_visit_lr = true;
    options.epochs = 3;
    options.validation_fraction = 0.0;
    Rng rng(4);
    const ValueOracle oracle = fit_td(demos, 0.95, options, rng);

    const ValueTable exact = policy_evaluation(mdp, expert);
    CHECK(oracle_error(oracle, exact.v) <= 1e-2);
}

TEST_CASE("oracle: network-backed fit_td standardizes inputs and reports training") {
    Rng gen(23);
    DemoSet demos;
    demos.env_name = "synthetic2d";
    demos.expert_descriptor = "random";
    for (int e = 0; e < 10; ++e) {
        Trajectory traj;
        traj.episode_id = e;
        std::vector<double> state = {gen.uniform(-1.2, 0.6), gen.uniform(-0.07, 0.07)};
        for (int t = 1; t <= 20; ++t) {
            std::vector<double> next = {gen.uniform(-1.2, 0.6), gen.uniform(-0.07, 0.07)};
            traj.records.push_back({t, state, Action::discrete(0), 1.0, {}, next, t == 20});
            state = next;
        }
        demos.trajectories.push_back(traj);
    }

    TdOptions options;
    options.epochs = 5;
    options.lr = 1e-3;
    options.hidden_width = 8;
    options.validation_fraction = 0.0;
    Rng rng(6);
    const ValueOracle oracle = fit_td(demos, 0.99, options, rng);

    CHECK(!oracle.is_tabular());
    CHECK(oracle.arch().input_dim == 2);
    CHECK(oracle.input_shift().size() == 2);
    CHECK(oracle.input_scale().size() == 2);
    CHECK(oracle.input_scale().minCoeff() > 0.0);
    CHECK(std::isfinite(oracle.evaluate({-0.5, 0.0})));
    CHECK(oracle.fit_report.epochs_run == 5);
    CHECK(!oracle.fit_report.early_stopped);
    // Deterministic post-training evaluation.
    CHECK(oracle.evaluate({-0.5, 0.0}) == oracle.evaluate({-0.5, 0.0}));
}

TEST_CASE("oracle: fit_td flags divergence") {
    Rng gen(29);
    DemoSet demos;
    demos.env_name = "synthetic2d";
    demos.expert_descriptor = "random";
    for (int e = 0; e < 5; ++e) {
        Trajectory traj;
        traj.episode_id = e;
        std::vector<double> state = {gen.uniform(-1.0, 1.0), gen.uniform(-1.0, 1.0)};
        for (int t = 1; t <= 20; ++t) {
            std::vector<double> next = {gen.uniform(-1.0, 1.0), gen.uniform(-1.0, 1.0)};
            traj.records.push_back({t, state, Action::discrete(0), 1.0, {}, next, t == 20});
            state = next;
        }
        demos.trajectories.push_back(traj);
    }
    TdOptions options;
    options.epochs = 50;
    options.lr = 1e4;
    options.hidden_width = 8;
    options.validation_fraction = 0.0;
    Rng rng(6);
    CHECK_THROWS_AS(fit_td(demos, 0.99, options, rng), std::runtime_error);
}

TEST_CASE("oracle: perturb_oracle stays inside epsilon") {
    Rng gen(31);
    Eigen::VectorXd values(8);
    for (int s = 0; s < 8; ++s) values(s) = gen.uniform(0.0, 2.0);

    SUBCASE("epsilon zero is exact") {
        Rng rng(1);
        const ValueOracle oracle = perturb_oracle(values, 0.0, PerturbMode::uniform, rng);
        CHECK(oracle_error(oracle, values) == 0.0);
        CHECK(oracle.source() == PotentialSource::perturbed);
    }
    SUBCASE("uniform mode: sup-norm bounded, mean magnitude near epsilon/2") {
        const double epsilon = 0.3;
        Rng rng(2);
        double sup = 0.0;
        double mean_abs = 0.0;
        const int draws = 1000;
        for (int d = 0; d < draws; ++d) {
            const ValueOracle oracle = perturb_oracle(values, epsilon, PerturbMode::uniform, rng);
            for (int s = 0; s < 8; ++s) {
                const double err = std::abs(oracle.table()[static_cast<std::size_t>(s)] - values(s));
                CHECK(err <= epsilon);
                sup = std::max(sup, err);
                mean_abs += err;
            }
        }
        mean_abs /= draws * 8.0;
        CHECK(sup <= epsilon);
        CHECK(mean_abs == doctest::Approx(epsilon / 2.0).epsilon(0.05));
    }
    SUBCASE("adversarial sign mode reproduces the misleading-chain pattern") {
        const double delta = 0.01;
        const AdversarialChain chain = adversarial_chain(30, 0.9, delta);
        const OptimalValues opt = value_iteration(chain.mdp);
        const double epsilon = 0.5 + delta;
        Rng rng(3);
        const ValueOracle oracle = perturb_oracle(opt.values.v, epsilon, PerturbMode::adversarial_sign, rng);
        CHECK(oracle_error(oracle, opt.values.v) <= epsilon + 1e-12);
        // Low-value free lane is overshot, high-value penalty lane undershot.
        for (int s : chain.free_lane)
            CHECK(oracle.table()[static_cast<std::size_t>(s)] ==
                  doctest::Approx(opt.values.v(s) + epsilon).epsilon(1e-9));
        for (int s : chain.penalty_lane)
            CHECK(oracle.table()[static_cast<std::size_t>(s)] ==
                  doctest::Approx(opt.values.v(s) - epsilon).epsilon(1e-9));
        // The flipped ordering misleads the one-step greedy policy at the head.
        Eigen::VectorXd table(static_cast<Eigen::Index>(oracle.table().size()));
        for (Eigen::Index s = 0; s < table.size(); ++s)
            table(s) = oracle.table()[static_cast<std::size_t>(s)];
        const TabularPolicy greedy = induced_policy(chain.mdp, table);
        const TabularPolicy optimal = induced_policy(chain.mdp, opt.values.v);
        CHECK(greedy.action_at(chain.free_lane[0]) != optimal.action_at(chain.free_lane[0]));
    }
}

TEST_CASE("oracle: oracle_error conventions") {
    Eigen::VectorXd ref(4);
    ref << 0.1, 0.2, 0.3, 0.4;
    std::vector<double> same = {0.1, 0.2, 0.3, 0.4};

    SUBCASE("identical tables give zero") {
        CHECK(oracle_error(ValueOracle::tabular(same, PotentialSource::custom), ref) == 0.0);
    }
    SUBCASE("single-state difference is picked up") {
        std::vector<double> bumped = same;
        bumped[2] += 0.3;
        CHECK(oracle_error(ValueOracle::tabular(bumped, PotentialSource::custom), ref) ==
              doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("random tables match an independent scan") {
        Rng rng(37);
        std::vector<double> noisy(4);
        double want = 0.0;
        for (int s = 0; s < 4; ++s) {
            noisy[static_cast<std::size_t>(s)] = ref(s) + rng.uniform(-1.0, 1.0);
            want = std::max(want, std::abs(noisy[static_cast<std::size_t>(s)] - ref(s)));
        }
        CHECK(oracle_error(ValueOracle::tabular(noisy, PotentialSource::custom), ref) ==
              doctest::Approx(want).epsilon(1e-15));
    }
    SUBCASE("network backing is rejected, sampled error works instead") {
        const MlpArch arch{2, {4}, 1, HeadType::scalar};
        Rng rng(41);
        const Eigen::VectorXd theta = init_params(arch, rng);
        const ValueOracle oracle = ValueOracle::network(arch, theta, PotentialSource::custom);
        CHECK_THROWS_AS(oracle_error(oracle, ref), std::domain_error);

        const std::vector<std::vector<double>> states = {{0.0, 0.0}, {0.5, -0.5}, {1.0, 1.0}};
        std::vector<double> reference(3);
        const double offsets[3] = {0.1, -0.25, 0.05};
        for (std::size_t i = 0; i < 3; ++i)
            reference[i] = oracle.evaluate(states[i]) + offsets[i];
        CHECK(oracle_error_sampled(oracle, states, reference) == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("oracle: files round-trip bitwise") {
    SUBCASE("tabular backing") {
        const std::vector<double> values = {1.0 / 3.0, M_PI, 1e-17, -0.0, 42.0};
        const ValueOracle oracle = ValueOracle::tabular(values, PotentialSource::td_fitted);
        const std::string path = "oracle_tabular_test.txt";
        save_oracle(path, oracle);
        const ValueOracle loaded = load_oracle(path);
        std::remove(path.c_str());
        REQUIRE(loaded.is_tabular());
        CHECK(loaded.source() == PotentialSource::td_fitted);
        REQUIRE(loaded.table().size() == values.size());
        for (std::size_t s = 0; s < values.size(); ++s) CHECK(loaded.table()[s] == values[s]);
    }
    SUBCASE("network backing with standardizer") {
        const MlpArch arch{2, {5}, 1, HeadType::scalar};
        Rng rng(43);
        const Eigen::VectorXd theta = init_params(arch, rng);
        Eigen::VectorXd shift(2), scale(2);
        shift << -0.35, 0.001;
        scale << 0.9, 0.047;
        const ValueOracle oracle =
            ValueOracle::network(arch, theta, PotentialSource::td_fitted, shift, scale);
        const std::string path = "oracle_network_test.txt";
        save_oracle(path, oracle);
        const ValueOracle loaded = load_oracle(path);
        std::remove(path.c_str());
        REQUIRE(!loaded.is_tabular());
        CHECK(loaded.arch() == arch);
        CHECK((loaded.params() - theta).cwiseAbs().maxCoeff() == 0.0);
        CHECK((loaded.input_shift() - shift).cwiseAbs().maxCoeff() == 0.0);
        CHECK((loaded.input_scale() - scale).cwiseAbs().maxCoeff() == 0.0);
        for (const std::vector<double>& probe :
             {std::vector<double>{0.0, 0.0}, {-1.0, 0.05}, {0.5, -0.03}})
            CHECK(loaded.evaluate(probe) == oracle.evaluate(probe));
    }
}
