#include <cmath>
#include <vector>

#include "doctest.h"
#include "thor/envs.hpp"
#include "thor/exact_dp.hpp"
#include "thor/mdp.hpp"
#include "thor/oracle.hpp"
#include "thor/thor.hpp"

using namespace thor;

namespace {

/// Hand-built single-episode batch: 1-D states 0,1,2,..., given shaped and
/// raw costs, alternating binary actions.
std::vector<Trajectory> hand_batch(const std::vector<double>& shaped_costs, bool ends_done) {
    Trajectory traj;
    traj.episode_id = 0;
    const int len = static_cast<int>(shaped_costs.size());
    for (int t = 0; t < len; ++t) {
        TransitionRecord rec;
        rec.t = t + 1;
        rec.state = {static_cast<double>(t)};
        rec.action = Action::discrete(t % 2);
        rec.cost = shaped_costs[static_cast<std::size_t>(t)] + 0.25;
        rec.shaped_cost = shaped_costs[static_cast<std::size_t>(t)];
        rec.next_state = std::vector<double>{static_cast<double>(t + 1)};
        rec.done = ends_done && t == len - 1;
        traj.records.push_back(rec);
    }
    traj.truncated = !ends_done;
    return {traj};
}

/// Linear scalar critic on 1-D inputs: V(s) = w * s + b.
struct LinearCritic {
    MlpArch arch{1, {}, 1, HeadType::scalar};
    Eigen::VectorXd params;
    LinearCritic(double w, double b) : params(2) { params << w, b; }
    double at(double s) const { return params(0) * s + params(1); }
};

TabularMdp goal_chain() {
    TabularMdp mdp(3, 2, 0.9);
    for (int a = 0; a < 2; ++a) {
        mdp.transition[static_cast<std::size_t>(a)](0, 2) = 1.0;
        mdp.transition[static_cast<std::size_t>(a)](1, 0) = 1.0;
        mdp.transition[static_cast<std::size_t>(a)](2, 2) = 1.0;
    }
    mdp.cost_mean.setConstant(0.5);
    mdp.initial_dist << 0.5, 0.5, 0.0;
    mdp.validate();
    return mdp;
}

} // namespace

TEST_CASE("thor: encode_observation") {
    SUBCASE("pass-through when disabled") {
        const std::vector<double> obs = {0.3, -0.7};
        CHECK(encode_observation(obs, 0) == obs);
    }
    SUBCASE("one-hot for index observations") {
        CHECK(encode_observation({2.0}, 5) == std::vector<double>{0, 0, 1, 0, 0});
        CHECK(encode_observation({0.0}, 2) == std::vector<double>{1, 0});
    }
    SUBCASE("rejects non-index observations") {
        CHECK_THROWS_AS(encode_observation({0.5}, 4), std::invalid_argument);
        CHECK_THROWS_AS(encode_observation({4.0}, 4), std::invalid_argument);
        CHECK_THROWS_AS(encode_observation({-1.0}, 4), std::invalid_argument);
        CHECK_THROWS_AS(encode_observation({1.0, 2.0}, 4), std::invalid_argument);
    }
}

TEST_CASE("thor: config validation") {
    const auto env = make_env("mountain_car", 200);
    ThorConfig config;
    config.validate(env->horizon());

    SUBCASE("k bounds") {
        config.k = 0;
        CHECK_THROWS_AS(config.validate(200), std::invalid_argument);
        config.k = 201;
        CHECK_THROWS_AS(config.validate(200), std::invalid_argument);
        config.k = kInfiniteK;
        config.validate(200);
        config.k = 200;
        config.validate(200);
    }
    SUBCASE("trust region and discount") {
        config.kl_step = 0.0;
        CHECK_THROWS_AS(config.validate(200), std::invalid_argument);
        config.kl_step = 0.01;
        config.discount = 0.0;
        CHECK_THROWS_AS(config.validate(200), std::invalid_argument);
        config.discount = 1.5;
        CHECK_THROWS_AS(config.validate(200), std::invalid_argument);
    }
    SUBCASE("batching") {
        config.batch_episodes = 0;
        CHECK_THROWS_AS(config.validate(200), std::invalid_argument);
        config.batch_episodes = 1;
        config.iterations = 0;
        CHECK_THROWS_AS(config.validate(200), std::invalid_argument);
    }
    SUBCASE("entropy coefficient must not be negative") {
        config.entropy_coef = -0.1;
        CHECK_THROWS_AS(config.validate(200), std::invalid_argument);
    }
}

TEST_CASE("thor: MlpPolicy construction per action space") {
    Rng rng(3);
    SUBCASE("discrete env gets a categorical head") {
        const auto env = make_env("mountain_car", 200);
        const MlpPolicy policy = MlpPolicy::for_env(*env, 16, 0, rng);
        CHECK(policy.arch().input_dim == 2);
        CHECK(policy.arch().hidden == std::vector<int>{16, 16});
        CHECK(policy.arch().output_dim == 3);
        CHECK(policy.arch().head == HeadType::categorical);
        Rng sampler(4);
        for (int i = 0; i < 50; ++i) {
            const Action a = policy.act({-0.5, 0.01}, sampler);
            CHECK(a.is_discrete());
            CHECK(a.index >= 0);
            CHECK(a.index < 3);
        }
    }
    SUBCASE("box env gets a gaussian head with clipped samples") {
        const auto env = make_env("pendulum_sparse", 200);
        const MlpPolicy policy = MlpPolicy::for_env(*env, 8, 0, rng);
        CHECK(policy.arch().head == HeadType::gaussian);
        CHECK(policy.arch().output_dim == 1);
        Rng sampler(5);
        for (int i = 0; i < 200; ++i) {
            const Action a = policy.act({3.0, 0.0}, sampler);
            CHECK(!a.is_discrete());
            CHECK(a.box[0] >= -2.0);
            CHECK(a.box[0] <= 2.0);
        }
    }
    SUBCASE("one-hot tabular policy sizes its input to the state count") {
        Rng mdp_rng(6);
        const TabularMdp mdp = random_mdp(5, 2, 0.9, mdp_rng);
        TabularEnv env(mdp, 10, {});
        const MlpPolicy policy = MlpPolicy::for_env(env, 8, 5, mdp_rng);
        CHECK(policy.arch().input_dim == 5);
        CHECK(policy.one_hot_states() == 5);
        // log-prob agrees with the underlying network on the encoded input.
        const Action a = Action::discrete(1);
        CHECK(policy.action_log_prob({3.0}, a) ==
              doctest::Approx(log_prob(policy.arch(), policy.params(),
                                       encode_observation({3.0}, 5), a))
                  .epsilon(1e-14));
    }
    SUBCASE("mismatched head is rejected") {
        const MlpArch arch{2, {4}, 3, HeadType::gaussian};
        Rng init(7);
        const Eigen::VectorXd theta = init_params(arch, init);
        CHECK_THROWS_AS(MlpPolicy(arch, theta, ActionSpace::make_discrete(3), 0),
                        std::invalid_argument);
    }
}

TEST_CASE("thor: collect_batch ids and determinism") {
    Rng mdp_rng(11);
    const TabularMdp mdp = random_mdp(4, 2, 0.9, mdp_rng);
    TabularEnv env(mdp, 15, {});
    const TabularPolicy policy = TabularPolicy::uniform(4, 2);
    const Rng root(42);

    const std::vector<Trajectory> batch = collect_batch(env, policy, 5, root, 30);
    REQUIRE(batch.size() == 5);
    for (int e = 0; e < 5; ++e) {
        CHECK(batch[static_cast<std::size_t>(e)].episode_id == 30 + e);
        CHECK(batch[static_cast<std::size_t>(e)].length() == 15);
    }

    SUBCASE("bitwise replay under the same root and ids") {
        const std::vector<Trajectory> again = collect_batch(env, policy, 5, root, 30);
        for (std::size_t e = 0; e < 5; ++e) {
            REQUIRE(again[e].records.size() == batch[e].records.size());
            for (std::size_t t = 0; t < batch[e].records.size(); ++t) {
                CHECK(again[e].records[t].state == batch[e].records[t].state);
                CHECK(again[e].records[t].action.index == batch[e].records[t].action.index);
                CHECK(again[e].records[t].cost == batch[e].records[t].cost);
            }
        }
    }
    SUBCASE("different id ranges draw different episodes") {
        const std::vector<Trajectory> shifted = collect_batch(env, policy, 5, root, 500);
        bool any_difference = false;
        for (std::size_t e = 0; e < 5 && !any_difference; ++e)
            for (std::size_t t = 0; t < batch[e].records.size(); ++t)
                if (shifted[e].records[t].state != batch[e].records[t].state ||
                    shifted[e].records[t].action.index != batch[e].records[t].action.index) {
                    any_difference = true;
                    break;
                }
        CHECK(any_difference);
    }
}

TEST_CASE("thor: truncated advantage contracts") {
    const std::vector<double> c = {1.0, -0.5, 2.0};
    const LinearCritic critic(0.3, -0.1);
    const double gamma = 0.9;

    SUBCASE("k=1 is the one-step TD error for any lambda") {
        for (const double lambda : {0.0, 0.5, 1.0}) {
            const auto batch = hand_batch(c, false);
            const AdvantageBatch adv = truncated_advantages(batch, critic.arch, critic.params, 0,
                                                            gamma, lambda, 1, false);
            for (int t = 0; t < 3; ++t) {
                const double delta = c[static_cast<std::size_t>(t)] +
                                     gamma * critic.at(t + 1.0) - critic.at(t);
                CHECK(adv.advantages(t) == doctest::Approx(delta).epsilon(1e-12));
            }
        }
    }
    SUBCASE("lambda=0 collapses any window to the one-step TD error") {
        const auto batch = hand_batch(c, false);
        const AdvantageBatch k3 = truncated_advantages(batch, critic.arch, critic.params, 0,
                                                       gamma, 0.0, 3, false);
        const AdvantageBatch k1 = truncated_advantages(batch, critic.arch, critic.params, 0,
                                                       gamma, 0.7, 1, false);
        CHECK((k3.advantages - k1.advantages).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("terminal records drop the bootstrap") {
        const auto batch = hand_batch(c, true);
        const AdvantageBatch adv = truncated_advantages(batch, critic.arch, critic.params, 0,
                                                        gamma, 0.5, 1, false);
        CHECK(adv.advantages(2) == doctest::Approx(c[2] - critic.at(2.0)).epsilon(1e-12));
    }
    SUBCASE("unbounded window with lambda=1 and a zero critic is the shaped return-to-go") {
        const LinearCritic zero(0.0, 0.0);
        const auto batch = hand_batch(c, false);
        const AdvantageBatch adv = truncated_advantages(batch, zero.arch, zero.params, 0, gamma,
                                                        1.0, kInfiniteK, false);
        for (int t = 0; t < 3; ++t) {
            double rtg = 0.0;
            for (int u = 2; u >= t; --u) rtg = c[static_cast<std::size_t>(u)] + gamma * rtg;
            CHECK(adv.advantages(t) == doctest::Approx(rtg).epsilon(1e-12));
        }
    }
    SUBCASE("general window matches a direct double loop") {
        const std::vector<double> costs = {0.3, -1.0, 0.8, 0.2, -0.4};
        const auto batch = hand_batch(costs, false);
        const double lambda = 0.8;
        const int k = 3;
        const AdvantageBatch adv = truncated_advantages(batch, critic.arch, critic.params, 0,
                                                        gamma, lambda, k, false);
        const int len = 5;
        for (int t = 0; t < len; ++t) {
            double want = 0.0;
            for (int i = 0; i < std::min(k, len - t); ++i) {
                const int u = t + i;
                const double delta = costs[static_cast<std::size_t>(u)] +
                                     gamma * critic.at(u + 1.0) - critic.at(u);
                want += std::pow(gamma * lambda, i) * delta;
            }
            CHECK(adv.advantages(t) == doctest::Approx(want).epsilon(1e-11));
        }
    }
    SUBCASE("value targets add the critic back onto the raw advantage") {
        const auto batch = hand_batch(c, false);
        const AdvantageBatch adv = truncated_advantages(batch, critic.arch, critic.params, 0,
                                                        gamma, 0.9, 2, true);
        for (int t = 0; t < 3; ++t)
            CHECK(adv.value_targets(t) ==
                  doctest::Approx(adv.raw_advantages(t) + critic.at(static_cast<double>(t)))
                      .epsilon(1e-12));
    }
    SUBCASE("normalization and its reported statistics") {
        const std::vector<double> costs = {2.0, -1.0, 0.5, 3.0, -2.5, 1.5};
        const auto batch = hand_batch(costs, false);
        const AdvantageBatch adv = truncated_advantages(batch, critic.arch, critic.params, 0,
                                                        gamma, 0.95, 2, true);
        const int n = 6;
        double mean = 0.0;
        for (int t = 0; t < n; ++t) mean += adv.raw_advantages(t);
        mean /= n;
        double var = 0.0;
        for (int t = 0; t < n; ++t) var += std::pow(adv.raw_advantages(t) - mean, 2);
        var /= n;
        CHECK(adv.mean == doctest::Approx(mean).epsilon(1e-12));
        CHECK(adv.stddev == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
        for (int t = 0; t < n; ++t)
            CHECK(adv.advantages(t) ==
                  doctest::Approx((adv.raw_advantages(t) - mean) / adv.stddev).epsilon(1e-10));
    }
    SUBCASE("records missing shaped costs are rejected") {
        auto batch = hand_batch(c, false);
        batch[0].records[1].shaped_cost.reset();
        CHECK_THROWS_AS(
            truncated_advantages(batch, critic.arch, critic.params, 0, gamma, 0.9, 2, false),
            std::invalid_argument);
    }
}

TEST_CASE("thor: per-record gradient regroups into the truncated sum form") {
    // With lambda = 1 and a zero critic, sum_t A_t grad log pi_t rearranges
    // into sum_u c'_u sum_{j=0}^{min(k-1, u-1)} gamma^j grad log pi_{u-j}.
    Rng rng(13);
    const MlpArch arch{1, {4}, 2, HeadType::categorical};
    const Eigen::VectorXd theta = init_params(arch, rng);
    const LinearCritic zero(0.0, 0.0);
    const std::vector<double> costs = {0.7, -0.3, 1.1, 0.4};
    const auto batch = hand_batch(costs, false);
    const double gamma = 0.9;
    const int k = 2;

    const AdvantageBatch adv =
        truncated_advantages(batch, zero.arch, zero.params, 0, gamma, 1.0, k, false);
    const Eigen::VectorXd fused = thor_gradient(batch, adv, arch, theta, 0);

    const int len = 4;
    std::vector<Eigen::VectorXd> scores;
    for (int t = 0; t < len; ++t)
        scores.push_back(log_prob_grad(arch, theta, batch[0].records[static_cast<std::size_t>(t)].state,
                                       batch[0].records[static_cast<std::size_t>(t)].action));
    Eigen::VectorXd regrouped = Eigen::VectorXd::Zero(theta.size());
    for (int u = 0; u < len; ++u) {
        Eigen::VectorXd inner = Eigen::VectorXd::Zero(theta.size());
        for (int j = 0; j <= std::min(k - 1, u); ++j)
            inner += std::pow(gamma, j) * scores[static_cast<std::size_t>(u - j)];
        regrouped += costs[static_cast<std::size_t>(u)] * inner;
    }
    regrouped /= static_cast<double>(len);
    CHECK((fused - regrouped).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("thor: unbounded shaped advantages carry the potential boundary terms") {
    const FunctionPotential phi([](const std::vector<double>& s) { return 0.4 * s[0] * s[0] - 1.0; },
                                PotentialSource::custom);
    const double gamma = 0.8;
    auto batch = hand_batch({0.0, 0.0, 0.0, 0.0}, false);
    // Overwrite raw costs with something nontrivial, then reshape.
    const std::vector<double> raw = {1.0, 0.5, -0.25, 2.0};
    for (int t = 0; t < 4; ++t) {
        batch[0].records[static_cast<std::size_t>(t)].cost = raw[static_cast<std::size_t>(t)];
        batch[0].records[static_cast<std::size_t>(t)].shaped_cost.reset();
    }
    reshape_trajectory(batch[0], phi, gamma);

    const LinearCritic zero(0.0, 0.0);
    const AdvantageBatch adv =
        truncated_advantages(batch, zero.arch, zero.params, 0, gamma, 1.0, kInfiniteK, false);

    for (int t = 0; t < 4; ++t) {
        double rtg = 0.0;
        for (int u = 3; u >= t; --u) rtg = raw[static_cast<std::size_t>(u)] + gamma * rtg;
        const double tail = std::pow(gamma, 4 - t) * phi.evaluate({4.0});
        const double want = rtg + tail - phi.evaluate({static_cast<double>(t)});
        CHECK(adv.advantages(t) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("thor: zero advantages give a zero gradient") {
    Rng rng(17);
    const MlpArch arch{1, {4}, 2, HeadType::categorical};
    const Eigen::VectorXd theta = init_params(arch, rng);
    const LinearCritic zero(0.0, 0.0);
    const auto batch = hand_batch({0.0, 0.0, 0.0}, false);
    const AdvantageBatch adv =
        truncated_advantages(batch, zero.arch, zero.params, 0, 0.9, 1.0, 2, false);
    const Eigen::VectorXd grad = thor_gradient(batch, adv, arch, theta, 0);
    CHECK(grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("thor: k=1 with a zero critic reduces exactly to AggreVaTeD") {
    const auto env = make_env("mountain_car", 50);
    const FunctionPotential phi(
        [](const std::vector<double>& s) { return 0.3 * s[0] - 2.0 * s[1] + 0.5; },
        PotentialSource::custom);
    const double gamma = 0.99;
    const MlpArch critic_arch{2, {8, 8}, 1, HeadType::scalar};
    const Eigen::VectorXd critic_zero = Eigen::VectorXd::Zero(critic_arch.param_count());

    for (const unsigned long long seed : {1ULL, 2ULL, 3ULL}) {
        Rng init(seed);
        const MlpPolicy policy = MlpPolicy::for_env(*env, 8, 0, init);
        std::vector<Trajectory> batch = collect_batch(*env, policy, 3, Rng(seed + 100), 0);
        for (Trajectory& traj : batch) reshape_trajectory(traj, phi, gamma);

        const AdvantageBatch adv = truncated_advantages(batch, critic_arch, critic_zero, 0, gamma,
                                                        0.97, 1, false);
        const Eigen::VectorXd via_thor =
            thor_gradient(batch, adv, policy.arch(), policy.params(), 0);
        const Eigen::VectorXd via_aggrevated =
            aggrevated_gradient(batch, policy.arch(), policy.params(), phi, gamma, 0);
        CHECK((via_thor - via_aggrevated).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("thor: conjugate_gradient solves SPD systems") {
    Rng rng(19);
    const int n = 8;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    const Eigen::MatrixXd a = m.transpose() * m + Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = rng.uniform(-2.0, 2.0);

    const auto apply = [&](const Eigen::VectorXd& v) { return (a * v).eval(); };
    const Eigen::VectorXd solved = conjugate_gradient(apply, b, 50, 1e-12);
    const Eigen::VectorXd direct = a.ldlt().solve(b);
    CHECK((solved - direct).cwiseAbs().maxCoeff() < 1e-8);

    const Eigen::VectorXd zero = conjugate_gradient(apply, Eigen::VectorXd::Zero(n), 50, 1e-12);
    CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("thor: kl_constrained_update honors the trust region") {
    const auto env = make_env("mountain_car", 40);
    Rng init(23);
    const MlpPolicy policy = MlpPolicy::for_env(*env, 8, 0, init);
    const std::vector<Trajectory> batch = collect_batch(*env, policy, 4, Rng(77), 0);
    const FlatBatch flat = flatten_batch(batch, 0, policy.arch().head);

    ThorConfig config;
    config.kl_step = 0.01;
    Rng update_rng(31);

    SUBCASE("zero gradient leaves the parameters in place") {
        const UpdateResult result = kl_constrained_update(
            policy.arch(), policy.params(), Eigen::VectorXd::Zero(policy.params().size()),
            flat.inputs, flat.actions, Eigen::VectorXd::Zero(flat.size()), config, update_rng);
        CHECK((result.params - policy.params()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(result.kl == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("a real gradient moves within the KL budget") {
        std::vector<Trajectory> shaped = batch;
        const FunctionPotential phi([](const std::vector<double>& s) { return s[0]; },
                                    PotentialSource::custom);
        for (Trajectory& traj : shaped) reshape_trajectory(traj, phi, 0.99);
        const MlpArch critic_arch{2, {8, 8}, 1, HeadType::scalar};
        const AdvantageBatch adv = truncated_advantages(
            shaped, critic_arch, Eigen::VectorXd::Zero(critic_arch.param_count()), 0, 0.99, 0.97,
            10, true);
        const Eigen::VectorXd gradient =
            thor_gradient(shaped, adv, policy.arch(), policy.params(), 0);
        REQUIRE(gradient.cwiseAbs().maxCoeff() > 0.0);

        const UpdateResult result =
            kl_constrained_update(policy.arch(), policy.params(), gradient, flat.inputs,
                                  flat.actions, adv.advantages, config, update_rng);
        CHECK(result.params.allFinite());
        CHECK((result.params - policy.params()).cwiseAbs().maxCoeff() > 0.0);
        CHECK(result.kl <= config.kl_step + 1e-6);
        CHECK((result.accepted || result.fallback));
    }
}

TEST_CASE("thor: training loop bookkeeping on a tabular env") {
    Rng mdp_rng(29);
    const TabularMdp mdp = random_mdp(5, 2, 0.95, mdp_rng);
    TabularEnv env(mdp, 20, {});
    ThorConfig config;
    config.k = kInfiniteK;
    config.discount = 0.95;
    config.batch_episodes = 4;
    config.iterations = 3;
    config.hidden_width = 8;
    config.one_hot_states = 5;
    config.fvp_subsample = 64;
    config.seed = 1;

    const ZeroPotential phi;
    const TrainResult result = thor_train(env, phi, config);

    REQUIRE(result.curve.size() == 3);
    for (int i = 0; i < 3; ++i) {
        const IterationRecord& rec = result.curve[static_cast<std::size_t>(i)];
        CHECK(rec.iteration == i + 1);
        CHECK(rec.env_steps == 80 * (i + 1)); // 4 episodes x 20 steps, no terminals
        CHECK(std::isfinite(rec.mean_return));
        CHECK(rec.mean_return <= 0.0); // costs are nonnegative
        CHECK(std::isfinite(rec.shaped_return));
        CHECK(std::isfinite(rec.kl));
        CHECK(std::isfinite(rec.critic_loss));
        CHECK(rec.goal_rate == 0.0); // horizon truncation is not task success
    }
    CHECK(result.policy_arch.input_dim == 5);
    CHECK(result.policy_params.allFinite());
    CHECK(result.critic_params.allFinite());

    SUBCASE("unshaped training leaves shaped and raw returns identical") {
        for (const IterationRecord& rec : result.curve)
            CHECK(rec.shaped_return == doctest::Approx(rec.mean_return).epsilon(1e-9));
    }
}

TEST_CASE("thor: goal_rate counts terminal episodes") {
    const TabularMdp mdp = goal_chain();
    TabularEnv env(mdp, 10, {2});
    ThorConfig config;
    config.k = 1;
    config.discount = 0.9;
    config.batch_episodes = 6;
    config.iterations = 2;
    config.hidden_width = 4;
    config.critic_epochs = 0;
    config.one_hot_states = 3;
    config.fvp_subsample = 32;
    config.seed = 2;

    const ZeroPotential phi;
    const TrainResult result = thor_train(env, phi, config);
    // Every episode reaches the absorbing goal state within two steps.
    for (const IterationRecord& rec : result.curve) CHECK(rec.goal_rate == 1.0);
}

TEST_CASE("thor: shorter runs are bitwise prefixes of longer ones") {
    Rng mdp_rng(31);
    const TabularMdp mdp = random_mdp(4, 2, 0.9, mdp_rng);
    TabularEnv env(mdp, 12, {});
    ThorConfig config;
    config.k = 2;
    config.discount = 0.9;
    config.batch_episodes = 3;
    config.hidden_width = 4;
    config.one_hot_states = 4;
    config.fvp_subsample = 32;
    config.seed = 11;

    const ZeroPotential phi;
    config.iterations = 2;
    const TrainResult short_run = thor_train(env, phi, config);
    config.iterations = 4;
    const TrainResult long_run = thor_train(env, phi, config);

    REQUIRE(long_run.curve.size() == 4);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(short_run.curve[i].mean_return == long_run.curve[i].mean_return);
        CHECK(short_run.curve[i].shaped_return == long_run.curve[i].shaped_return);
        CHECK(short_run.curve[i].kl == long_run.curve[i].kl);
        CHECK(short_run.curve[i].critic_loss == long_run.curve[i].critic_loss);
        CHECK(short_run.curve[i].env_steps == long_run.curve[i].env_steps);
    }
}

TEST_CASE("thor: k=1 with the exact optimal potential trains to near-optimal play") {
    Rng mdp_rng(37);
    const TabularMdp mdp = random_mdp(5, 3, 0.95, mdp_rng);
    TabularEnv env(mdp, 20, {});
    const OptimalValues opt = value_iteration(mdp);
    const TablePotential phi(opt.values.v, PotentialSource::exact_optimal);

    ThorConfig config;
    config.k = 1;
    config.discount = 0.95;
    config.kl_step = 0.05;
    config.batch_episodes = 8;
    config.iterations = 200;
    config.hidden_width = 8;
    config.critic_epochs = 0;
    config.one_hot_states = 5;
    config.fvp_subsample = 128;
    config.seed = 3;

    const TrainResult result = thor_train(env, phi, config);

    // Read the trained policy back out as a tabular policy.
    std::vector<std::vector<double>> probs(5, std::vector<double>(3));
    for (int s = 0; s < 5; ++s) {
        const ActionDistribution dist = policy_forward(
            result.policy_arch, result.policy_params,
            encode_observation({static_cast<double>(s)}, 5));
        for (int a = 0; a < 3; ++a) probs[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] =
            dist.probs(a);
    }
    const TabularPolicy learned(probs);
    const double j_learned = expected_cost(mdp, learned);
    const double j_optimal = expected_cost(mdp, opt.values);
    CHECK(j_learned - j_optimal >= -1e-9);
    CHECK(j_learned - j_optimal <= 1e-2);
}
