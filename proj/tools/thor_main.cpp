#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "thor/envs.hpp"
#include "thor/exact_dp.hpp"
#include "thor/harness.hpp"
#include "thor/trajectory_io.hpp"

namespace {

using namespace thor;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRunFailure = 3;

int cmd_verify_theorems(int depth, double delta, int mdps, std::uint64_t seed) {
    bool all_hold = true;

    std::printf("lower bound (misleading oracle on the two-lane chain, depth %d, delta %g)\n",
                depth, delta);
    std::printf("%8s %14s %14s %8s\n", "discount", "gap_observed", "gap_predicted", "holds");
    for (double discount : {0.5, 0.9, 0.99}) {
        const BoundReport rep = verify_lower_bound(discount, delta, depth);
        std::printf("%8g %14.8f %14.8f %8s\n", discount, rep.gap_observed, rep.bound_value,
                    rep.holds ? "yes" : "NO");
        if (!rep.holds) {
            all_hold = false;
            std::fprintf(stderr, "%s\n", rep.violation_dump.c_str());
        }
    }

    std::printf("\nupper bound (k-step lookahead vs perturbed oracles, %d random MDPs)\n", mdps);
    std::printf("%8s %8s %4s %14s %14s %8s\n", "discount", "epsilon", "k", "worst_gap", "bound",
                "holds");
    Rng rng(seed);
    for (double discount : {0.9}) {
        for (double epsilon : {0.1, 0.2, 0.5}) {
            for (int k : {1, 2, 5, 10}) {
                double worst_gap = 0.0;
                double bound = 0.0;
                bool holds = true;
                std::string dump;
                for (int m = 0; m < mdps; ++m) {
                    Rng mdp_rng = rng.spawn(static_cast<std::uint64_t>(m));
                    const TabularMdp mdp = random_mdp(8, 3, discount, mdp_rng);
                    Rng trial_rng = rng.spawn(1000 + static_cast<std::uint64_t>(m));
                    const BoundReport rep = verify_upper_bound(mdp, epsilon, k, 5, trial_rng);
                    worst_gap = std::max(worst_gap, rep.gap_observed);
                    bound = rep.bound_value;
                    if (!rep.holds) {
                        holds = false;
                        dump = rep.violation_dump;
                    }
                }
                std::printf("%8g %8g %4d %14.8f %14.8f %8s\n", discount, epsilon, k, worst_gap,
                            bound, holds ? "yes" : "NO");
                if (!holds) {
                    all_hold = false;
                    std::fprintf(stderr, "%s\n", dump.c_str());
                }
            }
        }
    }

    std::printf("\nchain counterexample, k=1 vs k=2 lookahead (depth %d)\n", depth);
    for (double discount : {0.9}) {
        const AdversarialChain chain = adversarial_chain(depth, discount, delta);
        const OptimalValues opt = value_iteration(chain.mdp);
        const Eigen::VectorXd oracle = chain.misleading_oracle();
        const double j_opt = expected_cost(chain.mdp, opt.value);
        const double j_k1 =
            expected_cost(chain.mdp, policy_evaluation(chain.mdp, lookahead_policy(chain.mdp, oracle, 1)));
        const double j_k2 =
            expected_cost(chain.mdp, policy_evaluation(chain.mdp, lookahead_policy(chain.mdp, oracle, 2)));
        std::printf("  discount %g: gap(k=1) = %.8f, gap(k=2) = %.8f\n", discount, j_k1 - j_opt,
                    j_k2 - j_opt);
    }

    return all_hold ? kExitOk : kExitRunFailure;
}

int cmd_make_demos(const std::string& env_name, int horizon, int episodes, double degrade,
                   std::uint64_t seed, const std::string& out) {
    const DemoSet demos = make_demos({env_name, horizon}, episodes, degrade, seed);
    save_trajectories(out, demos.trajectories);
    int reached = 0;
    double mean_length = 0.0;
    for (const Trajectory& traj : demos.trajectories) {
        if (!traj.truncated) ++reached;
        mean_length += traj.length();
    }
    mean_length /= static_cast<double>(demos.trajectories.size());
    std::printf("wrote %zu episodes to %s (mean length %.1f, %d terminal)\n",
                demos.trajectories.size(), out.c_str(), mean_length, reached);
    return kExitOk;
}

int cmd_learn_oracle(const std::string& config_path, const std::string& out) {
    const ExperimentSpec spec = load_config(config_path);
    const ValueOracle oracle = build_oracle(spec.env, spec.oracle, spec.train.discount);
    save_oracle(out, oracle);
    const OracleFitReport& rep = oracle.fit_report;
    if (rep.epochs_run > 0) {
        std::printf("fit %d epochs (best %d%s), final train loss %g\n", rep.epochs_run,
                    rep.best_epoch, rep.early_stopped ? ", early stop" : "",
                    rep.train_epoch_loss.empty() ? 0.0 : rep.train_epoch_loss.back());
    }
    std::printf("wrote oracle to %s\n", out.c_str());
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& method, const std::string& k_text,
              std::uint64_t seed, bool seed_given, const std::string& out,
              const std::string& params_out) {
    ExperimentSpec spec = load_config(config_path);
    MethodArm arm;
    arm.method = method;
    if (method == "thor")
        arm.k = k_text.empty() ? (spec.k_values.empty() ? 10 : spec.k_values[0])
                               : k_from_string(k_text);
    else if (method == "aggrevated")
        arm.k = 1;
    else if (method == "trpo_gae")
        arm.k = kInfiniteK;
    else
        throw ConfigError("train: unknown method '" + method + "'");
    const std::uint64_t run_seed = seed_given ? seed : (spec.seeds.empty() ? 1 : spec.seeds[0]);

    spec.k_values = {arm.method == "thor" ? arm.k : 10};
    spec.seeds = {run_seed};
    spec.validate();

    const ZeroPotential zero;
    std::optional<ValueOracle> oracle;
    if (arm.method != "trpo_gae") oracle = build_oracle(spec.env, spec.oracle, spec.train.discount);
    const Potential& phi =
        arm.method == "trpo_gae" ? static_cast<const Potential&>(zero) : *oracle;

    ThorConfig cfg = spec.train;
    cfg.k = arm.k;
    cfg.seed = run_seed;
    if (arm.method == "aggrevated") cfg.critic_epochs = 0;
    std::unique_ptr<EnvInterface> env = make_env(spec.env.name, spec.env.horizon);
    const TrainResult result = thor_train(*env, phi, cfg);

    RunSeries series;
    series.method = arm.method;
    series.k = arm.k;
    series.seed = run_seed;
    series.curve = result.curve;
    std::ofstream csv(out);
    if (!csv) throw std::runtime_error("train: cannot open " + out);
    csv << run_csv(series);
    if (!csv) throw std::runtime_error("train: write failed for " + out);
    save_params(params_out, result.policy_arch, result.policy_params);
    std::printf("%s k=%s seed=%llu: final mean return %.4f over %d iterations\n",
                arm.method.c_str(), k_to_string(arm.k).c_str(),
                static_cast<unsigned long long>(run_seed),
                result.curve.empty() ? 0.0 : result.curve.back().mean_return,
                static_cast<int>(result.curve.size()));
    std::printf("wrote %s and %s\n", out.c_str(), params_out.c_str());
    return kExitOk;
}

int cmd_run_experiment(const std::string& config_path, double threshold) {
    const ExperimentSpec spec = load_config(config_path);
    const LearningCurveSet curves = run_experiment(spec);
    std::printf("%s", render_summary(summarize(curves.aggregates, threshold), threshold).c_str());
    std::printf("%zu runs, %zu failed; outputs in %s\n", curves.runs.size(),
                curves.failures.size(), spec.output_dir.c_str());
    for (const std::string& failure : curves.failures)
        std::fprintf(stderr, "failed run: %s\n", failure.c_str());
    return curves.failures.empty() ? kExitOk : kExitRunFailure;
}

int cmd_summarize(const std::string& aggregate_path, double threshold) {
    const std::vector<AggregateSeries> aggregates = load_aggregate_csv(aggregate_path);
    std::printf("%s", render_summary(summarize(aggregates, threshold), threshold).c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Truncated-horizon policy search toolkit"};
    app.require_subcommand(1);

    auto* verify = app.add_subcommand("verify-theorems",
                                      "Check the lower/upper performance bounds numerically");
    int depth = 200;
    double delta = 0.01;
    int mdps = 20;
    std::uint64_t verify_seed = 7;
    verify->add_option("--depth", depth, "Chain depth");
    verify->add_option("--delta", delta, "Oracle error margin above one half");
    verify->add_option("--mdps", mdps, "Random MDP count for the upper bound");
    verify->add_option("--seed", verify_seed, "Random MDP seed");

    auto* demos = app.add_subcommand("make-demos", "Roll out scripted-expert demonstrations");
    std::string demo_env = "mountain_car";
    int demo_horizon = 200;
    int demo_episodes = 50;
    double demo_degrade = 0.0;
    std::uint64_t demo_seed = 99;
    std::string demo_out = "demos.csv";
    demos->add_option("--env", demo_env, "Environment name");
    demos->add_option("--horizon", demo_horizon, "Episode horizon");
    demos->add_option("--episodes", demo_episodes, "Episode count");
    demos->add_option("--degrade", demo_degrade, "Expert degradation probability");
    demos->add_option("--seed", demo_seed, "Demo stream seed");
    demos->add_option("--out", demo_out, "Output trajectory file");

    auto* oracle = app.add_subcommand("learn-oracle", "Fit the cost-to-go oracle from a config");
    std::string oracle_config;
    std::string oracle_out = "oracle.txt";
    oracle->add_option("--config", oracle_config, "Config file")->required();
    oracle->add_option("--out", oracle_out, "Output oracle file");

    auto* train = app.add_subcommand("train", "Run one training run from a config");
    std::string train_config;
    std::string train_method = "thor";
    std::string train_k;
    std::uint64_t train_seed = 0;
    std::string train_out = "run.csv";
    std::string train_params = "policy.params";
    train->add_option("--config", train_config, "Config file")->required();
    train->add_option("--method", train_method, "thor | aggrevated | trpo_gae");
    train->add_option("--k", train_k, "Truncation window (integer or inf), thor only");
    auto* seed_opt = train->add_option("--seed", train_seed, "Run seed");
    train->add_option("--out", train_out, "Per-iteration CSV path");
    train->add_option("--params", train_params, "Final policy parameter file");

    auto* experiment = app.add_subcommand("run-experiment", "Run the full multi-seed sweep");
    std::string experiment_config;
    double experiment_threshold = -190.0;
    experiment->add_option("--config", experiment_config, "Config file")->required();
    experiment->add_option("--threshold", experiment_threshold, "Summary reward threshold");

    auto* summary = app.add_subcommand("summarize", "Report on an aggregate CSV");
    std::string summary_aggregate;
    double summary_threshold = -190.0;
    summary->add_option("--aggregate", summary_aggregate, "Aggregate CSV path")->required();
    summary->add_option("--threshold", summary_threshold, "Reward threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (verify->parsed()) return cmd_verify_theorems(depth, delta, mdps, verify_seed);
        if (demos->parsed())
            return cmd_make_demos(demo_env, demo_horizon, demo_episodes, demo_degrade, demo_seed,
                                  demo_out);
        if (oracle->parsed()) return cmd_learn_oracle(oracle_config, oracle_out);
        if (train->parsed())
            return cmd_train(train_config, train_method, train_k, train_seed, seed_opt->count() > 0,
                             train_out, train_params);
        if (experiment->parsed()) return cmd_run_experiment(experiment_config, experiment_threshold);
        if (summary->parsed()) return cmd_summarize(summary_aggregate, summary_threshold);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRunFailure;
    }
    return kExitOk;
}
