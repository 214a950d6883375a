#ifndef THOR_HARNESS_HPP
#define THOR_HARNESS_HPP

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "thor/oracle.hpp"
#include "thor/thor.hpp"

namespace thor {

/// Raised for malformed or unknown configuration input; the CLI maps it to
/// exit code 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct EnvSpec {
    std::string name = "mountain_car";
    int horizon = 200;
};

/// How the shaping oracle is obtained. Demos either come from a trajectory
/// file or are generated from the scripted expert with the given seed.
struct OracleSpec {
    std::string method = "td"; // td | mc | file
    std::string oracle_file;   // method = file
    std::string demo_file;     // optional pre-made demos for td / mc
    int demo_episodes = 50;
    double expert_degrade = 0.4;
    std::uint64_t demo_seed = 99;
    std::uint64_t fit_seed = 5;
    TdOptions td;
    McOptions mc;
};

/// One (method, k) arm of an experiment. Methods:
///   thor       shaped costs, learned critic, one arm per requested k
///   aggrevated shaped costs, k = 1, critic disabled (the oracle is the only
///              value estimate)
///   trpo_gae   unshaped costs, learned critic, k = infinite
struct MethodArm {
    std::string method;
    int k = kInfiniteK;
};

struct ExperimentSpec {
    EnvSpec env;
    OracleSpec oracle;
    std::vector<int> k_values = {10};    // one thor arm per entry
    bool aggrevated_baseline = true;     // k=1 AggreVaTeD arm
    bool unshaped_baseline = true;       // k=inf TRPO-GAE arm
    std::vector<std::uint64_t> seeds;    // default 1..25
    std::string output_dir = "runs";
    int workers = 0;                     // 0 = hardware concurrency
    ThorConfig train;                    // shared by every arm; k and seed are overwritten

    std::vector<MethodArm> arms() const;

    /// Seeds pairwise distinct, every k within [1, horizon] or the infinite
    /// sentinel, at least one arm. Throws ConfigError.
    void validate() const;
};

/// Flat `key = value` config text with [env], [oracle], [thor], [approx]
/// sections. Blank lines and lines starting with # are skipped. Unknown
/// sections or keys are rejected (ConfigError), as are malformed values.
/// Booleans accept true/false, k lists are comma-separated integers or inf,
/// seed lists are comma-separated integers or lo..hi ranges.
ExperimentSpec parse_config(const std::string& text);
ExperimentSpec load_config(const std::string& path);

/// The default seed list, 1..25.
std::vector<std::uint64_t> default_seeds();

/// Expert demonstration episodes: episode e is rolled out with the stream
/// root(seed).spawn(e) and tagged with episode id e.
DemoSet make_demos(const EnvSpec& env, int episodes, double degrade_prob, std::uint64_t seed);

/// Builds the shaping oracle per spec: loads it from a file, or fits it at
/// the given discount to the demo set (loaded from demo_file when given,
/// generated otherwise).
ValueOracle build_oracle(const EnvSpec& env, const OracleSpec& spec, double discount);

/// One completed (or failed) training run.
struct RunSeries {
    std::string method;
    int k = kInfiniteK;
    std::uint64_t seed = 0;
    std::vector<IterationRecord> curve; // empty when failed
    bool failed = false;
    std::string error;
};

struct AggregatePoint {
    int iteration = 0;
    double mean = 0.0;
    double std = 0.0; // population std over seeds
    int n = 0;        // effective seed count (failed runs drop out)
};

struct AggregateSeries {
    std::string method;
    int k = kInfiniteK;
    std::vector<AggregatePoint> points;
};

struct LearningCurveSet {
    std::vector<RunSeries> runs;            // sorted by (method, k, seed)
    std::vector<AggregateSeries> aggregates; // sorted by (method, k)
    std::vector<std::string> failures;       // one line per failed run
};

/// The k column renders the infinite sentinel as "inf".
std::string k_to_string(int k);
int k_from_string(const std::string& text);

/// Runs every (arm, seed) pair across a worker pool, writing one raw CSV per
/// run plus a single aggregate CSV in spec.output_dir:
///   raw:       method,k,seed,iteration,env_steps,mean_return,shaped_return,kl,critic_loss
///   aggregate: method,k,iteration,mean,std,n
/// Returns includes failed runs; callers decide the exit status from
/// failures. The oracle is fitted once and shared read-only by every run.
LearningCurveSet run_experiment(const ExperimentSpec& spec);

/// Executes one arm's single-seed training run in isolation (the `train`
/// subcommand path). Returns the series; does not write files.
RunSeries run_single(const ExperimentSpec& spec, const MethodArm& arm, std::uint64_t seed,
                     const Potential& phi);

/// Raw-CSV text of one run, header included, floats at 17 significant
/// digits. Byte-stable across reruns of the same config.
std::string run_csv(const RunSeries& run);

/// Aggregate-CSV text over all runs, rows sorted by (method, k, iteration).
std::string aggregate_csv(const std::vector<AggregateSeries>& aggregates);

/// Recomputes aggregates from the raw runs (mean, population std, effective
/// n per iteration over non-failed seeds).
std::vector<AggregateSeries> aggregate_runs(const std::vector<RunSeries>& runs);

/// Parses files written by run_experiment.
RunSeries load_run_csv(const std::string& path);
std::vector<AggregateSeries> load_aggregate_csv(const std::string& path);

struct MethodSummary {
    std::string method;
    int k = kInfiniteK;
    double final_mean_reward = 0.0;
    /// First iteration (1-based) whose aggregate mean reward is at least the
    /// threshold; empty when the curve never reaches it.
    std::optional<int> iterations_to_threshold;
    double auc = 0.0; // trapezoidal area under the aggregate mean curve
};

/// Per-method report over aggregate curves.
std::vector<MethodSummary> summarize(const std::vector<AggregateSeries>& aggregates,
                                     double threshold);

/// Text table of a summary report.
std::string render_summary(const std::vector<MethodSummary>& summaries, double threshold);

} // namespace thor

#endif
