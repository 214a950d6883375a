#ifndef THOR_ORACLE_HPP
#define THOR_ORACLE_HPP

#include <string>
#include <vector>

#include "thor/approx.hpp"
#include "thor/env.hpp"
#include "thor/shaping.hpp"

namespace thor {

/// Demonstration episodes plus provenance, the input to oracle fitting.
struct DemoSet {
    std::vector<Trajectory> trajectories;
    std::string env_name;
    std::string expert_descriptor;

    int state_dim() const;
    void validate() const; // non-empty, consistent dimensions and action kinds
};

struct OracleFitReport {
    std::vector<double> train_epoch_loss; // mean squared TD error per epoch
    std::vector<double> validation_epoch_loss;
    int epochs_run = 0;
    bool early_stopped = false;
    int best_epoch = -1;
};

/// Cost-to-go estimate, usable directly as a shaping potential. Backed by a
/// per-state table (integer-index observations) or by a scalar network. A
/// network backing may carry a per-dimension input standardizer
/// (z = (x - shift) / scale) fitted from the demo states; evaluate applies
/// it internally.
class ValueOracle : public Potential {
  public:
    static ValueOracle tabular(std::vector<double> values, PotentialSource source);
    static ValueOracle network(MlpArch arch, Eigen::VectorXd params, PotentialSource source,
                               Eigen::VectorXd input_shift = {},
                               Eigen::VectorXd input_scale = {});

    double evaluate(const std::vector<double>& state) const override;
    PotentialSource source() const override { return source_; }

    bool is_tabular() const { return is_tabular_; }
    const std::vector<double>& table() const;
    const MlpArch& arch() const;
    const Eigen::VectorXd& params() const;
    /// Standardizer vectors; empty when the inputs are fed through raw.
    const Eigen::VectorXd& input_shift() const;
    const Eigen::VectorXd& input_scale() const;

    OracleFitReport fit_report;

  private:
    ValueOracle() = default;
    bool is_tabular_ = true;
    std::vector<double> table_;
    MlpArch arch_;
    Eigen::VectorXd params_;
    Eigen::VectorXd shift_, scale_;
    PotentialSource source_ = PotentialSource::custom;
};

struct TdOptions {
    double lambda = 0.9;
    double lr = 0.05;
    int epochs = 60;
    /// Tabular only: per-state step size 1 / (visits so far). With lambda = 1
    /// this makes the fit equal Monte-Carlo return averaging exactly.
    bool inverse_visit_lr = false;
    /// Fraction of episodes held out for early stopping; 0 disables.
    double validation_fraction = 0.1;
    int patience = 10;
    /// Network backing width (two hidden layers of this size).
    int hidden_width = 64;
};

/// TD(lambda) with accumulating eligibility traces over the demo episodes.
/// Updates are accumulated with parameters frozen inside each episode and
/// applied at episode end, so the trace-based backward view matches the
/// lambda-return forward view exactly. Backing is chosen from the data:
/// integer single-component states get a table, anything else a network
/// whose inputs are standardized to demo mean and unit variance (plain SGD
/// cannot cope with the wildly different feature scales of the physical
/// envs otherwise). Throws std::runtime_error with diagnostics if training
/// diverges.
ValueOracle fit_td(const DemoSet& demos, double discount, const TdOptions& options, Rng& rng);

struct McOptions {
    int epochs = 150;
    double lr = 1e-2;
    int hidden_width = 64;
};

/// Regression onto empirical discounted returns-to-go. Tabular backing is
/// the closed-form per-state mean of observed returns; network backing runs
/// full-batch Adam.
ValueOracle fit_mc(const DemoSet& demos, double discount, const McOptions& options, Rng& rng);

enum class PerturbMode {
    uniform,         // independent U(-epsilon, epsilon) offsets
    adversarial_sign // +epsilon on low-value states, -epsilon on high-value
};

/// Tabular oracle at exactly sup-norm distance <= epsilon from the given
/// values. The adversarial mode overshoots below-midrange states and
/// undershoots the rest, the sign pattern that flips greedy action
/// orderings where the value separation allows it.
ValueOracle perturb_oracle(const Eigen::VectorXd& values, double epsilon, PerturbMode mode,
                           Rng& rng);

/// Sup-norm error of a tabular oracle against reference values. Throws
/// std::domain_error for network backings (use oracle_error_sampled).
double oracle_error(const ValueOracle& oracle, const Eigen::VectorXd& reference);

/// Max absolute error over an explicit list of states.
double oracle_error_sampled(const ValueOracle& oracle,
                            const std::vector<std::vector<double>>& states,
                            const std::vector<double>& reference);

/// Oracle files: one header line (kind, source), then either state,value
/// lines (tabular) or an architecture line plus one parameter per line
/// (network). Floats at 17 significant digits.
void save_oracle(const std::string& path, const ValueOracle& oracle);
ValueOracle load_oracle(const std::string& path);

} // namespace thor

#endif
