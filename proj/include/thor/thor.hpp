#ifndef THOR_THOR_HPP
#define THOR_THOR_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "thor/approx.hpp"
#include "thor/env.hpp"
#include "thor/policy.hpp"
#include "thor/shaping.hpp"

namespace thor {

/// k sentinel: no truncation inside the episode (the window is whatever
/// remains of it).
inline constexpr int kInfiniteK = std::numeric_limits<int>::max();

struct ThorConfig {
    int k = kInfiniteK;             // advantage truncation window, >= 1
    double discount = 0.99;         // gamma
    double gae_lambda = 0.97;       // extra down-weighting inside the window
    double kl_step = 0.01;          // trust region radius
    int batch_episodes = 10;
    int iterations = 100;
    bool normalize_advantages = true;
    /// Entropy bonus weight. Nonzero values add beta * (1 + log pi(a|s)) to
    /// each record's advantage weight, the score-function estimate of
    /// -beta * grad entropy; sparse tasks need it to keep exploration alive.
    /// Zero (the default) leaves the plain estimator untouched.
    double entropy_coef = 0.0;
    int hidden_width = 64;          // policy and critic nets, two hidden layers
    /// Critic fitting passes per iteration. Zero disables the learned critic
    /// (parameters pinned at zero), which with k = 1 is exactly AggreVaTeD:
    /// the shaping potential is the only value estimate in the advantage.
    int critic_epochs = 5;
    double critic_lr = 1e-2;
    int cg_iterations = 20;         // hard cap 50, see kl_constrained_update
    double cg_tolerance = 1e-8;     // residual threshold relative to max(1, ||g||)
    double cg_damping = 0.1;
    int fvp_subsample = 256;        // records used to estimate the Fisher
    /// One-hot width for single-component integer observations (tabular
    /// envs); 0 feeds observations through unchanged.
    int one_hot_states = 0;
    std::uint64_t seed = 0;

    /// Sanity checks against an env horizon; throws std::invalid_argument.
    void validate(int horizon) const;
};

/// Observation encoding for the networks: pass-through, or one-hot for
/// integer index observations when one_hot_states > 0.
std::vector<double> encode_observation(const std::vector<double>& obs, int one_hot_states);

/// Network-backed stochastic policy: categorical head for discrete action
/// spaces, diagonal Gaussian for boxes. Gaussian samples are clipped to the
/// box; log probabilities are the unclipped densities at the stored values.
class MlpPolicy : public Policy {
  public:
    MlpPolicy(MlpArch arch, Eigen::VectorXd params, ActionSpace space, int one_hot_states = 0);

    /// Fresh policy sized for an env: obs dim (or one-hot width) in, two
    /// hidden layers of hidden_width, head per the env's action space.
    static MlpPolicy for_env(const EnvInterface& env, int hidden_width, int one_hot_states,
                             Rng& rng);

    Action act(const std::vector<double>& observation, Rng& rng) const override;
    double action_log_prob(const std::vector<double>& observation,
                           const Action& action) const override;
    bool deterministic() const override { return false; }

    const MlpArch& arch() const { return arch_; }
    const Eigen::VectorXd& params() const { return params_; }
    void set_params(Eigen::VectorXd params);
    int one_hot_states() const { return one_hot_; }

  private:
    MlpArch arch_;
    Eigen::VectorXd params_;
    ActionSpace space_;
    int one_hot_ = 0;
};

/// Runs batch_episodes independent episodes. Episode e draws its stream
/// from root.spawn(first_episode_id + e) and is tagged with that id, so
/// batches from different iterations never share streams.
std::vector<Trajectory> collect_batch(EnvInterface& env, const Policy& policy,
                                      int batch_episodes, const Rng& root,
                                      long first_episode_id);

/// Per-record truncated advantages over a batch of reshaped trajectories,
/// flattened in trajectory-then-time order.
///
///   delta_t = c'_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
///   A_t     = sum_{i=0}^{min(k, T-t)-1} (gamma * lambda)^i * delta_{t+i}
///
/// Value targets are A_t + V(s_t) against the same critic. Throws
/// std::invalid_argument if any record lacks a shaped cost or a successor.
struct AdvantageBatch {
    Eigen::VectorXd advantages;     // normalized when enabled
    Eigen::VectorXd raw_advantages;
    Eigen::VectorXd value_targets;
    double mean = 0.0;              // raw advantage stats
    double stddev = 0.0;
};

AdvantageBatch truncated_advantages(const std::vector<Trajectory>& trajectories,
                                    const MlpArch& critic_arch,
                                    const Eigen::VectorXd& critic_params, int one_hot_states,
                                    double discount, double gae_lambda, int k,
                                    bool normalize);

/// A batch flattened for the network ops: encoded states as columns, actions
/// in columnar form, both in trajectory-then-time order (matching
/// truncated_advantages).
struct FlatBatch {
    Eigen::MatrixXd inputs;
    ActionBatch actions;
    int size() const { return static_cast<int>(inputs.cols()); }
};

FlatBatch flatten_batch(const std::vector<Trajectory>& trajectories, int one_hot_states,
                        HeadType head);

/// Batch policy-gradient estimate: sum_records grad log pi * advantage,
/// divided by the total record count. Uses the batch's normalized
/// advantages (equal to raw when normalization was off). Throws
/// std::runtime_error on non-finite advantages.
Eigen::VectorXd thor_gradient(const std::vector<Trajectory>& trajectories,
                              const AdvantageBatch& advantages, const MlpArch& arch,
                              const Eigen::VectorXd& theta, int one_hot_states);

/// Gradient of the expected one-step disadvantage against the oracle,
/// computed straight from raw costs: each log-prob gradient is weighted by
/// c_t + gamma * phi(s_{t+1}) - phi(s_t). With k = 1 and a zero critic the
/// THOR gradient reduces to exactly this.
Eigen::VectorXd aggrevated_gradient(const std::vector<Trajectory>& trajectories,
                                    const MlpArch& arch, const Eigen::VectorXd& theta,
                                    const Potential& phi, double discount, int one_hot_states);

/// Conjugate gradient on a symmetric positive definite operator; stops at
/// max_iterations or when the residual norm falls below
/// tolerance * max(1, ||b||).
Eigen::VectorXd conjugate_gradient(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                                   const Eigen::VectorXd& b, int max_iterations, double tolerance);

struct UpdateResult {
    Eigen::VectorXd params;
    double kl = 0.0;               // measured mean KL of the returned params
    bool accepted = false;         // line search found an acceptable point
    bool fallback = false;         // plain gradient step was taken instead
};

/// KL-constrained natural gradient step (minimizing). Conjugate gradient on
/// Fisher-vector products (Fisher from a record subsample) gives the
/// direction; backtracking line search (factor 0.8, up to 10 tries) accepts
/// the first candidate improving the importance-weighted surrogate while
/// keeping mean KL within kl_step. CG runs at most min(cg_iterations, 50)
/// iterations; if the residual has not converged, or no candidate is
/// accepted, falls back to a plain gradient step with lr 1e-3 (with a
/// stderr warning for the CG case).
UpdateResult kl_constrained_update(const MlpArch& arch, const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& gradient,
                                   const Eigen::MatrixXd& inputs, const ActionBatch& actions,
                                   const Eigen::VectorXd& advantages, const ThorConfig& config,
                                   Rng& rng);

struct IterationRecord {
    int iteration = 0;       // 1-based
    long env_steps = 0;      // cumulative records collected
    double mean_return = 0.0; // mean over episodes of -(total raw cost)
    double std_return = 0.0;
    double shaped_return = 0.0; // mean over episodes of -(total shaped cost)
    /// Fraction of the batch's episodes that ended in a terminal event
    /// before the horizon (task success for the goal-reaching envs).
    double goal_rate = 0.0;
    double kl = 0.0;
    double critic_loss = 0.0;
};

struct TrainResult {
    std::vector<IterationRecord> curve;
    MlpArch policy_arch;
    Eigen::VectorXd policy_params;
    MlpArch critic_arch;
    Eigen::VectorXd critic_params;
};

/// The full training loop: collect a batch, reshape costs with the
/// potential, estimate truncated advantages with the previous critic, take
/// the KL-constrained step, then refit the critic on the truncated value
/// targets. The potential may be ZeroPotential for the unshaped baseline.
/// Demonstrations never pre-train the policy or critic. Throws
/// std::runtime_error if parameters turn non-finite.
TrainResult thor_train(EnvInterface& env, const Potential& phi, const ThorConfig& config);

} // namespace thor

#endif
