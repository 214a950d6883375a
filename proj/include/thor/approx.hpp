#ifndef THOR_APPROX_HPP
#define THOR_APPROX_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "thor/env.hpp"
#include "thor/rng.hpp"

namespace thor {

enum class HeadType { categorical, gaussian, scalar };

/// Fully-connected tanh network. hidden may be empty (a pure linear map).
/// Heads: categorical (output = logits over output_dim actions), gaussian
/// (output = mean of a diagonal Gaussian; log-stds are state-independent
/// trailing parameters, clamped to [-5, 2]), scalar (output_dim must be 1).
struct MlpArch {
    int input_dim = 0;
    std::vector<int> hidden;
    int output_dim = 0;
    HeadType head = HeadType::scalar;

    int param_count() const;
    bool operator==(const MlpArch&) const = default;
};

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;
constexpr double kLogStdInit = -0.5;

/// Orthogonal weight init (QR of a Gaussian draw), zero biases, final linear
/// layer scaled by 0.01 so initial policies are near-uniform / near-zero,
/// Gaussian log-stds at kLogStdInit.
Eigen::VectorXd init_params(const MlpArch& arch, Rng& rng);

/// Activations retained by a batched forward pass for reuse by the backward
/// and tangent passes. inputs[l] is the input to linear layer l (columns are
/// samples); out holds the final linear outputs.
struct BatchTrace {
    std::vector<Eigen::MatrixXd> inputs;
    Eigen::MatrixXd out;
};

/// Batched network evaluation; columns of x are samples. Returns the final
/// linear outputs (output_dim x n).
Eigen::MatrixXd mlp_forward(const MlpArch& arch, const Eigen::VectorXd& theta,
                            const Eigen::MatrixXd& x, BatchTrace* trace = nullptr);

/// Reverse-mode pass: gradient of sum_i <out_cotangent.col(i), out_i> with
/// respect to theta. Gaussian log-std entries are left zero (the head owns
/// them).
Eigen::VectorXd mlp_backward(const MlpArch& arch, const Eigen::VectorXd& theta,
                             const BatchTrace& trace, const Eigen::MatrixXd& out_cotangent);

/// Forward-mode pass: directional derivative of the outputs along a
/// parameter tangent v (again excluding Gaussian log-std entries).
Eigen::MatrixXd mlp_tangent(const MlpArch& arch, const Eigen::VectorXd& theta,
                            const BatchTrace& trace, const Eigen::VectorXd& v);

/// Distribution parameters for one observation.
struct ActionDistribution {
    HeadType head = HeadType::categorical;
    Eigen::VectorXd probs;   // categorical
    Eigen::VectorXd mean;    // gaussian
    Eigen::VectorXd log_std; // gaussian, clamped
};

/// Distribution parameters for a batch (columns are samples).
struct DistBatch {
    HeadType head = HeadType::categorical;
    Eigen::MatrixXd log_probs; // categorical: log softmax, A x n
    Eigen::MatrixXd mean;      // gaussian: D x n
    Eigen::VectorXd log_std;   // gaussian: D, clamped
    int size() const;
};

/// Actions of a batch in columnar form (idx for discrete, box for
/// continuous).
struct ActionBatch {
    Eigen::VectorXi idx;
    Eigen::MatrixXd box; // D x n
    static ActionBatch from(const std::vector<Action>& actions, HeadType head);
};

ActionDistribution policy_forward(const MlpArch& arch, const Eigen::VectorXd& theta,
                                  const std::vector<double>& obs);
DistBatch policy_forward_batch(const MlpArch& arch, const Eigen::VectorXd& theta,
                               const Eigen::MatrixXd& x, BatchTrace* trace = nullptr);

Action sample_action(const ActionDistribution& dist, Rng& rng);

/// Exact log mass / log density. A discrete action whose probability
/// underflowed to zero yields -infinity (with a one-time warning on stderr).
double log_prob(const MlpArch& arch, const Eigen::VectorXd& theta, const std::vector<double>& obs,
                const Action& action);
Eigen::VectorXd log_prob_batch(const DistBatch& dist, const ActionBatch& actions);

/// Exact gradient of log_prob with respect to theta (reverse mode).
Eigen::VectorXd log_prob_grad(const MlpArch& arch, const Eigen::VectorXd& theta,
                              const std::vector<double>& obs, const Action& action);

/// sum_i weights(i) * grad_theta log pi(a_i | s_i), one fused backward pass.
Eigen::VectorXd weighted_score_sum(const MlpArch& arch, const Eigen::VectorXd& theta,
                                   const Eigen::MatrixXd& x, const ActionBatch& actions,
                                   const Eigen::VectorXd& weights);

/// Mean KL(old || new) over the batch, in closed form per head.
double kl_mean(const DistBatch& old_dist, const DistBatch& new_dist);

/// Gauss-Newton Fisher-vector product averaged over the batch whose forward
/// pass produced trace and dist, plus damping * v. Exact at the
/// linearization point theta, where the Gauss-Newton product equals the KL
/// Hessian product.
Eigen::VectorXd fisher_vector_product(const MlpArch& arch, const Eigen::VectorXd& theta,
                                      const BatchTrace& trace, const DistBatch& dist,
                                      const Eigen::VectorXd& v, double damping);

double critic_value(const MlpArch& arch, const Eigen::VectorXd& theta,
                    const std::vector<double>& obs);
Eigen::VectorXd critic_value_batch(const MlpArch& arch, const Eigen::VectorXd& theta,
                                   const Eigen::MatrixXd& x);
Eigen::VectorXd critic_grad(const MlpArch& arch, const Eigen::VectorXd& theta,
                            const std::vector<double>& obs);

struct FitReport {
    std::vector<double> epoch_mse;
    int best_epoch = 0;
};

/// Full-batch Adam regression of a scalar-head network onto targets. The
/// parameters returned are the best seen, so the achieved MSE never exceeds
/// the starting MSE. Throws std::runtime_error with diagnostics if the loss
/// diverges or turns non-finite.
FitReport critic_fit(const MlpArch& arch, Eigen::VectorXd& theta, const Eigen::MatrixXd& x,
                     const Eigen::VectorXd& targets, int epochs, double lr);

/// Parameter files: a one-line architecture header followed by one parameter
/// per line at 17 significant digits.
void save_params(const std::string& path, const MlpArch& arch, const Eigen::VectorXd& theta);
std::pair<MlpArch, Eigen::VectorXd> load_params(const std::string& path);

/// One-line textual form of an architecture (the parameter-file header).
std::string arch_to_string(const MlpArch& arch);
MlpArch arch_from_string(const std::string& line);

} // namespace thor

#endif
