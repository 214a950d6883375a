#ifndef THOR_EXACT_DP_HPP
#define THOR_EXACT_DP_HPP

#include <string>
#include <vector>

#include "thor/mdp.hpp"
#include "thor/policy.hpp"
#include "thor/shaping.hpp"

namespace thor {

struct ValueTable {
    Eigen::VectorXd v;
    double residual = 0.0; // sup-norm of the last update
    int iterations = 0;
};

struct QTable {
    Eigen::MatrixXd q; // S x A
};

/// Optimal values by value iteration from zero, stopping when the sup-norm
/// of successive updates is at most tol. The returned Q is computed from the
/// final V, so q.rowwise().minCoeff() matches v up to the residual.
/// Iteration count is bounded by the contraction estimate
/// ceil(log(tol * (1 - discount) / max_cost) / log(discount)) + 1.
struct OptimalValues {
    ValueTable value;
    QTable q;
};
OptimalValues value_iteration(const TabularMdp& mdp, double tol = 1e-10);

/// Exact policy values by direct linear solve of (I - discount * P_pi) v =
/// c_pi. The solve residual is verified to be at most 1e-10 in sup norm.
ValueTable policy_evaluation(const TabularMdp& mdp, const TabularPolicy& policy);

/// Expected discounted cost from the initial distribution, nu . v_pi.
double expected_cost(const TabularMdp& mdp, const TabularPolicy& policy);
double expected_cost(const TabularMdp& mdp, const ValueTable& values);

/// A^pi(s, a) = Q^pi(s, a) - V^pi(s), exact.
Eigen::MatrixXd disadvantage(const TabularMdp& mdp, const TabularPolicy& policy);

/// Greedy action table from a Q table; ties break to the lowest index.
std::vector<int> greedy_actions(const QTable& q);

/// One-step greedy policy against an approximate cost-to-go:
///   pi(s) = argmin_a [ c(s, a) + discount * E[oracle(s') | s, a] ],
/// ties to the lowest action index.
TabularPolicy induced_policy(const TabularMdp& mdp, const Eigen::VectorXd& oracle_values);
TabularPolicy induced_policy(const TabularMdp& mdp, const Potential& oracle);

/// k-step lookahead policy: exact k-stage dynamic program whose terminal
/// value is the oracle, acting by the first action of the best k-step plan.
/// k = 1 reduces to induced_policy. Throws std::invalid_argument for k < 1.
TabularPolicy lookahead_policy(const TabularMdp& mdp, const Eigen::VectorXd& oracle_values, int k);
TabularPolicy lookahead_policy(const TabularMdp& mdp, const Potential& oracle, int k);

/// Exact k-step disadvantage of a policy against an oracle, for all states:
///   E_pi[ sum_{i=1..k} discount^(i-1) c_i + discount^k oracle(s_{k+1}) ] - oracle(s_1).
Eigen::VectorXd k_step_disadvantage(const TabularMdp& mdp, const Eigen::VectorXd& oracle_values,
                                    int k, const TabularPolicy& policy);

/// Two-lane chain on which a slightly wrong cost-to-go estimate flips every
/// greedy action. States 0..N are the free lane (cost 0), states
/// N+1..2N+1 the penalty lane (cost 1). From any lane at depth i < N,
/// action 0 moves to the free lane at depth i+1 and action 1 to the penalty
/// lane at depth i+1; both lanes at depth N drain into the absorbing free
/// end. Episodes start at the head of the free lane.
///
/// The misleading oracle overshoots the free lane by 0.5 + delta and
/// undershoots the penalty lane by the same amount, so one-step greedy
/// against it picks the penalty lane everywhere; its cost gap approaches
/// discount / (1 - discount) while the oracle error is only 0.5 + delta.
struct AdversarialChain {
    TabularMdp mdp;
    int depth = 0;    // N
    double delta = 0.0;
    std::vector<int> free_lane;    // state ids, head..end
    std::vector<int> penalty_lane; // state ids, head..end

    Eigen::VectorXd misleading_oracle() const;
};
AdversarialChain adversarial_chain(int depth, double discount, double delta);

/// Outcome of checking one performance-bound statement numerically.
struct BoundReport {
    double gap_observed = 0.0; // J(checked policy) - J(optimal)
    double bound_value = 0.0;
    bool holds = false;
    double discount = 0.0;
    double epsilon = 0.0; // sup-norm oracle error
    int k = 0;
    std::uint64_t seed = 0;
    std::string descriptor;
    std::string violation_dump; // full instance, filled only on violation
};

/// Lower-bound check: on the adversarial chain the one-step greedy gap must
/// match discount * (1 - discount^depth) / (1 - discount) within 1 percent
/// (and never exceed it beyond 1e-9).
BoundReport verify_lower_bound(double discount, double delta, int depth);

/// Upper-bound check: for n_trials uniform oracle perturbations of V* with
/// sup-norm at most epsilon, the k-step lookahead gap must stay within
///   2 * discount^k * epsilon / (1 - discount^k) + 1e-9.
/// holds reflects the worst trial; violations fill violation_dump.
BoundReport verify_upper_bound(const TabularMdp& mdp, double epsilon, int k, int n_trials,
                               Rng& rng);

/// Human-readable dump of an MDP instance plus an oracle vector, used when
/// reporting bound violations.
std::string dump_instance(const TabularMdp& mdp, const Eigen::VectorXd& oracle_values);

} // namespace thor

#endif
