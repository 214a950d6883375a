#ifndef THOR_MDP_HPP
#define THOR_MDP_HPP

#include <Eigen/Dense>
#include <vector>

#include "thor/rng.hpp"

namespace thor {

/// Finite discounted MDP with costs (lower is better everywhere in this
/// library; reward reporting negates at the edge).
///
/// Per-step costs are Gaussian with mean cost_mean(s, a) and standard
/// deviation cost_noise_std(s, a); the default noise of zero makes costs
/// deterministic. Transitions are dense row-stochastic matrices, one per
/// action, with row s of transition[a] holding P(. | s, a).
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    double discount = 0.0;
    std::vector<Eigen::MatrixXd> transition; // [a], each S x S
    Eigen::MatrixXd cost_mean;               // S x A
    Eigen::MatrixXd cost_noise_std;          // S x A, all >= 0
    Eigen::VectorXd initial_dist;            // length S, sums to 1

    /// Zero-cost, noise-free MDP with unset (zero) transition rows; callers
    /// fill transitions and costs, then validate().
    TabularMdp(int num_states, int num_actions, double discount);
    TabularMdp() = default;

    /// Checks every structural invariant: discount in [0, 1), row sums within
    /// 1e-9 of one, no negative probabilities, non-negative noise, initial
    /// distribution normalized. Throws std::invalid_argument on violation.
    void validate() const;

    /// Expected cost vector c_pi and transition matrix P_pi under a fixed
    /// action per state (deterministic policy as action table).
    Eigen::VectorXd cost_under(const std::vector<int>& actions) const;
};

/// Draws the next state from P(. | s, a). Throws std::out_of_range for bad
/// indices.
int sample_transition(const TabularMdp& mdp, int state, int action, Rng& rng);

/// Draws a cost realization: Gaussian around cost_mean(s, a) with the row's
/// noise std (exact mean when the std is zero).
double sample_cost(const TabularMdp& mdp, int state, int action, Rng& rng);

/// Random test MDP: each transition row is uniform on the simplex
/// (Dirichlet with unit concentration) and mean costs are uniform on [0, 1],
/// noise-free, uniform initial distribution.
TabularMdp random_mdp(int num_states, int num_actions, double discount, Rng& rng);

} // namespace thor

#endif
