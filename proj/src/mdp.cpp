#include "thor/mdp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace thor {

TabularMdp::TabularMdp(int num_states_, int num_actions_, double discount_)
    : num_states(num_states_), num_actions(num_actions_), discount(discount_) {
    if (num_states <= 0 || num_actions <= 0)
        throw std::invalid_argument("TabularMdp: state and action counts must be positive");
    transition.assign(num_actions, Eigen::MatrixXd::Zero(num_states, num_states));
    cost_mean = Eigen::MatrixXd::Zero(num_states, num_actions);
    cost_noise_std = Eigen::MatrixXd::Zero(num_states, num_actions);
    initial_dist = Eigen::VectorXd::Constant(num_states, 1.0 / num_states);
}

void TabularMdp::validate() const {
    if (num_states <= 0 || num_actions <= 0)
        throw std::invalid_argument("TabularMdp: empty state or action set");
    if (!(discount >= 0.0) || discount >= 1.0)
        throw std::invalid_argument("TabularMdp: discount must lie in [0, 1)");
    if (static_cast<int>(transition.size()) != num_actions)
        throw std::invalid_argument("TabularMdp: one transition matrix per action required");
    for (int a = 0; a < num_actions; ++a) {
        const Eigen::MatrixXd& P = transition[a];
        if (P.rows() != num_states || P.cols() != num_states)
            throw std::invalid_argument("TabularMdp: transition matrix shape mismatch");
        for (int s = 0; s < num_states; ++s) {
            double row_sum = 0.0;
            for (int t = 0; t < num_states; ++t) {
                const double p = P(s, t);
                if (!(p >= 0.0))
                    throw std::invalid_argument("TabularMdp: negative or NaN probability at state " +
                                                std::to_string(s) + ", action " + std::to_string(a));
                row_sum += p;
            }
            if (std::abs(row_sum - 1.0) > 1e-9)
                throw std::invalid_argument("TabularMdp: transition row does not sum to 1 at state " +
                                            std::to_string(s) + ", action " + std::to_string(a));
        }
    }
    if (cost_mean.rows() != num_states || cost_mean.cols() != num_actions)
        throw std::invalid_argument("TabularMdp: cost_mean shape mismatch");
    if (!cost_mean.allFinite())
        throw std::invalid_argument("TabularMdp: non-finite cost mean");
    if (cost_noise_std.rows() != num_states || cost_noise_std.cols() != num_actions)
        throw std::invalid_argument("TabularMdp: cost_noise_std shape mismatch");
    if (!cost_noise_std.allFinite() || (cost_noise_std.array() < 0.0).any())
        throw std::invalid_argument("TabularMdp: cost noise std must be finite and non-negative");
    if (initial_dist.size() != num_states)
        throw std::invalid_argument("TabularMdp: initial distribution length mismatch");
    double nu_sum = 0.0;
    for (int s = 0; s < num_states; ++s) {
        if (!(initial_dist(s) >= 0.0))
            throw std::invalid_argument("TabularMdp: negative initial probability");
        nu_sum += initial_dist(s);
    }
    if (std::abs(nu_sum - 1.0) > 1e-9)
        throw std::invalid_argument("TabularMdp: initial distribution does not sum to 1");
}

Eigen::VectorXd TabularMdp::cost_under(const std::vector<int>& actions) const {
    if (static_cast<int>(actions.size()) != num_states)
        throw std::invalid_argument("cost_under: one action per state required");
    Eigen::VectorXd c(num_states);
    for (int s = 0; s < num_states; ++s) {
        if (actions[s] < 0 || actions[s] >= num_actions)
            throw std::out_of_range("cost_under: action index out of range");
        c(s) = cost_mean(s, actions[s]);
    }
    return c;
}

int sample_transition(const TabularMdp& mdp, int state, int action, Rng& rng) {
    if (state < 0 || state >= mdp.num_states)
        throw std::out_of_range("sample_transition: state index out of range");
    if (action < 0 || action >= mdp.num_actions)
        throw std::out_of_range("sample_transition: action index out of range");
    const Eigen::MatrixXd& P = mdp.transition[action];
    double u = rng.uniform();
    for (int t = 0; t < mdp.num_states; ++t) {
        u -= P(state, t);
        if (u < 0.0) return t;
    }
    // Row sums to 1 within tolerance; attribute residual mass to the last
    // state with nonzero probability.
    for (int t = mdp.num_states - 1; t >= 0; --t)
        if (P(state, t) > 0.0) return t;
    throw std::runtime_error("sample_transition: transition row is all zero");
}

double sample_cost(const TabularMdp& mdp, int state, int action, Rng& rng) {
    if (state < 0 || state >= mdp.num_states)
        throw std::out_of_range("sample_cost: state index out of range");
    if (action < 0 || action >= mdp.num_actions)
        throw std::out_of_range("sample_cost: action index out of range");
    const double sd = mdp.cost_noise_std(state, action);
    double c = mdp.cost_mean(state, action);
    if (sd > 0.0) c += sd * rng.normal();
    return c;
}

TabularMdp random_mdp(int num_states, int num_actions, double discount, Rng& rng) {
    TabularMdp mdp(num_states, num_actions, discount);
    for (int a = 0; a < num_actions; ++a) {
        for (int s = 0; s < num_states; ++s) {
            // Unit-concentration Dirichlet row: normalized standard
            // exponentials.
            double total = 0.0;
            Eigen::VectorXd row(num_states);
            for (int t = 0; t < num_states; ++t) {
                double u = rng.uniform();
                while (u <= 0.0) u = rng.uniform();
                row(t) = -std::log(u);
                total += row(t);
            }
            mdp.transition[a].row(s) = row.transpose() / total;
        }
    }
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) mdp.cost_mean(s, a) = rng.uniform();
    mdp.validate();
    return mdp;
}

} // namespace thor
