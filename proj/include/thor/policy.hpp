#ifndef THOR_POLICY_HPP
#define THOR_POLICY_HPP

#include <vector>

#include "thor/env.hpp"
#include "thor/rng.hpp"

namespace thor {

/// Maps observations to actions. Stochastic policies expose exact log
/// densities / log masses through action_log_prob.
class Policy {
  public:
    virtual ~Policy() = default;

    virtual Action act(const std::vector<double>& observation, Rng& rng) const = 0;

    /// Log probability (discrete) or log density (continuous) of the action.
    virtual double action_log_prob(const std::vector<double>& observation,
                                   const Action& action) const = 0;

    virtual bool deterministic() const = 0;
};

/// Explicit distribution over actions per tabular state. Observations are
/// single-component state indices, as emitted by TabularEnv.
class TabularPolicy : public Policy {
  public:
    /// probs[s][a]; every row must be a distribution.
    TabularPolicy(std::vector<std::vector<double>> probs);

    /// Point-mass policy from an action table.
    static TabularPolicy deterministic_policy(const std::vector<int>& actions, int num_actions);
    static TabularPolicy uniform(int num_states, int num_actions);

    int num_states() const { return static_cast<int>(probs_.size()); }
    int num_actions() const { return num_actions_; }
    double prob(int state, int action) const;

    /// For point-mass rows, the single supported action; throws
    /// std::logic_error if the row is not a point mass.
    int action_at(int state) const;

    Action act(const std::vector<double>& observation, Rng& rng) const override;
    double action_log_prob(const std::vector<double>& observation,
                           const Action& action) const override;
    bool deterministic() const override { return deterministic_; }

  private:
    std::vector<std::vector<double>> probs_;
    int num_actions_ = 0;
    bool deterministic_ = false;

    int state_of(const std::vector<double>& observation) const;
};

} // namespace thor

#endif
