#include "thor/policy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace thor {

TabularPolicy::TabularPolicy(std::vector<std::vector<double>> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("TabularPolicy: no states");
    num_actions_ = static_cast<int>(probs_[0].size());
    if (num_actions_ == 0) throw std::invalid_argument("TabularPolicy: no actions");
    deterministic_ = true;
    for (const auto& row : probs_) {
        if (static_cast<int>(row.size()) != num_actions_)
            throw std::invalid_argument("TabularPolicy: ragged probability rows");
        double sum = 0.0;
        for (double p : row) {
            if (!(p >= 0.0)) throw std::invalid_argument("TabularPolicy: negative probability");
            sum += p;
            if (p != 0.0 && p != 1.0) deterministic_ = false;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("TabularPolicy: row does not sum to 1");
    }
}

TabularPolicy TabularPolicy::deterministic_policy(const std::vector<int>& actions, int num_actions) {
    std::vector<std::vector<double>> probs(actions.size(), std::vector<double>(num_actions, 0.0));
    for (size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= num_actions)
            throw std::out_of_range("TabularPolicy: action index out of range");
        probs[s][actions[s]] = 1.0;
    }
    return TabularPolicy(std::move(probs));
}

TabularPolicy TabularPolicy::uniform(int num_states, int num_actions) {
    std::vector<std::vector<double>> probs(
        num_states, std::vector<double>(num_actions, 1.0 / num_actions));
    return TabularPolicy(std::move(probs));
}

double TabularPolicy::prob(int state, int action) const {
    if (state < 0 || state >= num_states()) throw std::out_of_range("TabularPolicy: bad state");
    if (action < 0 || action >= num_actions_) throw std::out_of_range("TabularPolicy: bad action");
    return probs_[state][action];
}

int TabularPolicy::action_at(int state) const {
    if (state < 0 || state >= num_states()) throw std::out_of_range("TabularPolicy: bad state");
    for (int a = 0; a < num_actions_; ++a)
        if (probs_[state][a] == 1.0) return a;
    throw std::logic_error("TabularPolicy: row is not a point mass");
}

int TabularPolicy::state_of(const std::vector<double>& observation) const {
    if (observation.size() != 1)
        throw std::invalid_argument("TabularPolicy: expected a single-component state index");
    const int s = static_cast<int>(observation[0]);
    if (s < 0 || s >= num_states())
        throw std::out_of_range("TabularPolicy: state index out of range");
    return s;
}

Action TabularPolicy::act(const std::vector<double>& observation, Rng& rng) const {
    const int s = state_of(observation);
    return Action::discrete(rng.categorical(probs_[s]));
}

double TabularPolicy::action_log_prob(const std::vector<double>& observation,
                                      const Action& action) const {
    const int s = state_of(observation);
    if (!action.is_discrete() || action.index >= num_actions_)
        throw std::invalid_argument("TabularPolicy: action outside the discrete set");
    const double p = probs_[s][action.index];
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(p);
}

} // namespace thor
