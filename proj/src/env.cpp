#include "thor/env.hpp"

#include <cmath>
#include <stdexcept>

#include "thor/policy.hpp"

namespace thor {

ActionSpace ActionSpace::make_discrete(int n) {
    if (n <= 0) throw std::invalid_argument("ActionSpace: discrete count must be positive");
    ActionSpace s;
    s.kind = Kind::discrete;
    s.count = n;
    return s;
}

ActionSpace ActionSpace::make_box(std::vector<double> low, std::vector<double> high) {
    if (low.empty() || low.size() != high.size())
        throw std::invalid_argument("ActionSpace: box bounds empty or mismatched");
    for (size_t i = 0; i < low.size(); ++i)
        if (!(low[i] <= high[i]))
            throw std::invalid_argument("ActionSpace: box lower bound above upper bound");
    ActionSpace s;
    s.kind = Kind::box;
    s.low = std::move(low);
    s.high = std::move(high);
    return s;
}

int ActionSpace::action_dim() const {
    return kind == Kind::discrete ? 1 : static_cast<int>(low.size());
}

bool ActionSpace::contains(const Action& a) const {
    if (kind == Kind::discrete) return a.is_discrete() && a.index < count;
    if (a.is_discrete() || a.box.size() != low.size()) return false;
    for (size_t i = 0; i < low.size(); ++i) {
        if (!std::isfinite(a.box[i])) return false;
        if (a.box[i] < low[i] || a.box[i] > high[i]) return false;
    }
    return true;
}

void Trajectory::validate() const {
    for (size_t i = 0; i < records.size(); ++i) {
        if (records[i].t != static_cast<int>(i) + 1)
            throw std::invalid_argument("Trajectory: timestamps must run 1..T");
        if (records[i].done && i + 1 != records.size())
            throw std::invalid_argument("Trajectory: done before the final record");
    }
}

std::vector<double> EnvInterface::reset(Rng& rng) {
    steps_ = 0;
    active_ = true;
    return do_reset(rng);
}

StepResult EnvInterface::step(const Action& action, Rng& rng) {
    if (!active_)
        throw std::logic_error("EnvInterface: step on a finished or unstarted episode");
    if (!action_space().contains(action))
        throw std::runtime_error("EnvInterface: action outside the action space");
    StepResult r = do_step(action, rng);
    ++steps_;
    if (r.done || steps_ >= horizon()) active_ = false;
    return r;
}

TabularEnv::TabularEnv(TabularMdp mdp, int horizon, std::vector<int> terminal_states)
    : mdp_(std::move(mdp)), horizon_(horizon) {
    mdp_.validate();
    if (horizon_ <= 0) throw std::invalid_argument("TabularEnv: horizon must be positive");
    terminal_.assign(mdp_.num_states, false);
    for (int s : terminal_states) {
        if (s < 0 || s >= mdp_.num_states)
            throw std::out_of_range("TabularEnv: terminal state out of range");
        terminal_[s] = true;
    }
    space_ = ActionSpace::make_discrete(mdp_.num_actions);
}

std::vector<double> TabularEnv::do_reset(Rng& rng) {
    std::vector<double> nu(mdp_.initial_dist.data(), mdp_.initial_dist.data() + mdp_.num_states);
    state_ = rng.categorical(nu);
    return {static_cast<double>(state_)};
}

StepResult TabularEnv::do_step(const Action& action, Rng& rng) {
    StepResult r;
    r.cost = sample_cost(mdp_, state_, action.index, rng);
    state_ = sample_transition(mdp_, state_, action.index, rng);
    r.observation = {static_cast<double>(state_)};
    r.done = terminal_[state_];
    return r;
}

Trajectory rollout(EnvInterface& env, const Policy& policy, Rng& rng, long episode_id) {
    Trajectory traj;
    traj.episode_id = episode_id;
    std::vector<double> obs = env.reset(rng);
    for (int t = 1; t <= env.horizon(); ++t) {
        Action a = policy.act(obs, rng);
        if (!env.action_space().contains(a))
            throw std::runtime_error("rollout: policy emitted an action outside the action space");
        StepResult r = env.step(a, rng);
        TransitionRecord rec;
        rec.t = t;
        rec.state = obs;
        rec.action = std::move(a);
        rec.cost = r.cost;
        rec.next_state = r.observation;
        rec.done = r.done;
        traj.records.push_back(std::move(rec));
        obs = std::move(r.observation);
        if (traj.records.back().done) break;
    }
    traj.truncated = !traj.records.empty() && !traj.records.back().done;
    traj.validate();
    return traj;
}

double discounted_return(const Trajectory& traj, double discount) {
    if (traj.records.empty())
        throw std::invalid_argument("discounted_return: empty trajectory");
    double total = 0.0;
    double scale = 1.0;
    for (const TransitionRecord& rec : traj.records) {
        total += scale * rec.cost;
        scale *= discount;
    }
    return total;
}

double total_cost(const Trajectory& traj) {
    double total = 0.0;
    for (const TransitionRecord& rec : traj.records) total += rec.cost;
    return total;
}

} // namespace thor
