#ifndef THOR_ENV_HPP
#define THOR_ENV_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thor/mdp.hpp"
#include "thor/rng.hpp"

namespace thor {

/// A single action: a discrete index or a continuous vector.
struct Action {
    int index = -1;          // discrete id; -1 means continuous
    std::vector<double> box; // continuous components

    bool is_discrete() const { return index >= 0; }

    static Action discrete(int i) {
        Action a;
        a.index = i;
        return a;
    }
    static Action continuous(std::vector<double> v) {
        Action a;
        a.box = std::move(v);
        return a;
    }
};

/// Action set descriptor: n discrete choices, or an axis-aligned box.
struct ActionSpace {
    enum class Kind { discrete, box };
    Kind kind = Kind::discrete;
    int count = 0;                 // discrete only
    std::vector<double> low, high; // box only, per component

    static ActionSpace make_discrete(int n);
    static ActionSpace make_box(std::vector<double> low, std::vector<double> high);

    /// Number of serialized action components (1 for discrete).
    int action_dim() const;
    bool contains(const Action& a) const;
};

/// One environment transition. Timestamps are 1-based within an episode.
/// next_state is absent only on the tail record of a loaded truncated
/// episode, where the file format does not carry the successor observation.
struct TransitionRecord {
    int t = 0;
    std::vector<double> state;
    Action action;
    double cost = 0.0;
    std::optional<double> shaped_cost;
    std::optional<std::vector<double>> next_state;
    bool done = false;
};

struct Trajectory {
    long episode_id = 0;
    bool truncated = false; // hit the horizon without a terminal event
    std::vector<TransitionRecord> records;

    int length() const { return static_cast<int>(records.size()); }

    /// Timestamps consecutive from 1, done only on the final record.
    void validate() const;
};

struct StepResult {
    std::vector<double> observation;
    double cost = 0.0;
    bool done = false;
};

/// Episodic environment with a fixed horizon. reset() must be called before
/// the first step and after any episode ends; stepping a finished episode
/// throws std::logic_error. Episodes end either by a terminal event (done)
/// or by hitting the horizon (truncation).
class EnvInterface {
  public:
    virtual ~EnvInterface() = default;

    std::vector<double> reset(Rng& rng);
    StepResult step(const Action& action, Rng& rng);

    virtual int horizon() const = 0;
    virtual int observation_dim() const = 0;
    virtual const ActionSpace& action_space() const = 0;
    virtual std::string name() const = 0;

    /// Steps taken in the current episode.
    int steps_taken() const { return steps_; }
    bool episode_over() const { return !active_; }

  protected:
    virtual std::vector<double> do_reset(Rng& rng) = 0;
    virtual StepResult do_step(const Action& action, Rng& rng) = 0;

  private:
    int steps_ = 0;
    bool active_ = false;
};

/// Tabular MDP exposed through the environment interface. Observations are
/// single-component vectors holding the state index. Episodes truncate at
/// the horizon; states listed as terminal end the episode with done set.
class TabularEnv : public EnvInterface {
  public:
    TabularEnv(TabularMdp mdp, int horizon, std::vector<int> terminal_states = {});

    int horizon() const override { return horizon_; }
    int observation_dim() const override { return 1; }
    const ActionSpace& action_space() const override { return space_; }
    std::string name() const override { return "tabular"; }

    const TabularMdp& mdp() const { return mdp_; }
    int current_state() const { return state_; }

  protected:
    std::vector<double> do_reset(Rng& rng) override;
    StepResult do_step(const Action& action, Rng& rng) override;

  private:
    TabularMdp mdp_;
    int horizon_;
    std::vector<bool> terminal_;
    ActionSpace space_;
    int state_ = 0;
};

class Policy; // policy.hpp

/// Runs one episode to termination or horizon; raw costs only, shaped_cost
/// left empty. Fills next_state on every record. Throws std::runtime_error
/// if the policy emits an action outside the env action space.
Trajectory rollout(EnvInterface& env, const Policy& policy, Rng& rng, long episode_id = 0);

/// Discounted sum of raw costs, sum_t discount^(t-1) * cost_t.
/// Throws std::invalid_argument on an empty trajectory.
double discounted_return(const Trajectory& traj, double discount);

/// Undiscounted sum of raw costs over the episode.
double total_cost(const Trajectory& traj);

} // namespace thor

#endif
