#include "thor/envs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace thor {

namespace {

constexpr double kPi = std::numbers::pi;

// Mountain car (standard parameterization).
constexpr double kMcMinPos = -1.2;
constexpr double kMcMaxPos = 0.6;
constexpr double kMcMaxSpeed = 0.07;
constexpr double kMcGoalPos = 0.5;
constexpr double kMcForce = 0.001;
constexpr double kMcGravity = 0.0025;

// Acrobot (standard parameterization, both links identical).
constexpr double kAcLinkMass = 1.0;
constexpr double kAcLinkLength = 1.0;
constexpr double kAcLinkCom = 0.5;    // distance from joint to center of mass
constexpr double kAcLinkInertia = 1.0; // about the center of mass
constexpr double kAcGravity = 9.8;
constexpr double kAcDt = 0.05;        // integrator substep
constexpr int kAcSubsteps = 4;        // 0.2 s per env step
constexpr double kAcMaxVel1 = 4.0 * kPi;
constexpr double kAcMaxVel2 = 9.0 * kPi;

// Cartpole (standard parameterization).
constexpr double kCpGravity = 9.8;
constexpr double kCpCartMass = 1.0;
constexpr double kCpPoleMass = 0.1;
constexpr double kCpPoleHalfLength = 0.5;
constexpr double kCpForceMag = 10.0;
constexpr double kCpDt = 0.02;
constexpr double kCpFailX = 2.4;
constexpr double kCpFailTheta = 12.0 * kPi / 180.0;
constexpr double kCpMaxVel = 10.0; // observation clip only

// Pendulum swing-up (standard parameterization).
constexpr double kPdGravity = 10.0;
constexpr double kPdMass = 1.0;
constexpr double kPdLength = 1.0;
constexpr double kPdDt = 0.05;
constexpr double kPdMaxTorque = 2.0;
constexpr double kPdMaxSpeed = 8.0;
constexpr double kPdGoalAngle = 0.15;
constexpr double kPdGoalSpeed = 1.0;

void check_discrete_3(int action, const char* env) {
    if (action < 0 || action > 2)
        throw std::invalid_argument(std::string(env) + ": action must be in {0, 1, 2}");
}

bool acrobot_raised(double theta1, double theta2) {
    return -std::cos(theta1) - std::cos(theta1 + theta2) > 1.0;
}

bool cartpole_failed(const CartpoleState& s) {
    return std::abs(s.x) > kCpFailX || std::abs(s.theta) > kCpFailTheta;
}

bool pendulum_at_goal(const PendulumState& s) {
    return std::abs(wrap_angle(s.theta)) <= kPdGoalAngle && std::abs(s.theta_dot) <= kPdGoalSpeed;
}

std::array<double, 4> acrobot_derivatives(const std::array<double, 4>& y, double torque) {
    const double m = kAcLinkMass, l1 = kAcLinkLength, lc = kAcLinkCom;
    const double inertia = kAcLinkInertia, g = kAcGravity;
    const double theta1 = y[0], theta2 = y[1], dtheta1 = y[2], dtheta2 = y[3];

    const double d1 =
        m * lc * lc + m * (l1 * l1 + lc * lc + 2.0 * l1 * lc * std::cos(theta2)) + 2.0 * inertia;
    const double d2 = m * (lc * lc + l1 * lc * std::cos(theta2)) + inertia;
    const double phi2 = m * lc * g * std::cos(theta1 + theta2 - kPi / 2.0);
    const double phi1 = -m * l1 * lc * dtheta2 * dtheta2 * std::sin(theta2) -
                        2.0 * m * l1 * lc * dtheta2 * dtheta1 * std::sin(theta2) +
                        (m * lc + m * l1) * g * std::cos(theta1 - kPi / 2.0) + phi2;
    const double ddtheta2 =
        (torque + (d2 / d1) * phi1 - m * l1 * lc * dtheta1 * dtheta1 * std::sin(theta2) - phi2) /
        (m * lc * lc + inertia - d2 * d2 / d1);
    const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    return {dtheta1, dtheta2, ddtheta1, ddtheta2};
}

std::array<double, 4> rk4_substep(const std::array<double, 4>& y, double torque, double h) {
    const auto k1 = acrobot_derivatives(y, torque);
    std::array<double, 4> tmp;
    for (int i = 0; i < 4; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    const auto k2 = acrobot_derivatives(tmp, torque);
    for (int i = 0; i < 4; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    const auto k3 = acrobot_derivatives(tmp, torque);
    for (int i = 0; i < 4; ++i) tmp[i] = y[i] + h * k3[i];
    const auto k4 = acrobot_derivatives(tmp, torque);
    std::array<double, 4> out;
    for (int i = 0; i < 4; ++i)
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

void check_finite(const std::vector<double>& obs, const char* env) {
    for (double v : obs)
        if (!std::isfinite(v)) throw std::runtime_error(std::string(env) + ": non-finite state");
}

class MountainCarEnv final : public EnvInterface {
  public:
    explicit MountainCarEnv(int horizon)
        : horizon_(horizon), space_(ActionSpace::make_discrete(3)) {
        if (horizon <= 0) throw std::invalid_argument("mountain_car: horizon must be positive");
    }

    int horizon() const override { return horizon_; }
    int observation_dim() const override { return 2; }
    const ActionSpace& action_space() const override { return space_; }
    std::string name() const override { return "mountain_car"; }

  protected:
    std::vector<double> do_reset(Rng& rng) override {
        state_.position = rng.uniform(-0.6, -0.4);
        state_.velocity = 0.0;
        return observe();
    }

    StepResult do_step(const Action& action, Rng&) override {
        state_ = mountain_car_step(state_, action.index);
        StepResult r;
        r.observation = observe();
        r.cost = 1.0;
        r.done = state_.position >= kMcGoalPos;
        return r;
    }

  private:
    std::vector<double> observe() const {
        std::vector<double> obs{state_.position, state_.velocity};
        check_finite(obs, "mountain_car");
        return obs;
    }

    int horizon_;
    ActionSpace space_;
    MountainCarState state_;
};

class AcrobotEnv final : public EnvInterface {
  public:
    explicit AcrobotEnv(int horizon) : horizon_(horizon), space_(ActionSpace::make_discrete(3)) {
        if (horizon <= 0) throw std::invalid_argument("acrobot: horizon must be positive");
    }

    int horizon() const override { return horizon_; }
    int observation_dim() const override { return 4; }
    const ActionSpace& action_space() const override { return space_; }
    std::string name() const override { return "acrobot"; }

  protected:
    std::vector<double> do_reset(Rng& rng) override {
        state_.theta1 = rng.uniform(-0.1, 0.1);
        state_.theta2 = rng.uniform(-0.1, 0.1);
        state_.dtheta1 = rng.uniform(-0.1, 0.1);
        state_.dtheta2 = rng.uniform(-0.1, 0.1);
        return observe();
    }

    StepResult do_step(const Action& action, Rng&) override {
        state_ = acrobot_step(state_, action.index);
        StepResult r;
        r.observation = observe();
        r.cost = 1.0;
        r.done = acrobot_raised(state_.theta1, state_.theta2);
        return r;
    }

  private:
    std::vector<double> observe() const {
        std::vector<double> obs{state_.theta1, state_.theta2, state_.dtheta1, state_.dtheta2};
        check_finite(obs, "acrobot");
        return obs;
    }

    int horizon_;
    ActionSpace space_;
    AcrobotState state_;
};

class CartpoleSparseEnv final : public EnvInterface {
  public:
    explicit CartpoleSparseEnv(int horizon)
        : horizon_(horizon), space_(ActionSpace::make_discrete(2)) {
        if (horizon <= 0)
            throw std::invalid_argument("cartpole_sparse: horizon must be positive");
    }

    int horizon() const override { return horizon_; }
    int observation_dim() const override { return 4; }
    const ActionSpace& action_space() const override { return space_; }
    std::string name() const override { return "cartpole_sparse"; }

  protected:
    std::vector<double> do_reset(Rng& rng) override {
        state_.x = rng.uniform(-0.05, 0.05);
        state_.x_dot = rng.uniform(-0.05, 0.05);
        state_.theta = rng.uniform(-0.05, 0.05);
        state_.theta_dot = rng.uniform(-0.05, 0.05);
        return observe();
    }

    StepResult do_step(const Action& action, Rng&) override {
        const double force = action.index == 1 ? kCpForceMag : -kCpForceMag;
        state_ = cartpole_step(state_, force);
        StepResult r;
        r.observation = observe();
        // All cost mass sits on episode end: 0 on failure, -1 for surviving
        // the full horizon.
        if (cartpole_failed(state_)) {
            r.cost = 0.0;
            r.done = true;
        } else if (steps_taken() + 1 == horizon_) {
            r.cost = -1.0;
            r.done = true;
        }
        return r;
    }

  private:
    std::vector<double> observe() const {
        std::vector<double> obs{std::clamp(state_.x, -2.0 * kCpFailX, 2.0 * kCpFailX),
                                std::clamp(state_.x_dot, -kCpMaxVel, kCpMaxVel),
                                std::clamp(state_.theta, -2.0 * kCpFailTheta, 2.0 * kCpFailTheta),
                                std::clamp(state_.theta_dot, -kCpMaxVel, kCpMaxVel)};
        check_finite(obs, "cartpole_sparse");
        return obs;
    }

    int horizon_;
    ActionSpace space_;
    CartpoleState state_;
};

class PendulumSparseEnv final : public EnvInterface {
  public:
    explicit PendulumSparseEnv(int horizon)
        : horizon_(horizon),
          space_(ActionSpace::make_box({-kPdMaxTorque}, {kPdMaxTorque})) {
        if (horizon <= 0)
            throw std::invalid_argument("pendulum_sparse: horizon must be positive");
    }

    int horizon() const override { return horizon_; }
    int observation_dim() const override { return 2; }
    const ActionSpace& action_space() const override { return space_; }
    std::string name() const override { return "pendulum_sparse"; }

  protected:
    std::vector<double> do_reset(Rng& rng) override {
        state_.theta = wrap_angle(kPi + rng.uniform(-0.05, 0.05));
        state_.theta_dot = rng.uniform(-0.05, 0.05);
        return observe();
    }

    StepResult do_step(const Action& action, Rng&) override {
        state_ = pendulum_step(state_, action.box[0]);
        StepResult r;
        r.observation = observe();
        // Sparse goal event: one -1 for reaching the slow upright set.
        if (pendulum_at_goal(state_)) {
            r.cost = -1.0;
            r.done = true;
        }
        return r;
    }

  private:
    std::vector<double> observe() const {
        std::vector<double> obs{state_.theta, state_.theta_dot};
        check_finite(obs, "pendulum_sparse");
        return obs;
    }

    int horizon_;
    ActionSpace space_;
    PendulumState state_;
};

// --- grid-discretized expert machinery ---

struct GridDim {
    double lo = 0.0;
    double hi = 0.0;
    int bins = 1;
    bool wrap = false;
};

struct GridSpec {
    std::vector<GridDim> dims;

    long cells() const {
        long n = 1;
        for (const auto& d : dims) n *= d.bins;
        return n;
    }

    long cell_of(const std::vector<double>& x) const {
        long index = 0;
        for (size_t i = 0; i < dims.size(); ++i) {
            const auto& d = dims[i];
            double v = x[i];
            if (d.wrap) {
                const double period = d.hi - d.lo;
                v = std::fmod(v - d.lo, period);
                if (v < 0.0) v += period;
                v += d.lo;
            } else {
                v = std::clamp(v, d.lo, d.hi);
            }
            int bin = static_cast<int>((v - d.lo) / (d.hi - d.lo) * d.bins);
            bin = std::clamp(bin, 0, d.bins - 1);
            index = index * d.bins + bin;
        }
        return index;
    }

    std::vector<double> center_of(long cell) const {
        std::vector<double> x(dims.size());
        for (size_t i = dims.size(); i-- > 0;) {
            const auto& d = dims[i];
            const int bin = static_cast<int>(cell % d.bins);
            cell /= d.bins;
            x[i] = d.lo + (bin + 0.5) * (d.hi - d.lo) / d.bins;
        }
        return x;
    }
};

/// Deterministic task model for expert construction: true one-step dynamics
/// plus the absorbing set and the cost the expert plans against. The
/// planning cost may differ from the env's emitted cost (the cartpole
/// expert needs a state penalty to break the ties a pure failure cost
/// leaves on every recoverable state).
struct ExpertModel {
    GridSpec grid;
    std::vector<Action> actions;
    std::function<std::vector<double>(const std::vector<double>&, int)> step;
    std::function<bool(const std::vector<double>&)> absorbing;
    std::function<double(const std::vector<double>&)> entry_cost; // of the state stepped into
    double discount = 0.99;
    int lookahead_depth = 1; // act-time search depth on the true dynamics
    /// Times each action is repeated in the planning model. Near-rest cells
    /// otherwise self-loop when one step moves less than a bin, cutting the
    /// start region off from the goal.
    int plan_repeat = 1;
};

ExpertModel mountain_car_model() {
    ExpertModel m;
    m.grid.dims = {{kMcMinPos, kMcMaxPos, 256, false}, {-kMcMaxSpeed, kMcMaxSpeed, 384, false}};
    m.lookahead_depth = 2;
    m.actions = {Action::discrete(0), Action::discrete(1), Action::discrete(2)};
    m.step = [](const std::vector<double>& x, int a) {
        const MountainCarState n = mountain_car_step({x[0], x[1]}, a);
        return std::vector<double>{n.position, n.velocity};
    };
    m.absorbing = [](const std::vector<double>& x) { return x[0] >= kMcGoalPos; };
    m.entry_cost = [](const std::vector<double>&) { return 1.0; };
    return m;
}

ExpertModel acrobot_model() {
    ExpertModel m;
    // Velocity ranges cover the swing-up regime rather than the full state
    // clip bounds; wilder states snap to the edge bins.
    m.grid.dims = {{-kPi, kPi, 31, true},
                   {-kPi, kPi, 31, true},
                   {-3.0 * kPi, 3.0 * kPi, 25, false},
                   {-6.0 * kPi, 6.0 * kPi, 25, false}};
    m.lookahead_depth = 2;
    m.plan_repeat = 4;
    m.actions = {Action::discrete(0), Action::discrete(1), Action::discrete(2)};
    m.step = [](const std::vector<double>& x, int a) {
        const AcrobotState n = acrobot_step({x[0], x[1], x[2], x[3]}, a);
        return std::vector<double>{n.theta1, n.theta2, n.dtheta1, n.dtheta2};
    };
    m.absorbing = [](const std::vector<double>& x) { return acrobot_raised(x[0], x[1]); };
    m.entry_cost = [](const std::vector<double>&) { return 1.0; };
    return m;
}

ExpertModel cartpole_model() {
    ExpertModel m;
    m.grid.dims = {{-kCpFailX, kCpFailX, 11, false},
                   {-2.5, 2.5, 15, false},
                   {-1.1 * kCpFailTheta, 1.1 * kCpFailTheta, 21, false},
                   {-2.5, 2.5, 21, false}};
    m.actions = {Action::discrete(0), Action::discrete(1)};
    m.lookahead_depth = 2;
    m.step = [](const std::vector<double>& x, int a) {
        const double force = a == 1 ? kCpForceMag : -kCpForceMag;
        const CartpoleState n = cartpole_step({x[0], x[1], x[2], x[3]}, force);
        return std::vector<double>{n.x, n.x_dot, n.theta, n.theta_dot};
    };
    m.absorbing = [](const std::vector<double>& x) {
        return cartpole_failed({x[0], x[1], x[2], x[3]});
    };
    // A pure failure cost leaves value exactly zero on every recoverable
    // state, so greedy action choices would tie everywhere. The small
    // centering penalty breaks the ties toward balanced, centered states;
    // survival is what the env's sparse cost then rewards.
    m.entry_cost = [](const std::vector<double>& x) {
        if (cartpole_failed({x[0], x[1], x[2], x[3]})) return 100.0;
        const double nt = x[2] / kCpFailTheta, nx = x[0] / kCpFailX;
        return 0.05 * nt * nt + 0.01 * nx * nx;
    };
    return m;
}

ExpertModel pendulum_model() {
    ExpertModel m;
    m.grid.dims = {{-kPi, kPi, 101, true}, {-kPdMaxSpeed, kPdMaxSpeed, 101, false}};
    for (int i = 0; i < 5; ++i)
        m.actions.push_back(Action::continuous({(i - 2) * kPdMaxTorque / 2.0}));
    m.step = [](const std::vector<double>& x, int a) {
        const double torque = (a - 2) * kPdMaxTorque / 2.0;
        const PendulumState n = pendulum_step({x[0], x[1]}, torque);
        return std::vector<double>{n.theta, n.theta_dot};
    };
    m.absorbing = [](const std::vector<double>& x) { return pendulum_at_goal({x[0], x[1]}); };
    m.entry_cost = [](const std::vector<double>& x) {
        return pendulum_at_goal({x[0], x[1]}) ? -1.0 : 0.0;
    };
    return m;
}

ExpertModel expert_model(const std::string& name) {
    if (name == "mountain_car") return mountain_car_model();
    if (name == "acrobot") return acrobot_model();
    if (name == "cartpole_sparse") return cartpole_model();
    if (name == "pendulum_sparse") return pendulum_model();
    throw std::invalid_argument("scripted_expert: unknown env '" + name + "'");
}

/// Value iteration over the snapped grid dynamics.
std::vector<double> solve_grid_values(const ExpertModel& m) {
    const long cells = m.grid.cells();
    const int num_actions = static_cast<int>(m.actions.size());

    std::vector<char> absorbing(cells);
    std::vector<long> next(cells * num_actions);
    std::vector<double> cost(cells * num_actions);
    const double step_discount = std::pow(m.discount, m.plan_repeat);
    for (long c = 0; c < cells; ++c) {
        const std::vector<double> x = m.grid.center_of(c);
        absorbing[c] = m.absorbing(x) ? 1 : 0;
        for (int a = 0; a < num_actions; ++a) {
            std::vector<double> nx = m.step(x, a);
            double transition_cost = m.entry_cost(nx);
            for (int r = 1; r < m.plan_repeat && !m.absorbing(nx); ++r) {
                nx = m.step(nx, a);
                transition_cost += m.entry_cost(nx);
            }
            next[c * num_actions + a] = m.grid.cell_of(nx);
            cost[c * num_actions + a] = transition_cost;
        }
    }

    // Two-array sweeps make cells that reach the absorbing set converge
    // exactly after path-length many sweeps; only cells that never reach it
    // keep contracting geometrically, and their residual at the cap is far
    // below any greedy decision margin.
    std::vector<double> v(cells, 0.0), v_new(cells);
    const int max_sweeps = 900;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double diff = 0.0;
        for (long c = 0; c < cells; ++c) {
            if (absorbing[c]) {
                v_new[c] = 0.0;
                continue;
            }
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a < num_actions; ++a) {
                const long j = c * num_actions + a;
                const long nc = next[j];
                const double q = cost[j] + step_discount * (absorbing[nc] ? 0.0 : v[nc]);
                best = std::min(best, q);
            }
            v_new[c] = best;
            diff = std::max(diff, std::abs(v_new[c] - v[c]));
        }
        v.swap(v_new);
        if (diff < 1e-9) return v;
    }
    return v;
}

class GridExpert final : public Policy {
  public:
    GridExpert(ExpertModel model, ActionSpace space, double degrade_prob)
        : model_(std::move(model)),
          space_(std::move(space)),
          degrade_prob_(degrade_prob),
          values_(solve_grid_values(model_)) {
        if (degrade_prob_ < 0.0 || degrade_prob_ > 1.0)
            throw std::invalid_argument("scripted_expert: degrade_prob must be in [0, 1]");
    }

    Action act(const std::vector<double>& observation, Rng& rng) const override {
        if (degrade_prob_ > 0.0 && rng.uniform() < degrade_prob_) {
            if (space_.kind == ActionSpace::Kind::discrete)
                return Action::discrete(rng.uniform_int(space_.count));
            std::vector<double> a(space_.low.size());
            for (size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(space_.low[i], space_.high[i]);
            return Action::continuous(std::move(a));
        }
        return model_.actions[greedy_index(observation)];
    }

    double action_log_prob(const std::vector<double>& observation,
                           const Action& action) const override {
        if (space_.kind != ActionSpace::Kind::discrete)
            throw std::logic_error("scripted_expert: no density for continuous experts");
        const int greedy = greedy_index(observation);
        const double mass = degrade_prob_ / space_.count +
                            (action.index == model_.actions[greedy].index ? 1.0 - degrade_prob_ : 0.0);
        return std::log(mass);
    }

    bool deterministic() const override { return degrade_prob_ == 0.0; }

  private:
    /// Best achievable planning cost from x within depth steps of the true
    /// dynamics, closing with the grid values.
    double search(const std::vector<double>& x, int depth) const {
        double best = std::numeric_limits<double>::infinity();
        for (size_t a = 0; a < model_.actions.size(); ++a) {
            const std::vector<double> nx = model_.step(x, static_cast<int>(a));
            double tail = 0.0;
            if (!model_.absorbing(nx))
                tail = depth > 1 ? search(nx, depth - 1) : values_[model_.grid.cell_of(nx)];
            best = std::min(best, model_.entry_cost(nx) + model_.discount * tail);
        }
        return best;
    }

    /// Lookahead on the true dynamics against the grid values.
    int greedy_index(const std::vector<double>& x) const {
        if (model_.absorbing(x)) return 0;
        int best_action = 0;
        double best = std::numeric_limits<double>::infinity();
        for (size_t a = 0; a < model_.actions.size(); ++a) {
            const std::vector<double> nx = model_.step(x, static_cast<int>(a));
            double tail = 0.0;
            if (!model_.absorbing(nx))
                tail = model_.lookahead_depth > 1 ? search(nx, model_.lookahead_depth - 1)
                                                  : values_[model_.grid.cell_of(nx)];
            const double q = model_.entry_cost(nx) + model_.discount * tail;
            if (q < best) {
                best = q;
                best_action = static_cast<int>(a);
            }
        }
        return best_action;
    }

    ExpertModel model_;
    ActionSpace space_;
    double degrade_prob_;
    std::vector<double> values_;
};

} // namespace

double wrap_angle(double theta) {
    double w = std::fmod(theta + kPi, 2.0 * kPi);
    if (w < 0.0) w += 2.0 * kPi;
    return w - kPi;
}

MountainCarState mountain_car_step(const MountainCarState& s, int action) {
    check_discrete_3(action, "mountain_car");
    MountainCarState n;
    n.velocity = s.velocity + (action - 1) * kMcForce - std::cos(3.0 * s.position) * kMcGravity;
    n.velocity = std::clamp(n.velocity, -kMcMaxSpeed, kMcMaxSpeed);
    n.position = std::clamp(s.position + n.velocity, kMcMinPos, kMcMaxPos);
    if (n.position <= kMcMinPos && n.velocity < 0.0) n.velocity = 0.0;
    return n;
}

AcrobotState acrobot_step(const AcrobotState& s, int action) {
    check_discrete_3(action, "acrobot");
    const double torque = static_cast<double>(action - 1);
    std::array<double, 4> y{s.theta1, s.theta2, s.dtheta1, s.dtheta2};
    for (int i = 0; i < kAcSubsteps; ++i) y = rk4_substep(y, torque, kAcDt);
    AcrobotState n;
    n.theta1 = wrap_angle(y[0]);
    n.theta2 = wrap_angle(y[1]);
    n.dtheta1 = std::clamp(y[2], -kAcMaxVel1, kAcMaxVel1);
    n.dtheta2 = std::clamp(y[3], -kAcMaxVel2, kAcMaxVel2);
    return n;
}

double acrobot_energy(const AcrobotState& s) {
    const double m = kAcLinkMass, l1 = kAcLinkLength, lc = kAcLinkCom;
    const double inertia = kAcLinkInertia, g = kAcGravity;
    const double w1 = s.dtheta1, w2 = s.dtheta1 + s.dtheta2;
    const double kinetic = 0.5 * (m * lc * lc + inertia) * w1 * w1 +
                           0.5 * m *
                               (l1 * l1 * w1 * w1 + lc * lc * w2 * w2 +
                                2.0 * l1 * lc * w1 * w2 * std::cos(s.theta2)) +
                           0.5 * inertia * w2 * w2;
    const double potential =
        -g * (m * lc * std::cos(s.theta1) +
              m * (l1 * std::cos(s.theta1) + lc * std::cos(s.theta1 + s.theta2)));
    return kinetic + potential;
}

CartpoleState cartpole_step(const CartpoleState& s, double force) {
    const double total_mass = kCpCartMass + kCpPoleMass;
    const double pole_ml = kCpPoleMass * kCpPoleHalfLength;
    const double ct = std::cos(s.theta), st = std::sin(s.theta);
    const double temp = (force + pole_ml * s.theta_dot * s.theta_dot * st) / total_mass;
    const double theta_acc = (kCpGravity * st - ct * temp) /
                             (kCpPoleHalfLength * (4.0 / 3.0 - kCpPoleMass * ct * ct / total_mass));
    const double x_acc = temp - pole_ml * theta_acc * ct / total_mass;
    CartpoleState n;
    n.x = s.x + kCpDt * s.x_dot;
    n.x_dot = s.x_dot + kCpDt * x_acc;
    n.theta = s.theta + kCpDt * s.theta_dot;
    n.theta_dot = s.theta_dot + kCpDt * theta_acc;
    return n;
}

PendulumState pendulum_step(const PendulumState& s, double torque) {
    const double u = std::clamp(torque, -kPdMaxTorque, kPdMaxTorque);
    PendulumState n;
    n.theta_dot = s.theta_dot + (3.0 * kPdGravity / (2.0 * kPdLength) * std::sin(s.theta) +
                                 3.0 / (kPdMass * kPdLength * kPdLength) * u) *
                                    kPdDt;
    n.theta_dot = std::clamp(n.theta_dot, -kPdMaxSpeed, kPdMaxSpeed);
    n.theta = wrap_angle(s.theta + n.theta_dot * kPdDt);
    return n;
}

std::unique_ptr<EnvInterface> make_env(const std::string& name, int horizon) {
    if (name == "mountain_car") return std::make_unique<MountainCarEnv>(horizon);
    if (name == "acrobot") return std::make_unique<AcrobotEnv>(horizon);
    if (name == "cartpole_sparse") return std::make_unique<CartpoleSparseEnv>(horizon);
    if (name == "pendulum_sparse") return std::make_unique<PendulumSparseEnv>(horizon);
    throw std::invalid_argument("make_env: unknown env '" + name + "'");
}

std::pair<std::vector<double>, std::vector<double>> observation_bounds(const std::string& name) {
    if (name == "mountain_car")
        return {{kMcMinPos, -kMcMaxSpeed}, {kMcMaxPos, kMcMaxSpeed}};
    if (name == "acrobot")
        return {{-kPi, -kPi, -kAcMaxVel1, -kAcMaxVel2}, {kPi, kPi, kAcMaxVel1, kAcMaxVel2}};
    if (name == "cartpole_sparse")
        return {{-2.0 * kCpFailX, -kCpMaxVel, -2.0 * kCpFailTheta, -kCpMaxVel},
                {2.0 * kCpFailX, kCpMaxVel, 2.0 * kCpFailTheta, kCpMaxVel}};
    if (name == "pendulum_sparse")
        return {{-kPi, -kPdMaxSpeed}, {kPi, kPdMaxSpeed}};
    throw std::invalid_argument("observation_bounds: unknown env '" + name + "'");
}

std::unique_ptr<Policy> scripted_expert(const std::string& name, double degrade_prob) {
    ExpertModel model = expert_model(name);
    ActionSpace space = name == "pendulum_sparse"
                            ? ActionSpace::make_box({-kPdMaxTorque}, {kPdMaxTorque})
                            : ActionSpace::make_discrete(static_cast<int>(model.actions.size()));
    return std::make_unique<GridExpert>(std::move(model), std::move(space), degrade_prob);
}

} // namespace thor
