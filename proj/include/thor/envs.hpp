#ifndef THOR_ENVS_HPP
#define THOR_ENVS_HPP

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "thor/env.hpp"
#include "thor/policy.hpp"

namespace thor {

/// Physical states, exposed so the dynamics can be driven directly in tests.
struct MountainCarState {
    double position = 0.0;
    double velocity = 0.0;
};

struct AcrobotState {
    double theta1 = 0.0; // both angles from the downward vertical
    double theta2 = 0.0;
    double dtheta1 = 0.0;
    double dtheta2 = 0.0;
};

struct CartpoleState {
    double x = 0.0;
    double x_dot = 0.0;
    double theta = 0.0; // from upright
    double theta_dot = 0.0;
};

struct PendulumState {
    double theta = 0.0; // from upright
    double theta_dot = 0.0;
};

/// Wrap an angle into [-pi, pi).
double wrap_angle(double theta);

/// One deterministic dynamics step per task, no cost or termination logic.
/// Mountain car, cartpole and pendulum use the standard Euler /
/// semi-implicit Euler stepping; the acrobot integrates with fourth-order
/// Runge-Kutta in four substeps, since Euler at this timestep drifts far too
/// much to conserve energy over a hundred steps. Angles come back wrapped
/// and angular rates clipped to the declared state bounds.
MountainCarState mountain_car_step(const MountainCarState& s, int action);
AcrobotState acrobot_step(const AcrobotState& s, int action);
CartpoleState cartpole_step(const CartpoleState& s, double force);
PendulumState pendulum_step(const PendulumState& s, double torque);

/// Mechanical energy of the acrobot, the conserved quantity of its
/// torque-free dynamics.
double acrobot_energy(const AcrobotState& s);

/// Environment registry: mountain_car, acrobot, cartpole_sparse,
/// pendulum_sparse. Throws std::invalid_argument for unknown names.
std::unique_ptr<EnvInterface> make_env(const std::string& name, int horizon);

/// Declared observation box of an env. Emitted observations always lie
/// inside it after wrapping and clipping.
std::pair<std::vector<double>, std::vector<double>> observation_bounds(const std::string& name);

/// Expert policy from value iteration on a grid-discretized deterministic
/// model of the task; at act time it takes the one-step lookahead over the
/// grid values using the true dynamics. With probability degrade_prob the
/// chosen action is replaced by a uniform draw from the action space, so
/// degrade_prob 0 is the plain expert and 1 a uniform random policy.
/// Continuous-action experts expose sampling only; their action_log_prob
/// throws std::logic_error.
std::unique_ptr<Policy> scripted_expert(const std::string& name, double degrade_prob = 0.0);

} // namespace thor

#endif
