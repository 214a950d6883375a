#ifndef THOR_SHAPING_HPP
#define THOR_SHAPING_HPP

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "thor/env.hpp"
#include "thor/mdp.hpp"

namespace thor {

enum class PotentialSource { exact_optimal, td_fitted, mc_fitted, perturbed, zero, custom };

/// State-dependent potential used to reshape costs. Must evaluate to a
/// finite value on every state it is queried at.
class Potential {
  public:
    virtual ~Potential() = default;
    virtual double evaluate(const std::vector<double>& state) const = 0;
    virtual PotentialSource source() const = 0;
};

/// Potential backed by a per-state table; states are single-component index
/// observations as produced by TabularEnv.
class TablePotential : public Potential {
  public:
    TablePotential(std::vector<double> values, PotentialSource source);
    TablePotential(const Eigen::VectorXd& values, PotentialSource source);

    double evaluate(const std::vector<double>& state) const override;
    PotentialSource source() const override { return source_; }

    double at(int state) const;
    int num_states() const { return static_cast<int>(values_.size()); }
    const std::vector<double>& values() const { return values_; }

  private:
    std::vector<double> values_;
    PotentialSource source_;
};

/// Identically-zero potential; shaping with it leaves costs untouched.
class ZeroPotential : public Potential {
  public:
    double evaluate(const std::vector<double>&) const override { return 0.0; }
    PotentialSource source() const override { return PotentialSource::zero; }
};

/// Potential from an arbitrary callable (used in tests and for wrapping
/// learned value estimators).
class FunctionPotential : public Potential {
  public:
    FunctionPotential(std::function<double(const std::vector<double>&)> fn,
                      PotentialSource source = PotentialSource::custom)
        : fn_(std::move(fn)), source_(source) {}

    double evaluate(const std::vector<double>& state) const override { return fn_(state); }
    PotentialSource source() const override { return source_; }

  private:
    std::function<double(const std::vector<double>&)> fn_;
    PotentialSource source_;
};

/// One-step cost reshape:
///   c'(s, a) = c(s, a) + discount * phi(s') - phi(s).
/// Throws std::domain_error if the potential is non-finite at either state.
double shape_cost(double cost, const Potential& phi, double discount,
                  const std::vector<double>& state, const std::vector<double>& next_state);

/// Fills shaped_cost on every record, leaving raw costs untouched. Throws
/// std::invalid_argument if any record lacks next_state.
void reshape_trajectory(Trajectory& traj, const Potential& phi, double discount);

/// Both sides of the shaped-return identity for one trajectory:
///   lhs = sum_t discount^(t-1) * c'_t
///   rhs = sum_t discount^(t-1) * c_t - phi(s_1) + discount^T * phi(s_{T+1})
/// Requires shaped costs filled and a next_state on the final record.
std::pair<double, double> telescoping_check(const Trajectory& traj, const Potential& phi,
                                            double discount);

/// Tabular MDP with analytically reshaped mean costs,
///   c'(s, a) = c(s, a) + discount * E[phi(s') | s, a] - phi(s),
/// same transitions, noise, and initial distribution. The potential is read
/// per state index.
TabularMdp shaped_mdp(const TabularMdp& base, const Potential& phi);

} // namespace thor

#endif
