#include "thor/shaping.hpp"

#include <cmath>
#include <stdexcept>

namespace thor {

TablePotential::TablePotential(std::vector<double> values, PotentialSource source)
    : values_(std::move(values)), source_(source) {
    if (values_.empty()) throw std::invalid_argument("TablePotential: empty table");
    for (double v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("TablePotential: non-finite value");
}

TablePotential::TablePotential(const Eigen::VectorXd& values, PotentialSource source)
    : TablePotential(std::vector<double>(values.data(), values.data() + values.size()), source) {}

double TablePotential::at(int state) const {
    if (state < 0 || state >= num_states())
        throw std::out_of_range("TablePotential: state index out of range");
    return values_[state];
}

double TablePotential::evaluate(const std::vector<double>& state) const {
    if (state.size() != 1)
        throw std::invalid_argument("TablePotential: expected a single-component state index");
    return at(static_cast<int>(state[0]));
}

double shape_cost(double cost, const Potential& phi, double discount,
                  const std::vector<double>& state, const std::vector<double>& next_state) {
    const double phi_s = phi.evaluate(state);
    const double phi_next = phi.evaluate(next_state);
    if (!std::isfinite(phi_s) || !std::isfinite(phi_next))
        throw std::domain_error("shape_cost: potential is non-finite");
    return cost + discount * phi_next - phi_s;
}

void reshape_trajectory(Trajectory& traj, const Potential& phi, double discount) {
    for (TransitionRecord& rec : traj.records) {
        if (!rec.next_state)
            throw std::invalid_argument("reshape_trajectory: record lacks next_state");
        rec.shaped_cost = shape_cost(rec.cost, phi, discount, rec.state, *rec.next_state);
    }
}

std::pair<double, double> telescoping_check(const Trajectory& traj, const Potential& phi,
                                            double discount) {
    if (traj.records.empty())
        throw std::invalid_argument("telescoping_check: empty trajectory");
    if (!traj.records.back().next_state)
        throw std::invalid_argument("telescoping_check: final record lacks next_state");
    double lhs = 0.0, raw = 0.0, scale = 1.0;
    for (const TransitionRecord& rec : traj.records) {
        if (!rec.shaped_cost)
            throw std::invalid_argument("telescoping_check: shaped costs not filled");
        lhs += scale * *rec.shaped_cost;
        raw += scale * rec.cost;
        scale *= discount;
    }
    // scale is now discount^T.
    const double rhs = raw - phi.evaluate(traj.records.front().state) +
                       scale * phi.evaluate(*traj.records.back().next_state);
    return {lhs, rhs};
}

TabularMdp shaped_mdp(const TabularMdp& base, const Potential& phi) {
    base.validate();
    TabularMdp out = base;
    Eigen::VectorXd phi_vec(base.num_states);
    for (int s = 0; s < base.num_states; ++s) {
        phi_vec(s) = phi.evaluate({static_cast<double>(s)});
        if (!std::isfinite(phi_vec(s)))
            throw std::domain_error("shaped_mdp: potential is non-finite at state " +
                                    std::to_string(s));
    }
    for (int a = 0; a < base.num_actions; ++a)
        out.cost_mean.col(a) =
            base.cost_mean.col(a) + base.discount * (base.transition[a] * phi_vec) - phi_vec;
    return out;
}

} // namespace thor
