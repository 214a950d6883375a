#include "thor/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "thor/trajectory_io.hpp"

namespace thor {

namespace {

const char* source_tag(PotentialSource source) {
    switch (source) {
        case PotentialSource::exact_optimal: return "exact_optimal";
        case PotentialSource::td_fitted: return "td_fitted";
        case PotentialSource::mc_fitted: return "mc_fitted";
        case PotentialSource::perturbed: return "perturbed";
        case PotentialSource::zero: return "zero";
        case PotentialSource::custom: return "custom";
    }
    throw std::logic_error("source_tag: unhandled source");
}

PotentialSource source_from_tag(const std::string& tag) {
    if (tag == "exact_optimal") return PotentialSource::exact_optimal;
    if (tag == "td_fitted") return PotentialSource::td_fitted;
    if (tag == "mc_fitted") return PotentialSource::mc_fitted;
    if (tag == "perturbed") return PotentialSource::perturbed;
    if (tag == "zero") return PotentialSource::zero;
    if (tag == "custom") return PotentialSource::custom;
    throw std::runtime_error("load_oracle: unknown source tag '" + tag + "'");
}

bool integral_index(const std::vector<double>& state) {
    if (state.size() != 1 || !std::isfinite(state[0])) return false;
    const double r = std::round(state[0]);
    return std::abs(state[0] - r) <= 1e-12 && r >= 0.0;
}

int state_index(const std::vector<double>& state) {
    return static_cast<int>(std::llround(state[0]));
}

/// Table size needed for integer-index demos, or -1 if any state is not a
/// plain non-negative integer index.
int tabular_state_count(const DemoSet& demos) {
    int max_index = -1;
    for (const auto& traj : demos.trajectories) {
        for (const auto& rec : traj.records) {
            if (!integral_index(rec.state)) return -1;
            max_index = std::max(max_index, state_index(rec.state));
            if (rec.next_state) {
                if (!integral_index(*rec.next_state)) return -1;
                max_index = std::max(max_index, state_index(*rec.next_state));
            }
        }
    }
    return max_index + 1;
}

void check_td_options(const TdOptions& opt, double discount) {
    if (!(discount > 0.0 && discount <= 1.0))
        throw std::invalid_argument("fit_td: discount must be in (0, 1]");
    if (!(opt.lambda >= 0.0 && opt.lambda <= 1.0))
        throw std::invalid_argument("fit_td: lambda must be in [0, 1]");
    if (opt.lr <= 0.0) throw std::invalid_argument("fit_td: lr must be positive");
    if (opt.epochs < 1) throw std::invalid_argument("fit_td: epochs must be >= 1");
    if (!(opt.validation_fraction >= 0.0 && opt.validation_fraction < 1.0))
        throw std::invalid_argument("fit_td: validation_fraction must be in [0, 1)");
    if (opt.patience < 1) throw std::invalid_argument("fit_td: patience must be >= 1");
    if (opt.hidden_width < 1) throw std::invalid_argument("fit_td: hidden_width must be >= 1");
}

void fisher_yates(std::vector<int>& items, Rng& rng) {
    for (int i = static_cast<int>(items.size()) - 1; i > 0; --i)
        std::swap(items[i], items[rng.uniform_int(i + 1)]);
}

/// Split episode indices into (train, validation), stratified by whether
/// the episode ends in a terminal event. Without stratification a validation
/// set of only truncated episodes scores the useless constant solution
/// V = c / (1 - discount) as a perfect fit (every bootstrapped residual
/// vanishes), and early stopping would select it. The validation set is
/// empty when the fraction is zero or there are fewer than two episodes.
std::pair<std::vector<int>, std::vector<int>> split_episodes(const DemoSet& demos,
                                                             double fraction, Rng& rng) {
    const int n = static_cast<int>(demos.trajectories.size());
    std::vector<int> terminal, truncated;
    for (int i = 0; i < n; ++i) {
        const auto& records = demos.trajectories[static_cast<size_t>(i)].records;
        (!records.empty() && records.back().done ? terminal : truncated).push_back(i);
    }
    std::vector<int> train, val;
    for (std::vector<int>* stratum : {&terminal, &truncated}) {
        fisher_yates(*stratum, rng);
        const int m = static_cast<int>(stratum->size());
        int n_val = 0;
        if (fraction > 0.0 && n >= 2 && m > 0)
            n_val = std::clamp(static_cast<int>(std::lround(fraction * m)), m > 1 ? 1 : 0,
                               m - 1);
        train.insert(train.end(), stratum->begin(), stratum->end() - n_val);
        val.insert(val.end(), stratum->end() - n_val, stratum->end());
    }
    return {std::move(train), std::move(val)};
}

/// A transition only counts for fitting if it has a bootstrap target:
/// terminal steps always do, non-terminal steps need the successor state
/// (absent on truncated tails loaded from disk).
bool usable_transition(const TransitionRecord& rec) {
    return rec.done || rec.next_state.has_value();
}

ValueOracle fit_td_tabular(const DemoSet& demos, int num_states, double discount,
                           const TdOptions& opt, Rng& rng) {
    std::vector<double> v(num_states, 0.0);
    std::vector<double> visits(num_states, 0.0);

    const int n = static_cast<int>(demos.trajectories.size());
    auto [train, val] = split_episodes(demos, opt.validation_fraction, rng);

    auto td0_loss = [&](const std::vector<int>& episodes) {
        double sum = 0.0;
        long count = 0;
        for (int ei : episodes) {
            for (const auto& rec : demos.trajectories[ei].records) {
                if (!usable_transition(rec)) continue;
                const double vn = rec.done ? 0.0 : v[state_index(*rec.next_state)];
                const double delta = rec.cost + discount * vn - v[state_index(rec.state)];
                sum += delta * delta;
                ++count;
            }
        }
        return count > 0 ? sum / static_cast<double>(count) : 0.0;
    };

    OracleFitReport report;
    std::vector<double> best_v = v;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int patience_left = opt.patience;

    std::vector<double> trace(num_states), pending(num_states);
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        fisher_yates(train, rng);
        for (int ei : train) {
            std::fill(trace.begin(), trace.end(), 0.0);
            std::fill(pending.begin(), pending.end(), 0.0);
            // Values stay frozen inside the episode; the accumulated update
            // lands at episode end, which makes the trace-based updates sum
            // to exactly the lambda-return residuals.
            for (const auto& rec : demos.trajectories[ei].records) {
                if (!usable_transition(rec)) continue;
                const int s = state_index(rec.state);
                const double vn = rec.done ? 0.0 : v[state_index(*rec.next_state)];
                const double delta = rec.cost + discount * vn - v[s];
                const double decay = discount * opt.lambda;
                for (int x = 0; x < num_states; ++x) trace[x] *= decay;
                trace[s] += 1.0;
                if (opt.inverse_visit_lr) visits[s] += 1.0;
                for (int x = 0; x < num_states; ++x) {
                    if (trace[x] == 0.0) continue;
                    const double lr = opt.inverse_visit_lr ? 1.0 / visits[x] : opt.lr;
                    pending[x] += lr * delta * trace[x];
                }
            }
            for (int x = 0; x < num_states; ++x) v[x] += pending[x];
        }

        report.epochs_run = epoch + 1;
        const double train_loss = td0_loss(train);
        report.train_epoch_loss.push_back(train_loss);
        if (!std::isfinite(train_loss))
            throw std::runtime_error("fit_td: loss became non-finite at epoch " +
                                     std::to_string(epoch + 1) + " (lr=" + std::to_string(opt.lr) +
                                     "); reduce the step size");
        if (!val.empty()) {
            const double val_loss = td0_loss(val);
            report.validation_epoch_loss.push_back(val_loss);
            if (val_loss < best_val_loss - 1e-12) {
                best_val_loss = val_loss;
                best_v = v;
                report.best_epoch = epoch;
                patience_left = opt.patience;
            } else if (--patience_left <= 0) {
                report.early_stopped = true;
                break;
            }
        }
    }

    if (!val.empty())
        v = best_v;
    else
        report.best_epoch = report.epochs_run - 1;

    ValueOracle oracle = ValueOracle::tabular(std::move(v), PotentialSource::td_fitted);
    oracle.fit_report = std::move(report);
    return oracle;
}

/// Fit-ready flattening of a set of episodes: states and successors as
/// sample columns, with a 0/1 continuation mask killing the bootstrap on
/// terminal steps (their successor column is a zero placeholder).
struct FlatTransitions {
    Eigen::MatrixXd x;
    Eigen::MatrixXd x_next;
    Eigen::VectorXd cost;
    Eigen::VectorXd not_done;

    long size() const { return cost.size(); }
};

/// Per-dimension mean and standard deviation over every state (and closing
/// successor) in the demos, deviations floored away from zero.
std::pair<Eigen::VectorXd, Eigen::VectorXd> demo_scaler(const DemoSet& demos, int dim) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);
    long count = 0;
    auto tally = [&](const std::vector<double>& state) {
        for (int d = 0; d < dim; ++d) {
            sum(d) += state[d];
            sum_sq(d) += state[d] * state[d];
        }
        ++count;
    };
    for (const auto& traj : demos.trajectories) {
        for (const auto& rec : traj.records) tally(rec.state);
        if (!traj.records.empty() && traj.records.back().next_state)
            tally(*traj.records.back().next_state);
    }
    Eigen::VectorXd shift = sum / static_cast<double>(count);
    Eigen::VectorXd scale =
        ((sum_sq / static_cast<double>(count)).array() - shift.array().square())
            .max(0.0)
            .sqrt()
            .max(1e-8)
            .matrix();
    return {std::move(shift), std::move(scale)};
}

void standardize(Eigen::MatrixXd& x, const Eigen::VectorXd& shift, const Eigen::VectorXd& scale) {
    x = (x.colwise() - shift).array().colwise() / scale.array();
}

FlatTransitions flatten(const DemoSet& demos, const std::vector<int>& episodes, int dim) {
    long total = 0;
    for (int ei : episodes)
        for (const auto& rec : demos.trajectories[ei].records)
            if (usable_transition(rec)) ++total;
    FlatTransitions flat;
    flat.x.resize(dim, total);
    flat.x_next.setZero(dim, total);
    flat.cost.resize(total);
    flat.not_done.resize(total);
    long j = 0;
    for (int ei : episodes) {
        for (const auto& rec : demos.trajectories[ei].records) {
            if (!usable_transition(rec)) continue;
            for (int d = 0; d < dim; ++d) flat.x(d, j) = rec.state[d];
            if (!rec.done)
                for (int d = 0; d < dim; ++d) flat.x_next(d, j) = (*rec.next_state)[d];
            flat.cost(j) = rec.cost;
            flat.not_done(j) = rec.done ? 0.0 : 1.0;
            ++j;
        }
    }
    return flat;
}

ValueOracle fit_td_network(const DemoSet& demos, double discount, const TdOptions& opt,
                           Rng& rng) {
    const int dim = demos.state_dim();
    MlpArch arch;
    arch.input_dim = dim;
    arch.hidden = {opt.hidden_width, opt.hidden_width};
    arch.output_dim = 1;
    arch.head = HeadType::scalar;
    Eigen::VectorXd theta = init_params(arch, rng);

    const auto [shift, scale] = demo_scaler(demos, dim);
    const int n = static_cast<int>(demos.trajectories.size());
    auto [train, val] = split_episodes(demos, opt.validation_fraction, rng);
    FlatTransitions train_flat = flatten(demos, train, dim);
    FlatTransitions val_flat = flatten(demos, val, dim);
    std::vector<FlatTransitions> episode_flat(static_cast<size_t>(n));
    for (int ei = 0; ei < n; ++ei) episode_flat[ei] = flatten(demos, {ei}, dim);
    for (FlatTransitions* flat : {&train_flat, &val_flat}) {
        standardize(flat->x, shift, scale);
        standardize(flat->x_next, shift, scale);
    }
    for (FlatTransitions& flat : episode_flat) {
        standardize(flat.x, shift, scale);
        standardize(flat.x_next, shift, scale);
    }
    if (train_flat.size() == 0) throw std::invalid_argument("fit_td: no usable transitions");

    auto td0_loss = [&](const FlatTransitions& flat) {
        if (flat.size() == 0) return 0.0;
        const Eigen::VectorXd vs = critic_value_batch(arch, theta, flat.x);
        const Eigen::VectorXd vn = critic_value_batch(arch, theta, flat.x_next);
        const Eigen::VectorXd delta =
            flat.cost + discount * (vn.array() * flat.not_done.array()).matrix() - vs;
        return delta.squaredNorm() / static_cast<double>(delta.size());
    };

    OracleFitReport report;
    Eigen::VectorXd best_theta = theta;
    double best_val_loss = std::numeric_limits<double>::infinity();
    double initial_loss = -1.0;
    int patience_left = opt.patience;

    const long p = arch.param_count();
    Eigen::VectorXd trace(p), pending(p);
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        fisher_yates(train, rng);
        for (int ei : train) {
            const FlatTransitions& ep = episode_flat[static_cast<size_t>(ei)];
            if (ep.size() == 0) continue;
            // Parameters stay frozen inside the episode, so both value
            // passes can run as one batch each.
            const Eigen::VectorXd vs = critic_value_batch(arch, theta, ep.x);
            const Eigen::VectorXd vn = critic_value_batch(arch, theta, ep.x_next);
            trace.setZero();
            pending.setZero();
            std::vector<double> obs(dim);
            for (long t = 0; t < ep.size(); ++t) {
                const double delta =
                    ep.cost(t) + discount * vn(t) * ep.not_done(t) - vs(t);
                for (int d = 0; d < dim; ++d) obs[d] = ep.x(d, t);
                trace = discount * opt.lambda * trace + critic_grad(arch, theta, obs);
                pending += opt.lr * delta * trace;
            }
            theta += pending;
        }

        report.epochs_run = epoch + 1;
        const double train_loss = td0_loss(train_flat);
        report.train_epoch_loss.push_back(train_loss);
        if (epoch == 0) initial_loss = train_loss;
        if (!std::isfinite(train_loss) || train_loss > 100.0 * (initial_loss + 1.0))
            throw std::runtime_error(
                "fit_td: training diverged at epoch " + std::to_string(epoch + 1) +
                " (loss=" + std::to_string(train_loss) + ", lr=" + std::to_string(opt.lr) +
                "); reduce the step size");
        if (!val.empty()) {
            const double val_loss = td0_loss(val_flat);
            report.validation_epoch_loss.push_back(val_loss);
            if (val_loss < best_val_loss - 1e-12) {
                best_val_loss = val_loss;
                best_theta = theta;
                report.best_epoch = epoch;
                patience_left = opt.patience;
            } else if (--patience_left <= 0) {
                report.early_stopped = true;
                break;
            }
        }
    }

    if (!val.empty())
        theta = best_theta;
    else
        report.best_epoch = report.epochs_run - 1;

    ValueOracle oracle =
        ValueOracle::network(arch, std::move(theta), PotentialSource::td_fitted, shift, scale);
    oracle.fit_report = std::move(report);
    return oracle;
}

/// Per-record discounted returns-to-go, every visit. Truncated episodes
/// contribute their partial sums.
void returns_to_go(const Trajectory& traj, double discount, std::vector<double>& out) {
    const long t_count = static_cast<long>(traj.records.size());
    out.resize(t_count);
    double g = 0.0;
    for (long t = t_count - 1; t >= 0; --t) {
        g = traj.records[t].cost + discount * g;
        out[t] = g;
    }
}

} // namespace

int DemoSet::state_dim() const {
    if (trajectories.empty() || trajectories.front().records.empty())
        throw std::invalid_argument("DemoSet::state_dim: no demonstrations");
    return static_cast<int>(trajectories.front().records.front().state.size());
}

void DemoSet::validate() const {
    if (trajectories.empty()) throw std::invalid_argument("DemoSet: no trajectories");
    const int dim = state_dim();
    const bool discrete = trajectories.front().records.front().action.is_discrete();
    for (const auto& traj : trajectories) {
        traj.validate();
        for (const auto& rec : traj.records) {
            if (static_cast<int>(rec.state.size()) != dim)
                throw std::invalid_argument("DemoSet: inconsistent state dimension");
            if (rec.next_state && static_cast<int>(rec.next_state->size()) != dim)
                throw std::invalid_argument("DemoSet: inconsistent successor dimension");
            if (rec.action.is_discrete() != discrete)
                throw std::invalid_argument("DemoSet: mixed action kinds");
        }
    }
}

ValueOracle ValueOracle::tabular(std::vector<double> values, PotentialSource source) {
    if (values.empty()) throw std::invalid_argument("ValueOracle: empty value table");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("ValueOracle: non-finite table value");
    ValueOracle oracle;
    oracle.is_tabular_ = true;
    oracle.table_ = std::move(values);
    oracle.source_ = source;
    return oracle;
}

ValueOracle ValueOracle::network(MlpArch arch, Eigen::VectorXd params, PotentialSource source,
                                 Eigen::VectorXd input_shift, Eigen::VectorXd input_scale) {
    if (arch.head != HeadType::scalar || arch.output_dim != 1)
        throw std::invalid_argument("ValueOracle: network backing must be a scalar head");
    if (params.size() != arch.param_count())
        throw std::invalid_argument("ValueOracle: parameter count mismatch");
    if (input_shift.size() != input_scale.size())
        throw std::invalid_argument("ValueOracle: shift/scale size mismatch");
    if (input_shift.size() != 0) {
        if (input_shift.size() != arch.input_dim)
            throw std::invalid_argument("ValueOracle: standardizer does not match input_dim");
        if (!(input_scale.array() > 0.0).all())
            throw std::invalid_argument("ValueOracle: input_scale entries must be positive");
    }
    ValueOracle oracle;
    oracle.is_tabular_ = false;
    oracle.arch_ = std::move(arch);
    oracle.params_ = std::move(params);
    oracle.shift_ = std::move(input_shift);
    oracle.scale_ = std::move(input_scale);
    oracle.source_ = source;
    return oracle;
}

double ValueOracle::evaluate(const std::vector<double>& state) const {
    if (is_tabular_) {
        if (!integral_index(state))
            throw std::invalid_argument("ValueOracle: tabular backing needs an integer index state");
        const int s = state_index(state);
        if (s >= static_cast<int>(table_.size()))
            throw std::out_of_range("ValueOracle: state index " + std::to_string(s) +
                                    " outside table of size " + std::to_string(table_.size()));
        return table_[s];
    }
    if (shift_.size() == 0) return critic_value(arch_, params_, state);
    if (static_cast<long>(state.size()) != shift_.size())
        throw std::invalid_argument("ValueOracle: state dimension mismatch");
    std::vector<double> z(state.size());
    for (size_t d = 0; d < state.size(); ++d) z[d] = (state[d] - shift_(d)) / scale_(d);
    return critic_value(arch_, params_, z);
}

const std::vector<double>& ValueOracle::table() const {
    if (!is_tabular_) throw std::logic_error("ValueOracle::table: network backing");
    return table_;
}

const MlpArch& ValueOracle::arch() const {
    if (is_tabular_) throw std::logic_error("ValueOracle::arch: tabular backing");
    return arch_;
}

const Eigen::VectorXd& ValueOracle::params() const {
    if (is_tabular_) throw std::logic_error("ValueOracle::params: tabular backing");
    return params_;
}

const Eigen::VectorXd& ValueOracle::input_shift() const {
    if (is_tabular_) throw std::logic_error("ValueOracle::input_shift: tabular backing");
    return shift_;
}

const Eigen::VectorXd& ValueOracle::input_scale() const {
    if (is_tabular_) throw std::logic_error("ValueOracle::input_scale: tabular backing");
    return scale_;
}

ValueOracle fit_td(const DemoSet& demos, double discount, const TdOptions& options, Rng& rng) {
    demos.validate();
    check_td_options(options, discount);
    const int num_states = tabular_state_count(demos);
    if (num_states > 0) return fit_td_tabular(demos, num_states, discount, options, rng);
    return fit_td_network(demos, discount, options, rng);
}

ValueOracle fit_mc(const DemoSet& demos, double discount, const McOptions& options, Rng& rng) {
    demos.validate();
    if (!(discount > 0.0 && discount <= 1.0))
        throw std::invalid_argument("fit_mc: discount must be in (0, 1]");
    if (options.epochs < 1) throw std::invalid_argument("fit_mc: epochs must be >= 1");
    if (options.lr <= 0.0) throw std::invalid_argument("fit_mc: lr must be positive");
    if (options.hidden_width < 1) throw std::invalid_argument("fit_mc: hidden_width must be >= 1");

    const int num_states = tabular_state_count(demos);
    std::vector<double> g;
    if (num_states > 0) {
        std::vector<double> sum(num_states, 0.0), count(num_states, 0.0);
        for (const auto& traj : demos.trajectories) {
            returns_to_go(traj, discount, g);
            for (size_t t = 0; t < traj.records.size(); ++t) {
                const int s = state_index(traj.records[t].state);
                sum[s] += g[t];
                count[s] += 1.0;
            }
        }
        std::vector<double> v(num_states, 0.0);
        for (int s = 0; s < num_states; ++s)
            if (count[s] > 0.0) v[s] = sum[s] / count[s];
        return ValueOracle::tabular(std::move(v), PotentialSource::mc_fitted);
    }

    const int dim = demos.state_dim();
    long total = 0;
    for (const auto& traj : demos.trajectories) total += static_cast<long>(traj.records.size());
    Eigen::MatrixXd x(dim, total);
    Eigen::VectorXd targets(total);
    long j = 0;
    for (const auto& traj : demos.trajectories) {
        returns_to_go(traj, discount, g);
        for (size_t t = 0; t < traj.records.size(); ++t, ++j) {
            for (int d = 0; d < dim; ++d) x(d, j) = traj.records[t].state[d];
            targets(j) = g[t];
        }
    }
    const auto [shift, scale] = demo_scaler(demos, dim);
    standardize(x, shift, scale);

    MlpArch arch;
    arch.input_dim = dim;
    arch.hidden = {options.hidden_width, options.hidden_width};
    arch.output_dim = 1;
    arch.head = HeadType::scalar;
    Eigen::VectorXd theta = init_params(arch, rng);
    const FitReport fit = critic_fit(arch, theta, x, targets, options.epochs, options.lr);

    ValueOracle oracle = ValueOracle::network(std::move(arch), std::move(theta),
                                              PotentialSource::mc_fitted, shift, scale);
    oracle.fit_report.train_epoch_loss = fit.epoch_mse;
    oracle.fit_report.epochs_run = static_cast<int>(fit.epoch_mse.size());
    oracle.fit_report.best_epoch = fit.best_epoch;
    return oracle;
}

ValueOracle perturb_oracle(const Eigen::VectorXd& values, double epsilon, PerturbMode mode,
                           Rng& rng) {
    if (values.size() == 0) throw std::invalid_argument("perturb_oracle: empty value vector");
    if (epsilon < 0.0) throw std::invalid_argument("perturb_oracle: epsilon must be >= 0");
    std::vector<double> out(static_cast<size_t>(values.size()));
    if (mode == PerturbMode::uniform) {
        for (long i = 0; i < values.size(); ++i) out[i] = values(i) + rng.uniform(-epsilon, epsilon);
    } else {
        const double mid = (values.minCoeff() + values.maxCoeff()) / 2.0;
        for (long i = 0; i < values.size(); ++i)
            out[i] = values(i) + (values(i) <= mid ? epsilon : -epsilon);
    }
    return ValueOracle::tabular(std::move(out), PotentialSource::perturbed);
}

double oracle_error(const ValueOracle& oracle, const Eigen::VectorXd& reference) {
    if (!oracle.is_tabular())
        throw std::domain_error("oracle_error: network backing, use oracle_error_sampled");
    const auto& table = oracle.table();
    if (static_cast<long>(table.size()) != reference.size())
        throw std::invalid_argument("oracle_error: size mismatch");
    double worst = 0.0;
    for (long s = 0; s < reference.size(); ++s)
        worst = std::max(worst, std::abs(table[s] - reference(s)));
    return worst;
}

double oracle_error_sampled(const ValueOracle& oracle,
                            const std::vector<std::vector<double>>& states,
                            const std::vector<double>& reference) {
    if (states.size() != reference.size())
        throw std::invalid_argument("oracle_error_sampled: size mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < states.size(); ++i)
        worst = std::max(worst, std::abs(oracle.evaluate(states[i]) - reference[i]));
    return worst;
}

void save_oracle(const std::string& path, const ValueOracle& oracle) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_oracle: cannot open " + path);
    out << "kind=" << (oracle.is_tabular() ? "tabular" : "network")
        << ",source=" << source_tag(oracle.source()) << "\n";
    if (oracle.is_tabular()) {
        const auto& table = oracle.table();
        for (size_t s = 0; s < table.size(); ++s)
            out << s << "," << format_double(table[s]) << "\n";
    } else {
        out << arch_to_string(oracle.arch()) << "\n";
        const auto& shift = oracle.input_shift();
        const auto& scale = oracle.input_scale();
        out << "shift";
        for (long d = 0; d < shift.size(); ++d) out << "," << format_double(shift(d));
        out << "\nscale";
        for (long d = 0; d < scale.size(); ++d) out << "," << format_double(scale(d));
        out << "\n";
        const auto& params = oracle.params();
        for (long i = 0; i < params.size(); ++i) out << format_double(params(i)) << "\n";
    }
    if (!out) throw std::runtime_error("save_oracle: write failed for " + path);
}

ValueOracle load_oracle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_oracle: cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("load_oracle: empty file " + path);

    std::string kind, source;
    std::istringstream hs(header);
    std::string part;
    while (std::getline(hs, part, ',')) {
        const size_t eq = part.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("load_oracle: malformed header '" + header + "'");
        const std::string key = part.substr(0, eq), value = part.substr(eq + 1);
        if (key == "kind") kind = value;
        else if (key == "source") source = value;
        else throw std::runtime_error("load_oracle: unknown header key '" + key + "'");
    }

    if (kind == "tabular") {
        std::vector<double> values;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const size_t comma = line.find(',');
            if (comma == std::string::npos)
                throw std::runtime_error("load_oracle: malformed table line '" + line + "'");
            const long index = std::stol(line.substr(0, comma));
            if (index != static_cast<long>(values.size()))
                throw std::runtime_error("load_oracle: table rows must be 0..n-1 in order");
            char* end = nullptr;
            const std::string num = line.substr(comma + 1);
            const double v = std::strtod(num.c_str(), &end);
            if (end == num.c_str())
                throw std::runtime_error("load_oracle: bad table value '" + num + "'");
            values.push_back(v);
        }
        return ValueOracle::tabular(std::move(values), source_from_tag(source));
    }
    if (kind == "network") {
        std::string arch_line;
        if (!std::getline(in, arch_line))
            throw std::runtime_error("load_oracle: missing architecture line");
        const MlpArch arch = arch_from_string(arch_line);
        auto read_scaler_line = [&](const std::string& label) {
            std::string line;
            if (!std::getline(in, line) || line.rfind(label, 0) != 0)
                throw std::runtime_error("load_oracle: missing " + label + " line");
            Eigen::VectorXd values(arch.input_dim);
            long d = 0;
            std::istringstream ls(line.substr(label.size()));
            std::string field;
            while (std::getline(ls, field, ',')) {
                if (field.empty()) continue; // leading separator
                if (d >= values.size())
                    throw std::runtime_error("load_oracle: too many " + label + " entries");
                char* end = nullptr;
                values(d++) = std::strtod(field.c_str(), &end);
                if (end == field.c_str())
                    throw std::runtime_error("load_oracle: bad " + label + " entry");
            }
            if (d != 0 && d != values.size())
                throw std::runtime_error("load_oracle: " + label + " entry count mismatch");
            if (d == 0) values.resize(0); // bare label means no standardizer
            return values;
        };
        Eigen::VectorXd shift = read_scaler_line("shift");
        Eigen::VectorXd scale = read_scaler_line("scale");
        Eigen::VectorXd params(arch.param_count());
        std::string line;
        long i = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (i >= params.size()) throw std::runtime_error("load_oracle: too many parameters");
            char* end = nullptr;
            params(i++) = std::strtod(line.c_str(), &end);
            if (end == line.c_str()) throw std::runtime_error("load_oracle: bad parameter line");
        }
        if (i != params.size())
            throw std::runtime_error("load_oracle: expected " + std::to_string(params.size()) +
                                     " parameters, found " + std::to_string(i));
        return ValueOracle::network(arch, std::move(params), source_from_tag(source),
                                    std::move(shift), std::move(scale));
    }
    throw std::runtime_error("load_oracle: unknown kind '" + kind + "'");
}

} // namespace thor
