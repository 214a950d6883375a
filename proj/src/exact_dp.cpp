#include "thor/exact_dp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "thor/trajectory_io.hpp"

namespace thor {

namespace {

Eigen::VectorXd potential_table(const Potential& phi, int num_states) {
    Eigen::VectorXd values(num_states);
    for (int s = 0; s < num_states; ++s) values(s) = phi.evaluate({static_cast<double>(s)});
    return values;
}

// Row-stochastic matrix and cost vector of the Markov chain a policy induces.
void induced_chain(const TabularMdp& mdp, const TabularPolicy& policy, Eigen::MatrixXd& P_pi,
                   Eigen::VectorXd& c_pi) {
    if (policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions)
        throw std::invalid_argument("policy shape does not match the MDP");
    P_pi.setZero(mdp.num_states, mdp.num_states);
    c_pi.setZero(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            const double p = policy.prob(s, a);
            if (p == 0.0) continue;
            P_pi.row(s) += p * mdp.transition[a].row(s);
            c_pi(s) += p * mdp.cost_mean(s, a);
        }
    }
}

QTable q_from_v(const TabularMdp& mdp, const Eigen::VectorXd& v) {
    QTable q;
    q.q.resize(mdp.num_states, mdp.num_actions);
    for (int a = 0; a < mdp.num_actions; ++a)
        q.q.col(a) = mdp.cost_mean.col(a) + mdp.discount * (mdp.transition[a] * v);
    return q;
}

} // namespace

OptimalValues value_iteration(const TabularMdp& mdp, double tol) {
    mdp.validate();
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");

    const double max_cost = mdp.cost_mean.cwiseAbs().maxCoeff();
    long max_iters = 1;
    if (mdp.discount > 0.0 && max_cost > 0.0) {
        const double ratio = tol * (1.0 - mdp.discount) / max_cost;
        if (ratio < 1.0)
            max_iters = static_cast<long>(std::ceil(std::log(ratio) / std::log(mdp.discount))) + 1;
    }

    OptimalValues out;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.num_states);
    Eigen::VectorXd next(mdp.num_states);
    double residual = 0.0;
    long iter = 0;
    for (; iter < max_iters; ++iter) {
        QTable q = q_from_v(mdp, v);
        next = q.q.rowwise().minCoeff();
        residual = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (residual <= tol) break;
    }
    if (residual > tol)
        throw std::runtime_error("value_iteration: failed to reach tolerance within the "
                                 "contraction iteration bound");
    out.value.v = v;
    out.value.residual = residual;
    out.value.iterations = static_cast<int>(iter + 1);
    out.q = q_from_v(mdp, v);
    return out;
}

ValueTable policy_evaluation(const TabularMdp& mdp, const TabularPolicy& policy) {
    mdp.validate();
    Eigen::MatrixXd P_pi;
    Eigen::VectorXd c_pi;
    induced_chain(mdp, policy, P_pi, c_pi);

    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(mdp.num_states, mdp.num_states) -
                        mdp.discount * P_pi;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd v = lu.solve(c_pi);
    // One round of iterative refinement, then enforce the solve contract.
    v += lu.solve(c_pi - A * v);
    const double residual = (A * v - c_pi).cwiseAbs().maxCoeff();
    if (!(residual <= 1e-10))
        throw std::runtime_error("policy_evaluation: linear solve residual above 1e-10");
    ValueTable out;
    out.v = v;
    out.residual = residual;
    out.iterations = 1;
    return out;
}

double expected_cost(const TabularMdp& mdp, const ValueTable& values) {
    return mdp.initial_dist.dot(values.v);
}

double expected_cost(const TabularMdp& mdp, const TabularPolicy& policy) {
    return expected_cost(mdp, policy_evaluation(mdp, policy));
}

Eigen::MatrixXd disadvantage(const TabularMdp& mdp, const TabularPolicy& policy) {
    const ValueTable values = policy_evaluation(mdp, policy);
    QTable q = q_from_v(mdp, values.v);
    return q.q.colwise() - values.v;
}

std::vector<int> greedy_actions(const QTable& q) {
    std::vector<int> actions(q.q.rows());
    for (int s = 0; s < q.q.rows(); ++s) {
        int best = 0;
        for (int a = 1; a < q.q.cols(); ++a)
            if (q.q(s, a) < q.q(s, best)) best = a;
        actions[s] = best;
    }
    return actions;
}

TabularPolicy induced_policy(const TabularMdp& mdp, const Eigen::VectorXd& oracle_values) {
    return lookahead_policy(mdp, oracle_values, 1);
}

TabularPolicy induced_policy(const TabularMdp& mdp, const Potential& oracle) {
    return induced_policy(mdp, potential_table(oracle, mdp.num_states));
}

TabularPolicy lookahead_policy(const TabularMdp& mdp, const Eigen::VectorXd& oracle_values,
                               int k) {
    mdp.validate();
    if (k < 1) throw std::invalid_argument("lookahead_policy: k must be at least 1");
    if (oracle_values.size() != mdp.num_states)
        throw std::invalid_argument("lookahead_policy: oracle length mismatch");
    if (!oracle_values.allFinite())
        throw std::domain_error("lookahead_policy: non-finite oracle value");

    // Backward induction over the k-step window, terminal value = oracle.
    Eigen::VectorXd w = oracle_values;
    for (int stage = 0; stage < k - 1; ++stage)
        w = q_from_v(mdp, w).q.rowwise().minCoeff();
    return TabularPolicy::deterministic_policy(greedy_actions(q_from_v(mdp, w)),
                                               mdp.num_actions);
}

TabularPolicy lookahead_policy(const TabularMdp& mdp, const Potential& oracle, int k) {
    return lookahead_policy(mdp, potential_table(oracle, mdp.num_states), k);
}

Eigen::VectorXd k_step_disadvantage(const TabularMdp& mdp, const Eigen::VectorXd& oracle_values,
                                    int k, const TabularPolicy& policy) {
    mdp.validate();
    if (k < 1) throw std::invalid_argument("k_step_disadvantage: k must be at least 1");
    if (oracle_values.size() != mdp.num_states)
        throw std::invalid_argument("k_step_disadvantage: oracle length mismatch");
    Eigen::MatrixXd P_pi;
    Eigen::VectorXd c_pi;
    induced_chain(mdp, policy, P_pi, c_pi);

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(mdp.num_states);
    Eigen::VectorXd stage_cost = c_pi; // P_pi^(i-1) c_pi
    Eigen::VectorXd tail = oracle_values;
    double scale = 1.0;
    for (int i = 1; i <= k; ++i) {
        acc += scale * stage_cost;
        stage_cost = P_pi * stage_cost;
        tail = P_pi * tail;
        scale *= mdp.discount;
    }
    return acc + scale * tail - oracle_values;
}

AdversarialChain adversarial_chain(int depth, double discount, double delta) {
    if (depth < 1) throw std::invalid_argument("adversarial_chain: depth must be at least 1");
    if (!(delta >= 0.0) || delta >= 0.5)
        throw std::invalid_argument("adversarial_chain: delta must lie in [0, 0.5)");

    const int n = 2 * depth + 2;
    AdversarialChain chain;
    chain.depth = depth;
    chain.delta = delta;
    TabularMdp mdp(n, 2, discount);
    const auto free_id = [](int i) { return i; };
    const auto penalty_id = [depth](int i) { return depth + 1 + i; };

    for (int i = 0; i <= depth; ++i) {
        chain.free_lane.push_back(free_id(i));
        chain.penalty_lane.push_back(penalty_id(i));
        const int targets[2] = {i < depth ? free_id(i + 1) : free_id(depth),
                                i < depth ? penalty_id(i + 1) : free_id(depth)};
        for (int a = 0; a < 2; ++a) {
            mdp.transition[a](free_id(i), targets[a]) = 1.0;
            mdp.transition[a](penalty_id(i), targets[a]) = 1.0;
            mdp.cost_mean(free_id(i), a) = 0.0;
            mdp.cost_mean(penalty_id(i), a) = 1.0;
        }
    }
    mdp.initial_dist.setZero();
    mdp.initial_dist(free_id(0)) = 1.0;
    mdp.validate();
    chain.mdp = std::move(mdp);
    return chain;
}

Eigen::VectorXd AdversarialChain::misleading_oracle() const {
    Eigen::VectorXd oracle(mdp.num_states);
    for (int s : free_lane) oracle(s) = 0.5 + delta;
    for (int s : penalty_lane) oracle(s) = 0.5 - delta;
    return oracle;
}

BoundReport verify_lower_bound(double discount, double delta, int depth) {
    const AdversarialChain chain = adversarial_chain(depth, discount, delta);
    const OptimalValues opt = value_iteration(chain.mdp, 1e-12);
    const TabularPolicy optimal =
        TabularPolicy::deterministic_policy(greedy_actions(opt.q), chain.mdp.num_actions);
    const TabularPolicy misled = induced_policy(chain.mdp, chain.misleading_oracle());

    BoundReport report;
    report.discount = discount;
    report.epsilon = 0.5 + delta;
    report.k = 1;
    report.descriptor = "adversarial_chain(depth=" + std::to_string(depth) +
                        ",delta=" + format_double(delta) + ")";
    report.gap_observed =
        expected_cost(chain.mdp, misled) - expected_cost(chain.mdp, optimal);
    report.bound_value =
        discount <= 0.0
            ? 0.0
            : discount * (1.0 - std::pow(discount, depth)) / (1.0 - discount);
    // A lower-bound construction must hit its target: the gap may fall short
    // of the predicted value by at most 1 percent and never exceed it
    // meaningfully.
    report.holds = report.gap_observed <= report.bound_value + 1e-9 &&
                   report.gap_observed >= 0.99 * report.bound_value - 1e-9;
    if (!report.holds)
        report.violation_dump = dump_instance(chain.mdp, chain.misleading_oracle());
    return report;
}

BoundReport verify_upper_bound(const TabularMdp& mdp, double epsilon, int k, int n_trials,
                               Rng& rng) {
    mdp.validate();
    if (!(epsilon >= 0.0)) throw std::invalid_argument("verify_upper_bound: negative epsilon");
    if (n_trials < 1) throw std::invalid_argument("verify_upper_bound: need at least one trial");
    const OptimalValues opt = value_iteration(mdp, 1e-12);
    const TabularPolicy optimal =
        TabularPolicy::deterministic_policy(greedy_actions(opt.q), mdp.num_actions);
    const double j_star = expected_cost(mdp, optimal);

    BoundReport report;
    report.discount = mdp.discount;
    report.epsilon = epsilon;
    report.k = k;
    report.seed = rng.seed();
    report.descriptor = "uniform perturbation, " + std::to_string(n_trials) + " trials";
    const double dk = std::pow(mdp.discount, k);
    report.bound_value = dk < 1.0 ? 2.0 * dk * epsilon / (1.0 - dk) : 0.0;
    report.holds = true;
    for (int trial = 0; trial < n_trials; ++trial) {
        Eigen::VectorXd oracle = opt.value.v;
        for (int s = 0; s < mdp.num_states; ++s) oracle(s) += rng.uniform(-epsilon, epsilon);
        const TabularPolicy pi_k = lookahead_policy(mdp, oracle, k);
        const double gap = expected_cost(mdp, pi_k) - j_star;
        if (gap > report.gap_observed) report.gap_observed = gap;
        if (gap > report.bound_value + 1e-9) {
            report.holds = false;
            if (report.violation_dump.empty()) report.violation_dump = dump_instance(mdp, oracle);
        }
    }
    return report;
}

std::string dump_instance(const TabularMdp& mdp, const Eigen::VectorXd& oracle_values) {
    std::ostringstream out;
    out << "states=" << mdp.num_states << " actions=" << mdp.num_actions
        << " discount=" << format_double(mdp.discount) << "\n";
    for (int a = 0; a < mdp.num_actions; ++a) {
        out << "transition[" << a << "]:\n";
        for (int s = 0; s < mdp.num_states; ++s) {
            for (int t = 0; t < mdp.num_states; ++t)
                out << (t ? "," : "") << format_double(mdp.transition[a](s, t));
            out << "\n";
        }
    }
    out << "cost_mean:\n";
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a)
            out << (a ? "," : "") << format_double(mdp.cost_mean(s, a));
        out << "\n";
    }
    out << "initial_dist:\n";
    for (int s = 0; s < mdp.num_states; ++s)
        out << (s ? "," : "") << format_double(mdp.initial_dist(s));
    out << "\noracle:\n";
    for (int s = 0; s < oracle_values.size(); ++s)
        out << (s ? "," : "") << format_double(oracle_values(s));
    out << "\n";
    return out.str();
}

} // namespace thor
