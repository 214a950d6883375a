#include "thor/approx.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "thor/trajectory_io.hpp"

namespace thor {

namespace {

std::vector<int> layer_dims(const MlpArch& arch) {
    std::vector<int> dims;
    dims.push_back(arch.input_dim);
    for (int h : arch.hidden) dims.push_back(h);
    dims.push_back(arch.output_dim);
    return dims;
}

void check_arch(const MlpArch& arch) {
    if (arch.input_dim <= 0 || arch.output_dim <= 0)
        throw std::invalid_argument("MlpArch: dimensions must be positive");
    for (int h : arch.hidden)
        if (h <= 0) throw std::invalid_argument("MlpArch: hidden widths must be positive");
    if (arch.head == HeadType::scalar && arch.output_dim != 1)
        throw std::invalid_argument("MlpArch: scalar head requires output_dim 1");
}

// Maps of one linear layer inside the flat parameter vector.
struct LayerView {
    Eigen::Map<const Eigen::MatrixXd> W;
    Eigen::Map<const Eigen::VectorXd> b;
};

LayerView layer_view(const Eigen::VectorXd& theta, int offset, int out, int in) {
    return {Eigen::Map<const Eigen::MatrixXd>(theta.data() + offset, out, in),
            Eigen::Map<const Eigen::VectorXd>(theta.data() + offset + out * in, out)};
}

Eigen::VectorXd clamped_log_std(const MlpArch& arch, const Eigen::VectorXd& theta) {
    return theta.tail(arch.output_dim).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

// 1 where the clamp passes gradient through, 0 where it saturates.
Eigen::ArrayXd log_std_gate(const MlpArch& arch, const Eigen::VectorXd& theta) {
    const Eigen::ArrayXd raw = theta.tail(arch.output_dim).array();
    return ((raw >= kLogStdMin) && (raw <= kLogStdMax)).cast<double>();
}

std::atomic<bool> g_zero_prob_warned{false};

void warn_zero_prob() {
    if (!g_zero_prob_warned.exchange(true))
        std::cerr << "warning: discrete action has zero probability; "
                     "log_prob returns -inf\n";
}

} // namespace

int MlpArch::param_count() const {
    check_arch(*this);
    const std::vector<int> dims = layer_dims(*this);
    int count = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l) count += dims[l + 1] * (dims[l] + 1);
    if (head == HeadType::gaussian) count += output_dim;
    return count;
}

Eigen::VectorXd init_params(const MlpArch& arch, Rng& rng) {
    const std::vector<int> dims = layer_dims(arch);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(arch.param_count());
    int offset = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l], out = dims[l + 1];
        Eigen::MatrixXd g(std::max(out, in), std::min(out, in));
        for (int j = 0; j < g.cols(); ++j)
            for (int i = 0; i < g.rows(); ++i) g(i, j) = rng.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
        const Eigen::MatrixXd r = qr.matrixQR().topRows(g.cols()).triangularView<Eigen::Upper>();
        for (int j = 0; j < q.cols(); ++j)
            if (r(j, j) < 0.0) q.col(j) = -q.col(j);
        Eigen::MatrixXd w = (out >= in) ? q : Eigen::MatrixXd(q.transpose());
        const bool final_layer = l + 2 == dims.size();
        w *= final_layer ? 0.01 : 1.0;
        Eigen::Map<Eigen::MatrixXd>(theta.data() + offset, out, in) = w;
        offset += out * (in + 1); // biases stay zero
    }
    if (arch.head == HeadType::gaussian)
        theta.tail(arch.output_dim).setConstant(kLogStdInit);
    return theta;
}

Eigen::MatrixXd mlp_forward(const MlpArch& arch, const Eigen::VectorXd& theta,
                            const Eigen::MatrixXd& x, BatchTrace* trace) {
    check_arch(arch);
    if (theta.size() != arch.param_count())
        throw std::invalid_argument("mlp_forward: parameter vector length mismatch");
    if (x.rows() != arch.input_dim)
        throw std::invalid_argument("mlp_forward: observation dimension mismatch");
    if (!x.allFinite()) throw std::domain_error("mlp_forward: non-finite observation");

    const std::vector<int> dims = layer_dims(arch);
    Eigen::MatrixXd a = x;
    if (trace) {
        trace->inputs.clear();
        trace->inputs.push_back(a);
    }
    int offset = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l], out = dims[l + 1];
        const LayerView layer = layer_view(theta, offset, out, in);
        offset += out * (in + 1);
        Eigen::MatrixXd z = (layer.W * a).colwise() + layer.b;
        if (l + 2 < dims.size()) {
            a = z.array().tanh();
            if (trace) trace->inputs.push_back(a);
        } else {
            a = std::move(z);
        }
    }
    if (trace) trace->out = a;
    return a;
}

Eigen::VectorXd mlp_backward(const MlpArch& arch, const Eigen::VectorXd& theta,
                             const BatchTrace& trace, const Eigen::MatrixXd& out_cotangent) {
    const std::vector<int> dims = layer_dims(arch);
    const int num_layers = static_cast<int>(dims.size()) - 1;
    std::vector<int> offsets(num_layers);
    int offset = 0;
    for (int l = 0; l < num_layers; ++l) {
        offsets[l] = offset;
        offset += dims[l + 1] * (dims[l] + 1);
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
    Eigen::MatrixXd g = out_cotangent;
    for (int l = num_layers - 1; l >= 0; --l) {
        const int in = dims[l], out = dims[l + 1];
        const LayerView layer = layer_view(theta, offsets[l], out, in);
        const Eigen::MatrixXd& a = trace.inputs[l];
        Eigen::Map<Eigen::MatrixXd>(grad.data() + offsets[l], out, in).noalias() =
            g * a.transpose();
        Eigen::Map<Eigen::VectorXd>(grad.data() + offsets[l] + out * in, out) = g.rowwise().sum();
        if (l > 0)
            g = ((layer.W.transpose() * g).array() * (1.0 - a.array().square())).matrix();
    }
    return grad;
}

Eigen::MatrixXd mlp_tangent(const MlpArch& arch, const Eigen::VectorXd& theta,
                            const BatchTrace& trace, const Eigen::VectorXd& v) {
    const std::vector<int> dims = layer_dims(arch);
    const int n = static_cast<int>(trace.inputs[0].cols());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(dims[0], n);
    int offset = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l], out = dims[l + 1];
        const LayerView layer = layer_view(theta, offset, out, in);
        const LayerView tangent = layer_view(v, offset, out, in);
        offset += out * (in + 1);
        const Eigen::MatrixXd& a = trace.inputs[l];
        Eigen::MatrixXd u = ((tangent.W * a).colwise() + tangent.b) + layer.W * t;
        if (l + 2 < dims.size()) {
            const Eigen::MatrixXd& next = trace.inputs[l + 1];
            t = (u.array() * (1.0 - next.array().square())).matrix();
        } else {
            return u;
        }
    }
    return t; // unreachable for valid archs
}

int DistBatch::size() const {
    return head == HeadType::categorical ? static_cast<int>(log_probs.cols())
                                         : static_cast<int>(mean.cols());
}

ActionBatch ActionBatch::from(const std::vector<Action>& actions, HeadType head) {
    ActionBatch batch;
    const int n = static_cast<int>(actions.size());
    if (head == HeadType::categorical) {
        batch.idx.resize(n);
        for (int i = 0; i < n; ++i) {
            if (!actions[i].is_discrete())
                throw std::invalid_argument("ActionBatch: expected discrete actions");
            batch.idx(i) = actions[i].index;
        }
    } else {
        if (n == 0) throw std::invalid_argument("ActionBatch: empty batch");
        const int d = static_cast<int>(actions[0].box.size());
        batch.box.resize(d, n);
        for (int i = 0; i < n; ++i) {
            if (actions[i].is_discrete() || static_cast<int>(actions[i].box.size()) != d)
                throw std::invalid_argument("ActionBatch: expected continuous actions");
            for (int j = 0; j < d; ++j) batch.box(j, i) = actions[i].box[j];
        }
    }
    return batch;
}

DistBatch policy_forward_batch(const MlpArch& arch, const Eigen::VectorXd& theta,
                               const Eigen::MatrixXd& x, BatchTrace* trace) {
    if (arch.head == HeadType::scalar)
        throw std::invalid_argument("policy_forward_batch: scalar head is not a policy");
    DistBatch dist;
    dist.head = arch.head;
    const Eigen::MatrixXd out = mlp_forward(arch, theta, x, trace);
    if (arch.head == HeadType::categorical) {
        const Eigen::RowVectorXd max = out.colwise().maxCoeff();
        const Eigen::RowVectorXd lse =
            (out.rowwise() - max).array().exp().colwise().sum().log().matrix() + max;
        dist.log_probs = out.rowwise() - lse;
    } else {
        dist.mean = out;
        dist.log_std = clamped_log_std(arch, theta);
    }
    return dist;
}

ActionDistribution policy_forward(const MlpArch& arch, const Eigen::VectorXd& theta,
                                  const std::vector<double>& obs) {
    const Eigen::Map<const Eigen::VectorXd> x(obs.data(), obs.size());
    const DistBatch batch = policy_forward_batch(arch, theta, x);
    ActionDistribution dist;
    dist.head = arch.head;
    if (arch.head == HeadType::categorical) {
        dist.probs = batch.log_probs.col(0).array().exp().matrix();
    } else {
        dist.mean = batch.mean.col(0);
        dist.log_std = batch.log_std;
    }
    return dist;
}

Action sample_action(const ActionDistribution& dist, Rng& rng) {
    if (dist.head == HeadType::categorical) {
        const std::vector<double> w(dist.probs.data(), dist.probs.data() + dist.probs.size());
        return Action::discrete(rng.categorical(w));
    }
    std::vector<double> box(dist.mean.size());
    for (int i = 0; i < dist.mean.size(); ++i)
        box[i] = dist.mean(i) + std::exp(dist.log_std(i)) * rng.normal();
    return Action::continuous(std::move(box));
}

Eigen::VectorXd log_prob_batch(const DistBatch& dist, const ActionBatch& actions) {
    const int n = dist.size();
    Eigen::VectorXd lp(n);
    if (dist.head == HeadType::categorical) {
        if (actions.idx.size() != n)
            throw std::invalid_argument("log_prob_batch: action count mismatch");
        for (int i = 0; i < n; ++i) {
            const int a = actions.idx(i);
            if (a < 0 || a >= dist.log_probs.rows())
                throw std::out_of_range("log_prob_batch: action index out of range");
            lp(i) = dist.log_probs(a, i);
            if (std::exp(lp(i)) == 0.0) {
                warn_zero_prob();
                lp(i) = -std::numeric_limits<double>::infinity();
            }
        }
    } else {
        if (actions.box.cols() != n)
            throw std::invalid_argument("log_prob_batch: action count mismatch");
        const Eigen::ArrayXd inv_var = (-2.0 * dist.log_std.array()).exp();
        const double base = -0.5 * dist.mean.rows() * std::log(2.0 * std::numbers::pi) -
                            dist.log_std.sum();
        const Eigen::MatrixXd diff = actions.box - dist.mean;
        for (int i = 0; i < n; ++i)
            lp(i) = base - 0.5 * (diff.col(i).array().square() * inv_var).sum();
    }
    return lp;
}

double log_prob(const MlpArch& arch, const Eigen::VectorXd& theta, const std::vector<double>& obs,
                const Action& action) {
    const Eigen::Map<const Eigen::VectorXd> x(obs.data(), obs.size());
    const DistBatch dist = policy_forward_batch(arch, theta, x);
    return log_prob_batch(dist, ActionBatch::from({action}, arch.head))(0);
}

Eigen::VectorXd weighted_score_sum(const MlpArch& arch, const Eigen::VectorXd& theta,
                                   const Eigen::MatrixXd& x, const ActionBatch& actions,
                                   const Eigen::VectorXd& weights) {
    BatchTrace trace;
    const DistBatch dist = policy_forward_batch(arch, theta, x, &trace);
    const int n = dist.size();
    if (weights.size() != n)
        throw std::invalid_argument("weighted_score_sum: weight count mismatch");
    Eigen::MatrixXd cot;
    Eigen::VectorXd grad;
    if (arch.head == HeadType::categorical) {
        cot = (-(dist.log_probs.array().exp().rowwise() * weights.transpose().array())).matrix();
        for (int i = 0; i < n; ++i) cot(actions.idx(i), i) += weights(i);
        grad = mlp_backward(arch, theta, trace, cot);
    } else {
        const Eigen::ArrayXd inv_var = (-2.0 * dist.log_std.array()).exp();
        const Eigen::MatrixXd diff = actions.box - dist.mean;
        cot = ((diff.array().colwise() * inv_var).rowwise() * weights.transpose().array()).matrix();
        grad = mlp_backward(arch, theta, trace, cot);
        // State-independent log-std entries sit at the parameter tail.
        const Eigen::ArrayXd gate = log_std_gate(arch, theta);
        Eigen::ArrayXd tail = Eigen::ArrayXd::Zero(arch.output_dim);
        for (int i = 0; i < n; ++i)
            tail += weights(i) * (diff.col(i).array().square() * inv_var - 1.0);
        grad.tail(arch.output_dim) = (tail * gate).matrix();
    }
    return grad;
}

Eigen::VectorXd log_prob_grad(const MlpArch& arch, const Eigen::VectorXd& theta,
                              const std::vector<double>& obs, const Action& action) {
    const Eigen::Map<const Eigen::VectorXd> x(obs.data(), obs.size());
    return weighted_score_sum(arch, theta, x, ActionBatch::from({action}, arch.head),
                              Eigen::VectorXd::Ones(1));
}

double kl_mean(const DistBatch& old_dist, const DistBatch& new_dist) {
    const int n = old_dist.size();
    if (new_dist.size() != n || new_dist.head != old_dist.head)
        throw std::invalid_argument("kl_mean: mismatched batches");
    if (old_dist.head == HeadType::categorical) {
        const Eigen::ArrayXXd p_old = old_dist.log_probs.array().exp();
        return (p_old * (old_dist.log_probs - new_dist.log_probs).array()).colwise().sum().mean();
    }
    const Eigen::ArrayXd var_old = (2.0 * old_dist.log_std.array()).exp();
    const Eigen::ArrayXd inv_var_new = (-2.0 * new_dist.log_std.array()).exp();
    const double shared =
        (new_dist.log_std - old_dist.log_std).sum() +
        0.5 * (var_old * inv_var_new).sum() - 0.5 * old_dist.log_std.size();
    const Eigen::ArrayXXd diff = (new_dist.mean - old_dist.mean).array();
    const double mean_term =
        0.5 * (diff.square().colwise() * inv_var_new).colwise().sum().mean();
    return shared + mean_term;
}

Eigen::VectorXd fisher_vector_product(const MlpArch& arch, const Eigen::VectorXd& theta,
                                      const BatchTrace& trace, const DistBatch& dist,
                                      const Eigen::VectorXd& v, double damping) {
    const int n = dist.size();
    const Eigen::MatrixXd u = mlp_tangent(arch, theta, trace, v);
    Eigen::VectorXd result;
    if (arch.head == HeadType::categorical) {
        const Eigen::ArrayXXd p = dist.log_probs.array().exp();
        const Eigen::ArrayXXd pu = p * u.array();
        const Eigen::RowVectorXd dot = pu.colwise().sum().matrix();
        const Eigen::MatrixXd y = (pu - p.rowwise() * dot.array()).matrix() / n;
        result = mlp_backward(arch, theta, trace, y);
    } else {
        const Eigen::ArrayXd inv_var = (-2.0 * dist.log_std.array()).exp();
        const Eigen::MatrixXd y = (u.array().colwise() * inv_var).matrix() / n;
        result = mlp_backward(arch, theta, trace, y);
        const Eigen::ArrayXd gate = log_std_gate(arch, theta);
        result.tail(arch.output_dim) =
            (2.0 * v.tail(arch.output_dim).array() * gate).matrix();
    }
    return result + damping * v;
}

double critic_value(const MlpArch& arch, const Eigen::VectorXd& theta,
                    const std::vector<double>& obs) {
    const Eigen::Map<const Eigen::VectorXd> x(obs.data(), obs.size());
    return mlp_forward(arch, theta, x)(0, 0);
}

Eigen::VectorXd critic_value_batch(const MlpArch& arch, const Eigen::VectorXd& theta,
                                   const Eigen::MatrixXd& x) {
    if (arch.head != HeadType::scalar)
        throw std::invalid_argument("critic_value_batch: scalar head required");
    return mlp_forward(arch, theta, x).row(0).transpose();
}

Eigen::VectorXd critic_grad(const MlpArch& arch, const Eigen::VectorXd& theta,
                            const std::vector<double>& obs) {
    const Eigen::Map<const Eigen::VectorXd> x(obs.data(), obs.size());
    BatchTrace trace;
    mlp_forward(arch, theta, x, &trace);
    return mlp_backward(arch, theta, trace, Eigen::MatrixXd::Ones(1, 1));
}

FitReport critic_fit(const MlpArch& arch, Eigen::VectorXd& theta, const Eigen::MatrixXd& x,
                     const Eigen::VectorXd& targets, int epochs, double lr) {
    if (arch.head != HeadType::scalar)
        throw std::invalid_argument("critic_fit: scalar head required");
    if (x.cols() != targets.size())
        throw std::invalid_argument("critic_fit: target count mismatch");
    if (epochs < 1) throw std::invalid_argument("critic_fit: epochs must be positive");
    const int n = static_cast<int>(x.cols());

    FitReport report;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd s = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd best = theta;
    double best_mse = std::numeric_limits<double>::infinity();
    double initial_mse = 0.0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        BatchTrace trace;
        const Eigen::VectorXd pred = mlp_forward(arch, theta, x, &trace).row(0).transpose();
        const Eigen::VectorXd err = pred - targets;
        const double mse = err.squaredNorm() / n;
        if (epoch == 0) initial_mse = mse;
        if (!std::isfinite(mse) || mse > 100.0 * (initial_mse + 1.0))
            throw std::runtime_error("critic_fit: loss diverged at epoch " +
                                     std::to_string(epoch) + " (mse=" + format_double(mse) +
                                     ", lr=" + format_double(lr) + ")");
        report.epoch_mse.push_back(mse);
        if (mse < best_mse) {
            best_mse = mse;
            best = theta;
            report.best_epoch = epoch;
        }
        const Eigen::VectorXd grad =
            mlp_backward(arch, theta, trace, (2.0 / n) * err.transpose());
        // Adam with bias correction.
        const double b1 = 0.9, b2 = 0.999;
        m = b1 * m + (1.0 - b1) * grad;
        s = b2 * s + (1.0 - b2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(b1, epoch + 1);
        const double c2 = 1.0 - std::pow(b2, epoch + 1);
        theta -= (lr / c1) * m.cwiseQuotient(((s / c2).cwiseSqrt().array() + 1e-8).matrix());
    }
    const Eigen::VectorXd pred = critic_value_batch(arch, theta, x);
    const double mse = (pred - targets).squaredNorm() / n;
    report.epoch_mse.push_back(mse);
    if (mse < best_mse) {
        best_mse = mse;
        best = theta;
        report.best_epoch = static_cast<int>(report.epoch_mse.size()) - 1;
    }
    theta = best;
    return report;
}

std::string arch_to_string(const MlpArch& arch) {
    std::ostringstream out;
    out << "input_dim=" << arch.input_dim << ",hidden=";
    for (size_t i = 0; i < arch.hidden.size(); ++i) out << (i ? "|" : "") << arch.hidden[i];
    out << ",output_dim=" << arch.output_dim << ",head=";
    switch (arch.head) {
        case HeadType::categorical: out << "categorical"; break;
        case HeadType::gaussian: out << "gaussian"; break;
        case HeadType::scalar: out << "scalar"; break;
    }
    return out.str();
}

MlpArch arch_from_string(const std::string& header) {
    MlpArch arch;
    std::istringstream hs(header);
    std::string part;
    while (std::getline(hs, part, ',')) {
        const size_t eq = part.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("arch_from_string: malformed header '" + header + "'");
        const std::string key = part.substr(0, eq), value = part.substr(eq + 1);
        if (key == "input_dim") arch.input_dim = std::stoi(value);
        else if (key == "output_dim") arch.output_dim = std::stoi(value);
        else if (key == "hidden") {
            std::istringstream vs(value);
            std::string item;
            while (std::getline(vs, item, '|'))
                if (!item.empty()) arch.hidden.push_back(std::stoi(item));
        } else if (key == "head") {
            if (value == "categorical") arch.head = HeadType::categorical;
            else if (value == "gaussian") arch.head = HeadType::gaussian;
            else if (value == "scalar") arch.head = HeadType::scalar;
            else throw std::runtime_error("arch_from_string: unknown head '" + value + "'");
        } else {
            throw std::runtime_error("arch_from_string: unknown header key '" + key + "'");
        }
    }
    return arch;
}

void save_params(const std::string& path, const MlpArch& arch, const Eigen::VectorXd& theta) {
    if (theta.size() != arch.param_count())
        throw std::invalid_argument("save_params: parameter vector length mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_params: cannot open " + path);
    out << arch_to_string(arch) << "\n";
    for (int i = 0; i < theta.size(); ++i) out << format_double(theta(i)) << "\n";
    if (!out) throw std::runtime_error("save_params: write failed for " + path);
}

std::pair<MlpArch, Eigen::VectorXd> load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_params: cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("load_params: empty file " + path);
    const MlpArch arch = arch_from_string(header);
    Eigen::VectorXd theta(arch.param_count());
    std::string line;
    int i = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (i >= theta.size()) throw std::runtime_error("load_params: too many parameters");
        char* end = nullptr;
        theta(i++) = std::strtod(line.c_str(), &end);
        if (end == line.c_str()) throw std::runtime_error("load_params: bad parameter line");
    }
    if (i != theta.size())
        throw std::runtime_error("load_params: expected " + std::to_string(theta.size()) +
                                 " parameters, found " + std::to_string(i));
    return {arch, std::move(theta)};
}

} // namespace thor
