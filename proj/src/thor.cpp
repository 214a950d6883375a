#include "thor/thor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace thor {

namespace {

/// Stream ids reserved for non-episode draws. Episode streams use the
/// episode id itself, which stays far below this.
constexpr std::uint64_t kPolicyInitStream = std::uint64_t{1} << 62;
constexpr std::uint64_t kCriticInitStream = kPolicyInitStream + 1;
constexpr std::uint64_t kUpdateStream = kPolicyInitStream + 2;

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("ThorConfig: " + what);
}

} // namespace

void ThorConfig::validate(int horizon) const {
    require(k >= 1, "k must be >= 1");
    require(k == kInfiniteK || k <= horizon, "finite k must not exceed the env horizon");
    require(discount > 0.0 && discount <= 1.0, "discount must be in (0, 1]");
    require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must be in [0, 1]");
    require(kl_step > 0.0, "kl_step must be positive");
    require(batch_episodes >= 1, "batch_episodes must be >= 1");
    require(iterations >= 1, "iterations must be >= 1");
    require(entropy_coef >= 0.0, "entropy_coef must be >= 0");
    require(hidden_width >= 1, "hidden_width must be >= 1");
    require(critic_epochs >= 0, "critic_epochs must be >= 0");
    require(critic_lr > 0.0, "critic_lr must be positive");
    require(cg_iterations >= 1, "cg_iterations must be >= 1");
    require(cg_tolerance > 0.0, "cg_tolerance must be positive");
    require(cg_damping >= 0.0, "cg_damping must be >= 0");
    require(fvp_subsample >= 1, "fvp_subsample must be >= 1");
    require(one_hot_states >= 0, "one_hot_states must be >= 0");
}

std::vector<double> encode_observation(const std::vector<double>& obs, int one_hot_states) {
    if (one_hot_states <= 0) return obs;
    if (obs.size() != 1)
        throw std::invalid_argument("encode_observation: one-hot encoding needs a "
                                    "single-component index observation");
    const double raw = obs[0];
    const long long idx = std::llround(raw);
    if (!std::isfinite(raw) || std::abs(raw - static_cast<double>(idx)) > 1e-9 || idx < 0 ||
        idx >= one_hot_states)
        throw std::invalid_argument("encode_observation: observation is not an index in [0, " +
                                    std::to_string(one_hot_states) + ")");
    std::vector<double> out(static_cast<std::size_t>(one_hot_states), 0.0);
    out[static_cast<std::size_t>(idx)] = 1.0;
    return out;
}

MlpPolicy::MlpPolicy(MlpArch arch, Eigen::VectorXd params, ActionSpace space, int one_hot_states)
    : arch_(std::move(arch)), params_(std::move(params)), space_(std::move(space)),
      one_hot_(one_hot_states) {
    if (space_.kind == ActionSpace::Kind::discrete) {
        if (arch_.head != HeadType::categorical || arch_.output_dim != space_.count)
            throw std::invalid_argument("MlpPolicy: discrete space needs a categorical head "
                                        "with one logit per action");
    } else {
        if (arch_.head != HeadType::gaussian || arch_.output_dim != space_.action_dim())
            throw std::invalid_argument("MlpPolicy: box space needs a gaussian head matching "
                                        "the action dimension");
    }
    if (params_.size() != arch_.param_count())
        throw std::invalid_argument("MlpPolicy: parameter count does not match architecture");
}

MlpPolicy MlpPolicy::for_env(const EnvInterface& env, int hidden_width, int one_hot_states,
                             Rng& rng) {
    const ActionSpace& space = env.action_space();
    MlpArch arch;
    arch.input_dim = one_hot_states > 0 ? one_hot_states : env.observation_dim();
    arch.hidden = {hidden_width, hidden_width};
    if (space.kind == ActionSpace::Kind::discrete) {
        arch.output_dim = space.count;
        arch.head = HeadType::categorical;
    } else {
        arch.output_dim = space.action_dim();
        arch.head = HeadType::gaussian;
    }
    Eigen::VectorXd theta = init_params(arch, rng);
    return MlpPolicy(std::move(arch), std::move(theta), space, one_hot_states);
}

Action MlpPolicy::act(const std::vector<double>& observation, Rng& rng) const {
    const std::vector<double> x = encode_observation(observation, one_hot_);
    const ActionDistribution dist = policy_forward(arch_, params_, x);
    Action a = sample_action(dist, rng);
    if (!a.is_discrete()) {
        for (std::size_t i = 0; i < a.box.size(); ++i)
            a.box[i] = std::clamp(a.box[i], space_.low[i], space_.high[i]);
    }
    return a;
}

double MlpPolicy::action_log_prob(const std::vector<double>& observation,
                                  const Action& action) const {
    return log_prob(arch_, params_, encode_observation(observation, one_hot_), action);
}

void MlpPolicy::set_params(Eigen::VectorXd params) {
    if (params.size() != arch_.param_count())
        throw std::invalid_argument("MlpPolicy: parameter count does not match architecture");
    params_ = std::move(params);
}

std::vector<Trajectory> collect_batch(EnvInterface& env, const Policy& policy,
                                      int batch_episodes, const Rng& root,
                                      long first_episode_id) {
    if (batch_episodes < 1)
        throw std::invalid_argument("collect_batch: batch_episodes must be >= 1");
    std::vector<Trajectory> batch;
    batch.reserve(static_cast<std::size_t>(batch_episodes));
    for (int e = 0; e < batch_episodes; ++e) {
        const long id = first_episode_id + e;
        Rng episode_rng = root.spawn(static_cast<std::uint64_t>(id));
        batch.push_back(rollout(env, policy, episode_rng, id));
    }
    return batch;
}

namespace {

int total_records(const std::vector<Trajectory>& trajectories) {
    int n = 0;
    for (const Trajectory& traj : trajectories) n += traj.length();
    return n;
}

} // namespace

AdvantageBatch truncated_advantages(const std::vector<Trajectory>& trajectories,
                                    const MlpArch& critic_arch,
                                    const Eigen::VectorXd& critic_params, int one_hot_states,
                                    double discount, double gae_lambda, int k, bool normalize) {
    if (k < 1) throw std::invalid_argument("truncated_advantages: k must be >= 1");
    const int n = total_records(trajectories);
    if (n == 0) throw std::invalid_argument("truncated_advantages: empty batch");

    AdvantageBatch out;
    out.raw_advantages.resize(n);
    out.value_targets.resize(n);

    int offset = 0;
    for (const Trajectory& traj : trajectories) {
        const int len = traj.length();
        if (len == 0) throw std::invalid_argument("truncated_advantages: empty trajectory");
        const TransitionRecord& last = traj.records.back();
        if (!last.next_state)
            throw std::invalid_argument("truncated_advantages: final record lacks next_state");

        // Critic values at s_0..s_{T-1} plus the closing successor, one
        // batched pass per episode.
        Eigen::MatrixXd states;
        {
            const std::vector<double> probe =
                encode_observation(traj.records[0].state, one_hot_states);
            states.resize(static_cast<Eigen::Index>(probe.size()), len + 1);
            for (int t = 0; t < len; ++t) {
                const std::vector<double> x =
                    encode_observation(traj.records[static_cast<std::size_t>(t)].state,
                                       one_hot_states);
                states.col(t) = Eigen::Map<const Eigen::VectorXd>(
                    x.data(), static_cast<Eigen::Index>(x.size()));
            }
            const std::vector<double> x = encode_observation(*last.next_state, one_hot_states);
            states.col(len) = Eigen::Map<const Eigen::VectorXd>(
                x.data(), static_cast<Eigen::Index>(x.size()));
        }
        const Eigen::VectorXd values = critic_value_batch(critic_arch, critic_params, states);

        Eigen::VectorXd delta(len);
        for (int t = 0; t < len; ++t) {
            const TransitionRecord& rec = traj.records[static_cast<std::size_t>(t)];
            if (!rec.shaped_cost)
                throw std::invalid_argument(
                    "truncated_advantages: record lacks a shaped cost (reshape the "
                    "trajectory first)");
            const double bootstrap = rec.done ? 0.0 : values(t + 1);
            delta(t) = *rec.shaped_cost + discount * bootstrap - values(t);
        }
        if (!delta.allFinite())
            throw std::runtime_error("truncated_advantages: non-finite TD residuals (critic "
                                     "or shaped costs diverged)");

        const double decay = discount * gae_lambda;
        for (int t = 0; t < len; ++t) {
            const long window = std::min<long>(k, len - t);
            double acc = 0.0;
            double factor = 1.0;
            for (long i = 0; i < window; ++i) {
                acc += factor * delta(t + i);
                factor *= decay;
                if (factor == 0.0) break;
            }
            out.raw_advantages(offset + t) = acc;
            out.value_targets(offset + t) = acc + values(t);
        }
        offset += len;
    }

    out.mean = out.raw_advantages.mean();
    const double var = (out.raw_advantages.array() - out.mean).square().sum() / n;
    out.stddev = std::sqrt(var);
    if (normalize && out.stddev > 1e-12)
        out.advantages = (out.raw_advantages.array() - out.mean) / out.stddev;
    else if (normalize)
        out.advantages = out.raw_advantages.array() - out.mean;
    else
        out.advantages = out.raw_advantages;
    return out;
}

FlatBatch flatten_batch(const std::vector<Trajectory>& trajectories, int one_hot_states,
                        HeadType head) {
    const int n = total_records(trajectories);
    if (n == 0) throw std::invalid_argument("flatten_batch: empty batch");
    FlatBatch fb;
    std::vector<Action> actions;
    actions.reserve(static_cast<std::size_t>(n));
    int col = 0;
    for (const Trajectory& traj : trajectories) {
        for (const TransitionRecord& rec : traj.records) {
            const std::vector<double> x = encode_observation(rec.state, one_hot_states);
            if (col == 0) fb.inputs.resize(static_cast<Eigen::Index>(x.size()), n);
            fb.inputs.col(col++) = Eigen::Map<const Eigen::VectorXd>(
                x.data(), static_cast<Eigen::Index>(x.size()));
            actions.push_back(rec.action);
        }
    }
    fb.actions = ActionBatch::from(actions, head);
    return fb;
}

Eigen::VectorXd thor_gradient(const std::vector<Trajectory>& trajectories,
                              const AdvantageBatch& advantages, const MlpArch& arch,
                              const Eigen::VectorXd& theta, int one_hot_states) {
    if (!advantages.advantages.allFinite())
        throw std::runtime_error("thor_gradient: non-finite advantages");
    const FlatBatch fb = flatten_batch(trajectories, one_hot_states, arch.head);
    if (fb.size() != advantages.advantages.size())
        throw std::invalid_argument("thor_gradient: advantages do not align with records");
    return weighted_score_sum(arch, theta, fb.inputs, fb.actions, advantages.advantages) /
           static_cast<double>(fb.size());
}

Eigen::VectorXd aggrevated_gradient(const std::vector<Trajectory>& trajectories,
                                    const MlpArch& arch, const Eigen::VectorXd& theta,
                                    const Potential& phi, double discount, int one_hot_states) {
    const int n = total_records(trajectories);
    if (n == 0) throw std::invalid_argument("aggrevated_gradient: empty batch");
    Eigen::VectorXd weights(n);
    int i = 0;
    for (const Trajectory& traj : trajectories) {
        for (const TransitionRecord& rec : traj.records) {
            if (!rec.next_state)
                throw std::invalid_argument("aggrevated_gradient: record lacks next_state");
            weights(i++) = shape_cost(rec.cost, phi, discount, rec.state, *rec.next_state);
        }
    }
    const FlatBatch fb = flatten_batch(trajectories, one_hot_states, arch.head);
    return weighted_score_sum(arch, theta, fb.inputs, fb.actions, weights) /
           static_cast<double>(n);
}

Eigen::VectorXd conjugate_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
    const Eigen::VectorXd& b, int max_iterations, double tolerance) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    const double threshold = tolerance * std::max(1.0, b.norm());
    Eigen::VectorXd r = b;
    if (r.norm() <= threshold) return x;
    Eigen::VectorXd p = r;
    double rs = r.squaredNorm();
    for (int iter = 0; iter < max_iterations; ++iter) {
        const Eigen::VectorXd ap = apply(p);
        const double pap = p.dot(ap);
        if (!(pap > 0.0) || !std::isfinite(pap)) break; // operator not PD here, stop
        const double alpha = rs / pap;
        x += alpha * p;
        r -= alpha * ap;
        const double rs_new = r.squaredNorm();
        if (std::sqrt(rs_new) <= threshold) break;
        p = r + (rs_new / rs) * p;
        rs = rs_new;
    }
    return x;
}

namespace {

/// Uniform subsample of column indices without replacement (partial
/// Fisher-Yates); returns all columns when the batch is small enough.
Eigen::MatrixXd subsample_columns(const Eigen::MatrixXd& inputs, int limit, Rng& rng) {
    const int n = static_cast<int>(inputs.cols());
    if (n <= limit) return inputs;
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < limit; ++i) {
        const int j = i + rng.uniform_int(n - i);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    Eigen::MatrixXd out(inputs.rows(), limit);
    for (int i = 0; i < limit; ++i) out.col(i) = inputs.col(idx[static_cast<std::size_t>(i)]);
    return out;
}

UpdateResult gradient_fallback(const MlpArch& arch, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& gradient,
                               const Eigen::MatrixXd& inputs, const DistBatch& dist_old) {
    UpdateResult res;
    res.params = theta - 1e-3 * gradient;
    res.kl = kl_mean(dist_old, policy_forward_batch(arch, res.params, inputs));
    res.accepted = false;
    res.fallback = true;
    return res;
}

} // namespace

UpdateResult kl_constrained_update(const MlpArch& arch, const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& gradient,
                                   const Eigen::MatrixXd& inputs, const ActionBatch& actions,
                                   const Eigen::VectorXd& advantages, const ThorConfig& config,
                                   Rng& rng) {
    if (!gradient.allFinite())
        throw std::invalid_argument("kl_constrained_update: non-finite gradient");
    if (gradient.isZero(0.0)) {
        UpdateResult res;
        res.params = theta;
        res.kl = 0.0;
        res.accepted = true;
        return res;
    }

    const Eigen::MatrixXd fisher_inputs =
        subsample_columns(inputs, config.fvp_subsample, rng);
    BatchTrace trace;
    const DistBatch dist_sub = policy_forward_batch(arch, theta, fisher_inputs, &trace);
    const auto apply = [&](const Eigen::VectorXd& v) {
        return fisher_vector_product(arch, theta, trace, dist_sub, v, config.cg_damping);
    };

    const int cg_iters = std::min(config.cg_iterations, 50);
    const Eigen::VectorXd direction =
        conjugate_gradient(apply, gradient, cg_iters, config.cg_tolerance);

    const DistBatch dist_old = policy_forward_batch(arch, theta, inputs);

    const Eigen::VectorXd fisher_dir = apply(direction);
    const double residual = (fisher_dir - gradient).norm();
    if (residual > config.cg_tolerance * std::max(1.0, gradient.norm())) {
        std::fprintf(stderr,
                     "warning: conjugate gradient did not converge after %d iterations "
                     "(residual %.3e); taking plain gradient step\n",
                     cg_iters, residual);
        return gradient_fallback(arch, theta, gradient, inputs, dist_old);
    }
    const double dfd = direction.dot(fisher_dir);
    if (!(dfd > 0.0) || !std::isfinite(dfd))
        return gradient_fallback(arch, theta, gradient, inputs, dist_old);
    const double beta = std::sqrt(2.0 * config.kl_step / dfd);

    const Eigen::VectorXd lp_old = log_prob_batch(dist_old, actions);
    const double base_surrogate = advantages.mean();

    double step = beta;
    for (int attempt = 0; attempt < 10; ++attempt, step *= 0.8) {
        const Eigen::VectorXd candidate = theta - step * direction;
        const DistBatch dist_new = policy_forward_batch(arch, candidate, inputs);
        const double kl = kl_mean(dist_old, dist_new);
        const Eigen::VectorXd lp_new = log_prob_batch(dist_new, actions);
        const double surrogate =
            ((lp_new - lp_old).array().exp() * advantages.array()).mean();
        if (std::isfinite(kl) && std::isfinite(surrogate) && surrogate < base_surrogate &&
            kl <= config.kl_step) {
            UpdateResult res;
            res.params = candidate;
            res.kl = kl;
            res.accepted = true;
            return res;
        }
    }
    return gradient_fallback(arch, theta, gradient, inputs, dist_old);
}

namespace {

struct ReturnStats {
    double mean_return = 0.0;
    double std_return = 0.0;
    double shaped_return = 0.0;
    double goal_rate = 0.0;
};

ReturnStats batch_returns(const std::vector<Trajectory>& batch) {
    ReturnStats stats;
    const int n = static_cast<int>(batch.size());
    Eigen::VectorXd rewards(n);
    for (int i = 0; i < n; ++i) {
        const Trajectory& traj = batch[static_cast<std::size_t>(i)];
        rewards(i) = -total_cost(traj);
        double shaped = 0.0;
        for (const TransitionRecord& rec : traj.records) shaped += *rec.shaped_cost;
        stats.shaped_return += -shaped;
        if (!traj.truncated) stats.goal_rate += 1.0;
    }
    stats.mean_return = rewards.mean();
    stats.std_return = std::sqrt((rewards.array() - stats.mean_return).square().sum() / n);
    stats.shaped_return /= n;
    stats.goal_rate /= n;
    return stats;
}

} // namespace

TrainResult thor_train(EnvInterface& env, const Potential& phi, const ThorConfig& config) {
    config.validate(env.horizon());

    const Rng root(config.seed);
    Rng policy_rng = root.spawn(kPolicyInitStream);
    Rng critic_rng = root.spawn(kCriticInitStream);
    Rng update_rng = root.spawn(kUpdateStream);

    MlpPolicy policy =
        MlpPolicy::for_env(env, config.hidden_width, config.one_hot_states, policy_rng);

    MlpArch critic_arch;
    critic_arch.input_dim = policy.arch().input_dim;
    critic_arch.hidden = {config.hidden_width, config.hidden_width};
    critic_arch.output_dim = 1;
    critic_arch.head = HeadType::scalar;
    /// With critic_epochs == 0 the learned critic is disabled outright: parameters
    /// pinned at zero so the bootstrap term vanishes and k=1 training reduces to
    /// AggreVaTeD (the shaping potential is the only value estimate in play).
    Eigen::VectorXd critic_params = config.critic_epochs > 0
                                        ? init_params(critic_arch, critic_rng)
                                        : Eigen::VectorXd::Zero(critic_arch.param_count());

    TrainResult result;
    result.policy_arch = policy.arch();
    result.critic_arch = critic_arch;
    result.curve.reserve(static_cast<std::size_t>(config.iterations));

    long env_steps = 0;
    long episode_counter = 0;
    for (int iteration = 1; iteration <= config.iterations; ++iteration) {
        std::vector<Trajectory> batch =
            collect_batch(env, policy, config.batch_episodes, root, episode_counter);
        episode_counter += config.batch_episodes;
        for (Trajectory& traj : batch) {
            reshape_trajectory(traj, phi, config.discount);
            env_steps += traj.length();
        }

        const ReturnStats stats = batch_returns(batch);
        const AdvantageBatch adv = truncated_advantages(
            batch, critic_arch, critic_params, config.one_hot_states, config.discount,
            config.gae_lambda, config.k, config.normalize_advantages);

        const FlatBatch fb = flatten_batch(batch, config.one_hot_states, policy.arch().head);
        if (!adv.advantages.allFinite())
            throw std::runtime_error("thor_train: non-finite advantages at iteration " +
                                     std::to_string(iteration));
        Eigen::VectorXd weights = adv.advantages;
        if (config.entropy_coef > 0.0) {
            const DistBatch dist = policy_forward_batch(policy.arch(), policy.params(),
                                                        fb.inputs);
            const Eigen::VectorXd lp = log_prob_batch(dist, fb.actions);
            weights += config.entropy_coef * (1.0 + lp.array()).matrix();
        }
        const Eigen::VectorXd gradient =
            weighted_score_sum(policy.arch(), policy.params(), fb.inputs, fb.actions,
                               weights) /
            static_cast<double>(fb.size());

        const UpdateResult update =
            kl_constrained_update(policy.arch(), policy.params(), gradient, fb.inputs,
                                  fb.actions, weights, config, update_rng);
        policy.set_params(update.params);

        double critic_loss = 0.0;
        if (config.critic_epochs > 0) {
            const FitReport fit = critic_fit(critic_arch, critic_params, fb.inputs,
                                             adv.value_targets, config.critic_epochs,
                                             config.critic_lr);
            critic_loss = fit.epoch_mse.back();
        }

        if (!policy.params().allFinite() || !critic_params.allFinite()) {
            std::ostringstream msg;
            msg << "thor_train: non-finite parameters at iteration " << iteration
                << " (policy norm " << policy.params().norm() << ", critic norm "
                << critic_params.norm() << ")";
            throw std::runtime_error(msg.str());
        }

        IterationRecord rec;
        rec.iteration = iteration;
        rec.env_steps = env_steps;
        rec.mean_return = stats.mean_return;
        rec.std_return = stats.std_return;
        rec.shaped_return = stats.shaped_return;
        rec.goal_rate = stats.goal_rate;
        rec.kl = update.kl;
        rec.critic_loss = critic_loss;
        result.curve.push_back(rec);
    }

    result.policy_params = policy.params();
    result.critic_params = critic_params;
    return result;
}

} // namespace thor
