#include "thor/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "thor/envs.hpp"
#include "thor/trajectory_io.hpp"

namespace thor {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_double_value(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("config: bad numeric value '" + value + "' for " + key);
    return v;
}

long parse_int_value(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const long v = std::strtol(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("config: bad integer value '" + value + "' for " + key);
    return v;
}

std::uint64_t parse_u64_value(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0' || value.find('-') != std::string::npos)
        throw ConfigError("config: bad unsigned value '" + value + "' for " + key);
    return v;
}

bool parse_bool_value(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("config: bad boolean value '" + value + "' for " + key + " (use true/false)");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(value);
    while (std::getline(in, part, ',')) {
        part = trim(part);
        if (part.empty()) throw ConfigError("config: empty entry in list '" + value + "'");
        parts.push_back(part);
    }
    if (parts.empty()) throw ConfigError("config: empty list");
    return parts;
}

std::vector<int> parse_k_list(const std::string& value) {
    std::vector<int> ks;
    for (const std::string& part : split_list(value)) ks.push_back(k_from_string(part));
    return ks;
}

/// Comma-separated integers, each either a plain seed or a lo..hi range.
std::vector<std::uint64_t> parse_seed_list(const std::string& value) {
    std::vector<std::uint64_t> seeds;
    for (const std::string& part : split_list(value)) {
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            seeds.push_back(parse_u64_value("seeds", part));
            continue;
        }
        const std::uint64_t lo = parse_u64_value("seeds", part.substr(0, dots));
        const std::uint64_t hi = parse_u64_value("seeds", part.substr(dots + 2));
        if (hi < lo) throw ConfigError("config: seed range '" + part + "' is reversed");
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    return seeds;
}

long sort_k(int k) { return k == kInfiniteK ? std::numeric_limits<long>::max() : k; }

bool run_before(const RunSeries& a, const RunSeries& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.k != b.k) return sort_k(a.k) < sort_k(b.k);
    return a.seed < b.seed;
}

std::string run_label(const std::string& method, int k, std::uint64_t seed) {
    return method + " k=" + k_to_string(k) + " seed=" + std::to_string(seed);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

} // namespace

std::string k_to_string(int k) {
    return k == kInfiniteK ? "inf" : std::to_string(k);
}

int k_from_string(const std::string& text) {
    if (text == "inf") return kInfiniteK;
    const long v = parse_int_value("k", text);
    if (v < 1 || v > std::numeric_limits<int>::max())
        throw ConfigError("config: k value '" + text + "' out of range");
    return static_cast<int>(v);
}

std::vector<std::uint64_t> default_seeds() {
    std::vector<std::uint64_t> seeds(25);
    for (int i = 0; i < 25; ++i) seeds[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(i + 1);
    return seeds;
}

std::vector<MethodArm> ExperimentSpec::arms() const {
    std::vector<MethodArm> arms;
    for (int k : k_values) arms.push_back({"thor", k});
    if (aggrevated_baseline) arms.push_back({"aggrevated", 1});
    if (unshaped_baseline) arms.push_back({"trpo_gae", kInfiniteK});
    return arms;
}

void ExperimentSpec::validate() const {
    if (env.horizon <= 0) throw ConfigError("config: horizon must be positive");
    try {
        make_env(env.name, env.horizon);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (oracle.method != "td" && oracle.method != "mc" && oracle.method != "file")
        throw ConfigError("config: oracle method must be td, mc, or file, not '" + oracle.method +
                          "'");
    if (oracle.method == "file" && oracle.oracle_file.empty())
        throw ConfigError("config: oracle method file requires the file key");
    if (oracle.method != "file" && oracle.demo_file.empty()) {
        if (oracle.demo_episodes <= 0) throw ConfigError("config: demo_episodes must be positive");
        if (oracle.expert_degrade < 0.0 || oracle.expert_degrade > 1.0)
            throw ConfigError("config: expert_degrade must lie in [0, 1]");
    }
    const std::vector<MethodArm> all = arms();
    if (all.empty()) throw ConfigError("config: no method arms requested");
    for (std::size_t i = 0; i < k_values.size(); ++i)
        for (std::size_t j = i + 1; j < k_values.size(); ++j)
            if (k_values[i] == k_values[j])
                throw ConfigError("config: duplicate k value " + k_to_string(k_values[i]));
    if (seeds.empty()) throw ConfigError("config: seeds list is empty");
    for (std::size_t i = 0; i < seeds.size(); ++i)
        for (std::size_t j = i + 1; j < seeds.size(); ++j)
            if (seeds[i] == seeds[j])
                throw ConfigError("config: duplicate seed " + std::to_string(seeds[i]));
    if (workers < 0) throw ConfigError("config: workers must be >= 0");
    if (output_dir.empty()) throw ConfigError("config: output_dir is empty");
    for (const MethodArm& arm : all) {
        if (arm.k != kInfiniteK && arm.k > env.horizon)
            throw ConfigError("config: k " + k_to_string(arm.k) + " exceeds the horizon " +
                              std::to_string(env.horizon));
        ThorConfig cfg = train;
        cfg.k = arm.k;
        try {
            cfg.validate(env.horizon);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
}

ExperimentSpec parse_config(const std::string& text) {
    ExperimentSpec spec;
    spec.seeds = default_seeds();

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    bool seeds_given = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section '" + line + "'");
            section = line.substr(1, line.size() - 2);
            if (section != "env" && section != "oracle" && section != "thor" &&
                section != "approx")
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
        if (section.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key +
                              "' appears before any section");

        if (section == "env") {
            if (key == "name") spec.env.name = value;
            else if (key == "horizon") spec.env.horizon = static_cast<int>(parse_int_value(key, value));
            else throw ConfigError("config: unknown key '" + key + "' in [env]");
        } else if (section == "oracle") {
            if (key == "method") spec.oracle.method = value;
            else if (key == "file") spec.oracle.oracle_file = value;
            else if (key == "demos") spec.oracle.demo_file = value;
            else if (key == "demo_episodes") spec.oracle.demo_episodes = static_cast<int>(parse_int_value(key, value));
            else if (key == "expert_degrade") spec.oracle.expert_degrade = parse_double_value(key, value);
            else if (key == "demo_seed") spec.oracle.demo_seed = parse_u64_value(key, value);
            else if (key == "fit_seed") spec.oracle.fit_seed = parse_u64_value(key, value);
            else if (key == "td_lambda") spec.oracle.td.lambda = parse_double_value(key, value);
            else if (key == "td_lr") spec.oracle.td.lr = parse_double_value(key, value);
            else if (key == "td_epochs") spec.oracle.td.epochs = static_cast<int>(parse_int_value(key, value));
            else if (key == "td_patience") spec.oracle.td.patience = static_cast<int>(parse_int_value(key, value));
            else if (key == "validation_fraction") spec.oracle.td.validation_fraction = parse_double_value(key, value);
            else if (key == "hidden_width") {
                spec.oracle.td.hidden_width = static_cast<int>(parse_int_value(key, value));
                spec.oracle.mc.hidden_width = spec.oracle.td.hidden_width;
            }
            else if (key == "mc_epochs") spec.oracle.mc.epochs = static_cast<int>(parse_int_value(key, value));
            else if (key == "mc_lr") spec.oracle.mc.lr = parse_double_value(key, value);
            else throw ConfigError("config: unknown key '" + key + "' in [oracle]");
        } else if (section == "thor") {
            if (key == "k_values") spec.k_values = parse_k_list(value);
            else if (key == "aggrevated") spec.aggrevated_baseline = parse_bool_value(key, value);
            else if (key == "unshaped_baseline") spec.unshaped_baseline = parse_bool_value(key, value);
            else if (key == "seeds") { spec.seeds = parse_seed_list(value); seeds_given = true; }
            else if (key == "iterations") spec.train.iterations = static_cast<int>(parse_int_value(key, value));
            else if (key == "batch_episodes") spec.train.batch_episodes = static_cast<int>(parse_int_value(key, value));
            else if (key == "discount") spec.train.discount = parse_double_value(key, value);
            else if (key == "gae_lambda") spec.train.gae_lambda = parse_double_value(key, value);
            else if (key == "kl_step") spec.train.kl_step = parse_double_value(key, value);
            else if (key == "entropy_coef") spec.train.entropy_coef = parse_double_value(key, value);
            else if (key == "normalize_advantages") spec.train.normalize_advantages = parse_bool_value(key, value);
            else if (key == "critic_epochs") spec.train.critic_epochs = static_cast<int>(parse_int_value(key, value));
            else if (key == "critic_lr") spec.train.critic_lr = parse_double_value(key, value);
            else if (key == "cg_iterations") spec.train.cg_iterations = static_cast<int>(parse_int_value(key, value));
            else if (key == "cg_tolerance") spec.train.cg_tolerance = parse_double_value(key, value);
            else if (key == "cg_damping") spec.train.cg_damping = parse_double_value(key, value);
            else if (key == "fvp_subsample") spec.train.fvp_subsample = static_cast<int>(parse_int_value(key, value));
            else if (key == "one_hot_states") spec.train.one_hot_states = static_cast<int>(parse_int_value(key, value));
            else if (key == "output_dir") spec.output_dir = value;
            else if (key == "workers") spec.workers = static_cast<int>(parse_int_value(key, value));
            else throw ConfigError("config: unknown key '" + key + "' in [thor]");
        } else { // approx
            if (key == "hidden_width") spec.train.hidden_width = static_cast<int>(parse_int_value(key, value));
            else throw ConfigError("config: unknown key '" + key + "' in [approx]");
        }
    }
    if (!seeds_given && spec.seeds.empty()) spec.seeds = default_seeds();
    return spec;
}

ExperimentSpec load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

DemoSet make_demos(const EnvSpec& env, int episodes, double degrade_prob, std::uint64_t seed) {
    if (episodes <= 0) throw std::invalid_argument("make_demos: episodes must be positive");
    std::unique_ptr<EnvInterface> e = make_env(env.name, env.horizon);
    std::unique_ptr<Policy> expert = scripted_expert(env.name, degrade_prob);
    const Rng root(seed);
    DemoSet demos;
    demos.env_name = env.name;
    demos.expert_descriptor =
        "scripted_expert(degrade=" + format_double(degrade_prob) + ",seed=" + std::to_string(seed) +
        ")";
    demos.trajectories.reserve(static_cast<std::size_t>(episodes));
    for (int i = 0; i < episodes; ++i) {
        Rng episode_rng = root.spawn(static_cast<std::uint64_t>(i));
        demos.trajectories.push_back(rollout(*e, *expert, episode_rng, i));
    }
    demos.validate();
    return demos;
}

ValueOracle build_oracle(const EnvSpec& env, const OracleSpec& spec, double discount) {
    if (spec.method == "file") return load_oracle(spec.oracle_file);
    DemoSet demos;
    if (!spec.demo_file.empty()) {
        demos.trajectories = load_trajectories(spec.demo_file);
        demos.env_name = env.name;
        demos.expert_descriptor = "file:" + spec.demo_file;
        demos.validate();
    } else {
        demos = make_demos(env, spec.demo_episodes, spec.expert_degrade, spec.demo_seed);
    }
    Rng rng(spec.fit_seed);
    if (spec.method == "td") return fit_td(demos, discount, spec.td, rng);
    if (spec.method == "mc") return fit_mc(demos, discount, spec.mc, rng);
    throw ConfigError("config: oracle method must be td, mc, or file, not '" + spec.method + "'");
}

RunSeries run_single(const ExperimentSpec& spec, const MethodArm& arm, std::uint64_t seed,
                     const Potential& phi) {
    RunSeries out;
    out.method = arm.method;
    out.k = arm.k;
    out.seed = seed;
    ThorConfig cfg = spec.train;
    cfg.k = arm.k;
    cfg.seed = seed;
    if (arm.method == "aggrevated") cfg.critic_epochs = 0;
    std::unique_ptr<EnvInterface> env = make_env(spec.env.name, spec.env.horizon);
    out.curve = thor_train(*env, phi, cfg).curve;
    return out;
}

std::string run_csv(const RunSeries& run) {
    std::ostringstream out;
    out << "method,k,seed,iteration,env_steps,mean_return,shaped_return,kl,critic_loss\n";
    for (const IterationRecord& rec : run.curve) {
        out << run.method << ',' << k_to_string(run.k) << ',' << run.seed << ',' << rec.iteration
            << ',' << rec.env_steps << ',' << format_double(rec.mean_return) << ','
            << format_double(rec.shaped_return) << ',' << format_double(rec.kl) << ','
            << format_double(rec.critic_loss) << "\n";
    }
    return out.str();
}

std::vector<AggregateSeries> aggregate_runs(const std::vector<RunSeries>& runs) {
    std::map<std::pair<std::string, long>, std::vector<const RunSeries*>> groups;
    for (const RunSeries& run : runs) {
        if (run.failed) continue;
        groups[{run.method, sort_k(run.k)}].push_back(&run);
    }
    std::vector<AggregateSeries> aggregates;
    for (const auto& [key, members] : groups) {
        AggregateSeries agg;
        agg.method = key.first;
        agg.k = members.front()->k;
        const std::size_t iterations = members.front()->curve.size();
        for (const RunSeries* run : members)
            if (run->curve.size() != iterations)
                throw std::runtime_error("aggregate_runs: misaligned curve lengths for method " +
                                         agg.method);
        for (std::size_t i = 0; i < iterations; ++i) {
            AggregatePoint pt;
            pt.iteration = members.front()->curve[i].iteration;
            pt.n = static_cast<int>(members.size());
            double sum = 0.0;
            for (const RunSeries* run : members) sum += run->curve[i].mean_return;
            pt.mean = sum / pt.n;
            double sq = 0.0;
            for (const RunSeries* run : members) {
                const double d = run->curve[i].mean_return - pt.mean;
                sq += d * d;
            }
            pt.std = std::sqrt(sq / pt.n);
            agg.points.push_back(pt);
        }
        aggregates.push_back(std::move(agg));
    }
    return aggregates;
}

std::string aggregate_csv(const std::vector<AggregateSeries>& aggregates) {
    std::ostringstream out;
    out << "method,k,iteration,mean,std,n\n";
    for (const AggregateSeries& agg : aggregates)
        for (const AggregatePoint& pt : agg.points)
            out << agg.method << ',' << k_to_string(agg.k) << ',' << pt.iteration << ','
                << format_double(pt.mean) << ',' << format_double(pt.std) << ',' << pt.n << "\n";
    return out.str();
}

LearningCurveSet run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    std::filesystem::create_directories(spec.output_dir);

    const std::vector<MethodArm> arms = spec.arms();
    const bool needs_oracle = std::any_of(arms.begin(), arms.end(), [](const MethodArm& arm) {
        return arm.method != "trpo_gae";
    });
    std::optional<ValueOracle> oracle;
    if (needs_oracle) oracle = build_oracle(spec.env, spec.oracle, spec.train.discount);
    const ZeroPotential zero;

    struct Job {
        MethodArm arm;
        std::uint64_t seed = 0;
    };
    std::vector<Job> jobs;
    for (const MethodArm& arm : arms)
        for (std::uint64_t seed : spec.seeds) jobs.push_back({arm, seed});

    std::vector<RunSeries> results(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job& job = jobs[i];
            RunSeries& out = results[i];
            try {
                const Potential& phi =
                    job.arm.method == "trpo_gae" ? static_cast<const Potential&>(zero) : *oracle;
                out = run_single(spec, job.arm, job.seed, phi);
                write_file(spec.output_dir + "/raw_" + out.method + "_k" + k_to_string(out.k) +
                               "_seed" + std::to_string(out.seed) + ".csv",
                           run_csv(out));
            } catch (const std::exception& e) {
                out.method = job.arm.method;
                out.k = job.arm.k;
                out.seed = job.seed;
                out.failed = true;
                out.error = e.what();
                out.curve.clear();
            }
        }
    };

    int n_workers = spec.workers > 0 ? spec.workers
                                     : static_cast<int>(std::thread::hardware_concurrency());
    n_workers = std::max(1, std::min<int>(n_workers, static_cast<int>(jobs.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    LearningCurveSet curves;
    curves.runs = std::move(results);
    std::sort(curves.runs.begin(), curves.runs.end(), run_before);
    for (const RunSeries& run : curves.runs)
        if (run.failed)
            curves.failures.push_back(run_label(run.method, run.k, run.seed) + ": " + run.error);
    curves.aggregates = aggregate_runs(curves.runs);
    write_file(spec.output_dir + "/aggregate.csv", aggregate_csv(curves.aggregates));
    return curves;
}

RunSeries load_run_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_run_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "method,k,seed,iteration,env_steps,mean_return,shaped_return,kl,critic_loss")
        throw std::runtime_error("load_run_csv: bad header in " + path);
    RunSeries run;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream fs(line);
        while (std::getline(fs, field, ',')) fields.push_back(field);
        if (fields.size() != 9)
            throw std::runtime_error("load_run_csv: expected 9 fields, got " +
                                     std::to_string(fields.size()));
        if (first) {
            run.method = fields[0];
            run.k = k_from_string(fields[1]);
            run.seed = parse_u64_value("seed", fields[2]);
            first = false;
        }
        IterationRecord rec;
        rec.iteration = static_cast<int>(parse_int_value("iteration", fields[3]));
        rec.env_steps = parse_int_value("env_steps", fields[4]);
        rec.mean_return = parse_double_value("mean_return", fields[5]);
        rec.shaped_return = parse_double_value("shaped_return", fields[6]);
        rec.kl = parse_double_value("kl", fields[7]);
        rec.critic_loss = parse_double_value("critic_loss", fields[8]);
        run.curve.push_back(rec);
    }
    return run;
}

std::vector<AggregateSeries> load_aggregate_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_aggregate_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "method,k,iteration,mean,std,n")
        throw std::runtime_error("load_aggregate_csv: bad header in " + path);
    std::map<std::pair<std::string, long>, AggregateSeries> groups;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream fs(line);
        while (std::getline(fs, field, ',')) fields.push_back(field);
        if (fields.size() != 6)
            throw std::runtime_error("load_aggregate_csv: expected 6 fields, got " +
                                     std::to_string(fields.size()));
        const int k = k_from_string(fields[1]);
        AggregateSeries& agg = groups[{fields[0], sort_k(k)}];
        agg.method = fields[0];
        agg.k = k;
        AggregatePoint pt;
        pt.iteration = static_cast<int>(parse_int_value("iteration", fields[2]));
        pt.mean = parse_double_value("mean", fields[3]);
        pt.std = parse_double_value("std", fields[4]);
        pt.n = static_cast<int>(parse_int_value("n", fields[5]));
        agg.points.push_back(pt);
    }
    std::vector<AggregateSeries> aggregates;
    for (auto& [key, agg] : groups) aggregates.push_back(std::move(agg));
    return aggregates;
}

std::vector<MethodSummary> summarize(const std::vector<AggregateSeries>& aggregates,
                                     double threshold) {
    std::vector<MethodSummary> summaries;
    for (const AggregateSeries& agg : aggregates) {
        if (agg.points.empty()) throw std::invalid_argument("summarize: empty aggregate series");
        MethodSummary s;
        s.method = agg.method;
        s.k = agg.k;
        s.final_mean_reward = agg.points.back().mean;
        for (const AggregatePoint& pt : agg.points) {
            if (pt.mean >= threshold) {
                s.iterations_to_threshold = pt.iteration;
                break;
            }
        }
        double auc = 0.0;
        for (std::size_t i = 1; i < agg.points.size(); ++i)
            auc += 0.5 * (agg.points[i - 1].mean + agg.points[i].mean) *
                   (agg.points[i].iteration - agg.points[i - 1].iteration);
        s.auc = auc;
        summaries.push_back(std::move(s));
    }
    return summaries;
}

std::string render_summary(const std::vector<MethodSummary>& summaries, double threshold) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %-5s %14s %12s %14s\n", "method", "k", "final_reward",
                  "iters_to_thr", "auc");
    out << buf;
    for (const MethodSummary& s : summaries) {
        const std::string iters =
            s.iterations_to_threshold ? std::to_string(*s.iterations_to_threshold) : "never";
        std::snprintf(buf, sizeof(buf), "%-12s %-5s %14.4f %12s %14.2f\n", s.method.c_str(),
                      k_to_string(s.k).c_str(), s.final_mean_reward, iters.c_str(), s.auc);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "threshold: %g\n", threshold);
    out << buf;
    return out.str();
}

} // namespace thor
