#include "thor/trajectory_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace thor {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

double parse_double(const std::string& s, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw std::runtime_error(std::string("trajectory file: bad ") + what + " field '" + s + "'");
    return v;
}

long parse_long(const std::string& s, const char* what) {
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw std::runtime_error(std::string("trajectory file: bad ") + what + " field '" + s + "'");
    return v;
}

} // namespace

void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories) {
    if (trajectories.empty() || trajectories[0].records.empty())
        throw std::invalid_argument("save_trajectories: nothing to save");
    const TransitionRecord& first = trajectories[0].records[0];
    const int state_dim = static_cast<int>(first.state.size());
    const bool discrete = first.action.is_discrete();
    const int action_dim = discrete ? 1 : static_cast<int>(first.action.box.size());

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_trajectories: cannot open " + path);
    out << "state_dim=" << state_dim << ",action_dim=" << action_dim
        << ",action_kind=" << (discrete ? "discrete" : "box") << "\n";
    for (const Trajectory& traj : trajectories) {
        traj.validate();
        for (const TransitionRecord& rec : traj.records) {
            if (static_cast<int>(rec.state.size()) != state_dim)
                throw std::invalid_argument("save_trajectories: inconsistent state dimension");
            if (rec.action.is_discrete() != discrete)
                throw std::invalid_argument("save_trajectories: mixed action kinds");
            out << traj.episode_id << ',' << rec.t;
            for (double x : rec.state) out << ',' << format_double(x);
            if (discrete) {
                out << ',' << rec.action.index;
            } else {
                if (static_cast<int>(rec.action.box.size()) != action_dim)
                    throw std::invalid_argument("save_trajectories: inconsistent action dimension");
                for (double x : rec.action.box) out << ',' << format_double(x);
            }
            out << ',' << format_double(rec.cost) << ',' << (rec.done ? 1 : 0) << "\n";
        }
    }
    if (!out) throw std::runtime_error("save_trajectories: write failed for " + path);
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_trajectories: cannot open " + path);
    std::string header;
    if (!std::getline(in, header))
        throw std::runtime_error("load_trajectories: empty file " + path);

    int state_dim = -1, action_dim = -1;
    bool discrete = true;
    for (const std::string& part : split_csv(header)) {
        const size_t eq = part.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("load_trajectories: malformed header '" + header + "'");
        const std::string key = part.substr(0, eq), value = part.substr(eq + 1);
        if (key == "state_dim") state_dim = static_cast<int>(parse_long(value, "state_dim"));
        else if (key == "action_dim") action_dim = static_cast<int>(parse_long(value, "action_dim"));
        else if (key == "action_kind") {
            if (value == "discrete") discrete = true;
            else if (value == "box") discrete = false;
            else throw std::runtime_error("load_trajectories: unknown action_kind '" + value + "'");
        } else {
            throw std::runtime_error("load_trajectories: unknown header key '" + key + "'");
        }
    }
    if (state_dim <= 0 || action_dim <= 0)
        throw std::runtime_error("load_trajectories: header missing dimensions");

    const size_t expected_fields = static_cast<size_t>(2 + state_dim + action_dim + 2);
    std::vector<Trajectory> trajectories;
    std::string line;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != expected_fields)
            throw std::runtime_error("load_trajectories: line " + std::to_string(line_no) +
                                     " has " + std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(expected_fields));
        TransitionRecord rec;
        const long episode_id = parse_long(fields[0], "episode_id");
        rec.t = static_cast<int>(parse_long(fields[1], "t"));
        size_t f = 2;
        rec.state.resize(state_dim);
        for (int i = 0; i < state_dim; ++i) rec.state[i] = parse_double(fields[f++], "state");
        if (discrete) {
            rec.action = Action::discrete(static_cast<int>(parse_long(fields[f++], "action")));
        } else {
            std::vector<double> box(action_dim);
            for (int i = 0; i < action_dim; ++i) box[i] = parse_double(fields[f++], "action");
            rec.action = Action::continuous(std::move(box));
        }
        rec.cost = parse_double(fields[f++], "cost");
        const long done = parse_long(fields[f++], "done");
        if (done != 0 && done != 1)
            throw std::runtime_error("load_trajectories: done flag must be 0 or 1 at line " +
                                     std::to_string(line_no));
        rec.done = done == 1;

        if (trajectories.empty() || trajectories.back().episode_id != episode_id || rec.t == 1) {
            trajectories.emplace_back();
            trajectories.back().episode_id = episode_id;
        }
        Trajectory& traj = trajectories.back();
        if (!traj.records.empty())
            traj.records.back().next_state = rec.state;
        traj.records.push_back(std::move(rec));
    }
    for (Trajectory& traj : trajectories) {
        traj.validate();
        traj.truncated = !traj.records.empty() && !traj.records.back().done;
    }
    return trajectories;
}

} // namespace thor
