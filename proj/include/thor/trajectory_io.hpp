#ifndef THOR_TRAJECTORY_IO_HPP
#define THOR_TRAJECTORY_IO_HPP

#include <string>
#include <vector>

#include "thor/env.hpp"

namespace thor {

/// Line-delimited trajectory files.
///
/// First line declares dimensions:
///   state_dim=<n>,action_dim=<m>,action_kind=<discrete|box>
/// then one record per line:
///   episode_id,t,state_components...,action_components...,cost,done
/// with floats printed to 17 significant digits so that load/save round-trips
/// are byte-exact. Discrete actions serialize as one component holding the
/// index. Raw costs only; shaped costs are a derived, in-memory field.
///
/// The format does not carry the successor observation, so on load,
/// next_state is reconstructed from the following record and the final
/// record of each episode is left without one.
void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories);

std::vector<Trajectory> load_trajectories(const std::string& path);

/// Formats a double with 17 significant digits (shared by all file writers).
std::string format_double(double value);

} // namespace thor

#endif
