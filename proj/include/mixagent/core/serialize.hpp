#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mixagent/core/domain.hpp"

namespace mixagent::core {

// Versioned structured-text form of a DomainSpace.
nlohmann::json space_to_json(const DomainSpace& space);
DomainSpace space_from_json(const nlohmann::json& j);

nlohmann::json distribution_to_json(const MixtureDistribution& d);
MixtureDistribution distribution_from_json(const nlohmann::json& j);

// One trajectory per line: seed, tier, start, actions, optional feedback.
std::string trajectory_to_line(const TrajectoryRecord& t);
TrajectoryRecord trajectory_from_line(const std::string& line, std::size_t dimension);

void write_trajectories(const std::string& path, const std::vector<TrajectoryRecord>& ts);
std::vector<TrajectoryRecord> read_trajectories(const std::string& path, std::size_t dimension);

}  // namespace mixagent::core
