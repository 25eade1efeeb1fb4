#pragma once

#include <map>
#include <string>
#include <vector>

#include "sfmg/core.hpp"
#include "sfmg/social_force.hpp"

namespace sfmg {

/// One recorded scene: trajectories plus the annotations the feature
/// extractor consumes. Synthetic scenes also carry the simulator's per-sample
/// force breakdowns, which serve as training targets.
struct AnnotatedDataset {
    std::string name;
    double dt = 0.4;
    std::vector<Trajectory> trajectories;
    std::vector<Group> groups;
    std::vector<Obstacle> obstacles;
    std::map<AgentId, Vec2> destinations;
    std::map<AgentId, double> desired_speeds;
    std::vector<ForceRecord> forces;

    const Trajectory* find_trajectory(AgentId id) const;
    const Group* group_of(AgentId id) const;
    const ForceRecord* find_force(AgentId id, int step) const;

    // Throws DataError when a group member has no trajectory or dt <= 0.
    void validate() const;

    /// Reconstructs the simulator scene at a recorded step from stored
    /// positions, velocities, goals and desired speeds. Requires force records.
    Scene scene_at(int step) const;
};

}  // namespace sfmg
