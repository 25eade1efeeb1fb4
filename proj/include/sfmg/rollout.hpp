#pragma once

// Autoregressive multi-agent prediction with a trained SFMGNet.

#include <optional>
#include <vector>

#include "sfmg/annotated_dataset.hpp"
#include "sfmg/features.hpp"
#include "sfmg/sfmgnet.hpp"

namespace sfmg {

struct RolloutAgent {
    AgentId id = 0;
    std::vector<Vec2> history;  // contiguous observed positions, most recent last
    std::optional<Vec2> goal;   // annotated destination, if known
    double desired_speed = 1.34;
};

struct RolloutScene {
    double dt = 0.1;
    int start_step = 0;  // step index of the last observed sample
    std::vector<RolloutAgent> agents;
    std::vector<Obstacle> obstacles;
    std::vector<Group> groups;

    const Group* group_of(AgentId id) const;
};

struct RolloutOptions {
    double horizon_s = 4.8;
    bool joint = true;  // neighbours from co-predicted states; false: constant velocity
    double goal_radius = 0.3;
};

/// Number of predicted steps, ceil(horizon / dt) with a small tolerance.
int horizon_steps(double horizon_s, double dt);

/// Scene of every agent observed at `step`, with its contiguous history up to
/// and including that step (at most `max_history` samples).
RolloutScene scene_from_dataset(const AnnotatedDataset& data, int step, int max_history);

/// Predicted positions for steps start_step+1 .. start_step+H of every agent.
/// Agents with at least n history samples are driven by the model; shorter
/// histories are extrapolated at constant velocity. An agent that reaches
/// its annotated goal stops and is no longer seen by the others.
std::vector<Trajectory> rollout(const ModelParams& params, const RolloutScene& scene,
                                const FeatureConfig& features, const RolloutOptions& options = {});

/// Constant-velocity reference predictor.
std::vector<Trajectory> constant_velocity(const RolloutScene& scene, int steps);

}  // namespace sfmg
