#pragma once

// Feature extraction: trajectories plus group and obstacle annotations in,
// per-agent FeatureFrames out. The same frame builder serves training-set
// extraction and rollout.

#include <optional>
#include <span>
#include <vector>

#include "sfmg/annotated_dataset.hpp"
#include "sfmg/feature_frame.hpp"
#include "sfmg/goal_imm.hpp"
#include "sfmg/social_force.hpp"

namespace sfmg {

enum class GoalSource {
    automatic,  // annotated destinations when present, IMM otherwise
    annotated,
    imm,
};

const char* to_string(GoalSource s);
GoalSource parse_goal_source(const std::string& s);

struct FeatureConfig {
    int n = 10;
    FieldOfView fov;
    double d_coh = 0.5;
    double nominal_speed = 1.34;  // used when a dataset lacks desired speeds
    bool exclude_group_members = false;
    GoalSource goal_source = GoalSource::automatic;
    ImmConfig imm;
    double imm_observation_s = 1.2;

    void validate() const;
};

struct AgentPosition {
    AgentId id = 0;
    Vec2 position;
};

/// Everything needed to build one frame; positions of co-present agents
/// include the ego agent, which is skipped.
struct FrameInputs {
    AgentId agent = 0;
    ObservationWindow window;  // exactly n positions, most recent last
    Vec2 goal_dir;
    double desired_speed = 1.34;
    std::span<const AgentPosition> present;
    std::span<const Obstacle> obstacles;
    const Group* group = nullptr;
};

FeatureFrame build_frame(const FrameInputs& in, const FeatureConfig& cfg);

/// Group geometry for one member; zero (and in_group = false) without a group.
GroupFeature group_feature(AgentId agent, const Vec2& position, const Vec2& velocity,
                           const Vec2& goal_dir, double desired_speed, const Group* group,
                           std::span<const AgentPosition> present, const FeatureConfig& cfg);

/// Goal direction from the IMM estimator over the trailing observation.
Vec2 imm_goal_direction(std::span<const Vec2> history, double dt, const FeatureConfig& cfg);

/// True when the agent is observed at t with at least n earlier samples
/// (t - first_step >= n) and the n positions ending at t are contiguous.
bool frame_eligible(const Trajectory& trajectory, int t, int n);

FeatureFrame extract_frame(const AnnotatedDataset& data, AgentId agent, int t,
                           const FeatureConfig& cfg = {});

struct LabeledFrame {
    AgentId agent = 0;
    int step = 0;
    FeatureFrame frame;
    std::optional<ForceBreakdown> target;
};

/// Every eligible (agent, t) in trajectory order, with simulator force
/// targets attached when the dataset carries them.
std::vector<LabeledFrame> extract_all(const AnnotatedDataset& data, const FeatureConfig& cfg = {});

}  // namespace sfmg
