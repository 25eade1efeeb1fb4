#pragma once

// Per-agent model inputs at one timestep.

#include <array>
#include <vector>

#include "sfmg/core.hpp"

namespace sfmg {

inline constexpr int kNeighborSlots = 9;
inline constexpr double kFarField = 100.0;  // distance sentinel for absent entities, m

struct ObservationWindow {
    std::vector<Vec2> positions;  // most recent last
    double dt = 0.1;

    int n() const { return static_cast<int>(positions.size()); }
    Vec2 last() const { return positions.back(); }
    /// Last displacement divided by dt; zero for windows shorter than 2.
    Vec2 last_velocity() const;
};

struct NeighborFeature {
    Vec2 eta;                 // unit, from neighbour toward the agent
    double dist = kFarField;  // m
    bool present = false;
};

struct ObstacleFeature {
    Vec2 eta;                 // unit, from nearest obstacle point toward the agent
    double dist = kFarField;  // m
    bool present = false;
};

struct GroupFeature {
    double theta = 0.0;  // rad
    Vec2 v_desired;      // m/s
    Vec2 eta_centroid;   // unit or zero
    bool in_group = false;
};

struct FeatureFrame {
    ObservationWindow window;
    Vec2 goal_dir;
    ObstacleFeature obstacle;
    std::array<NeighborFeature, kNeighborSlots> neighbors{};
    GroupFeature group;
};

struct NormalizedWindow {
    std::vector<Vec2> offsets;       // positions minus the first position
    std::vector<double> step_norms;  // |offsets[k] - offsets[k-1]|, k = 1..n-1
};

/// Translation-free view of a window. Throws UsageError unless the window
/// holds exactly n positions.
NormalizedWindow normalize_window(const std::vector<Vec2>& positions, int n);

}  // namespace sfmg
