#pragma once

// Social force model with group forces: acceleration toward the goal,
// exponential repulsion from the nearest obstacle point and from other
// pedestrians (anisotropic), and the visibility/attraction group terms.
// The simulator doubles as the force oracle for training targets.

#include <cstdint>
#include <numbers>
#include <vector>

#include "sfmg/core.hpp"

namespace sfmg {

struct FieldOfView {
    double half_angle = 100.0 * std::numbers::pi / 180.0;  // radians, (0, pi]
};

struct SfmgParams {
    double tau = 0.5;      // relaxation time, s
    double V0 = 5.0;       // pedestrian interaction strength, m/s^2
    double sigma = 0.3;    // pedestrian interaction range, m
    double U0 = 10.0;      // obstacle interaction strength, m/s^2
    double R = 0.2;        // obstacle interaction range, m
    double lambda = 0.2;   // anisotropy, [0, 1]
    double S_vis = -1.0;   // group visibility strength
    double S_att = 1.0;    // group attraction strength
    double d_coh = 0.5;    // group coherence threshold, m
    double noise_std = 0.0;  // std of the fluctuation term, m/s^2
    FieldOfView fov;
    double max_speed_factor = 1.3;  // speed clamp, multiple of desired speed
    double goal_radius = 0.3;       // arrival radius, m

    void validate() const;
};

Vec2 acceleration_force(const PedestrianState& state, const SfmgParams& params);

Vec2 obstacle_force(const PedestrianState& state, std::span<const Obstacle> obstacles,
                    const SfmgParams& params);

// Anisotropy factor lambda + (1 - lambda)(1 + cos_phi)/2.
double anisotropy(double lambda, double cos_phi);

Vec2 pedestrian_force(const PedestrianState& alpha, const PedestrianState& beta,
                      const SfmgParams& params);

/// Minimum rotation (radians, >= 0) of the gaze direction needed to bring
/// `target` inside a field of view of the given half angle.
double min_rotation_into_view(const Vec2& position, const Vec2& gaze, const Vec2& target,
                              double half_angle);

/// Gaze used for group visibility: velocity direction, or the goal direction
/// when the pedestrian is standing still.
Vec2 gaze_direction(const Vec2& velocity, const Vec2& goal_direction);

struct GroupForceParts {
    Vec2 visibility;
    Vec2 attraction;
    Vec2 total() const { return visibility + attraction; }
};

GroupForceParts group_force_parts(const PedestrianState& member, const Group& group,
                                  std::span<const PedestrianState> all_states,
                                  const FieldOfView& fov, const SfmgParams& params);

/// f_vis + f_att for one group member. Throws DataError if the member is not
/// in the group.
Vec2 group_force(const PedestrianState& member, const Group& group,
                 std::span<const PedestrianState> all_states, const FieldOfView& fov,
                 const SfmgParams& params);

/// All four components plus their sum (and the seeded fluctuation, if any).
ForceBreakdown total_force(AgentId agent_id, const Scene& scene, const SfmgParams& params,
                           std::uint64_t rng_seed);

/// One semi-implicit Euler step for every agent. Arrived agents are not
/// removed here; see simulate().
Scene step(const Scene& scene, const SfmgParams& params, std::uint64_t rng_seed);

struct ForceRecord {
    int step = 0;
    AgentId agent_id = 0;
    Vec2 velocity;
    ForceBreakdown forces;
};

struct SimulationResult {
    std::vector<Trajectory> trajectories;
    std::vector<ForceRecord> forces;  // one per recorded trajectory sample
    Scene final_scene;
};

/// Runs step() for duration_s, recording every agent's position and forces
/// at every step (t = 0 included). An agent within goal_radius of its goal
/// leaves the scene; its trajectory ends at the previous sample.
SimulationResult simulate(const Scene& scene, const SfmgParams& params, double duration_s,
                          std::uint64_t rng_seed);

}  // namespace sfmg
