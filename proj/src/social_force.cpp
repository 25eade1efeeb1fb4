#include "sfmg/social_force.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sfmg {

void SfmgParams::validate() const {
    if (!(tau > 0.0)) throw UsageError("tau must be positive");
    if (!(sigma > 0.0)) throw UsageError("sigma must be positive");
    if (!(R > 0.0)) throw UsageError("R must be positive");
    if (lambda < 0.0 || lambda > 1.0) throw UsageError("lambda must lie in [0, 1]");
    if (d_coh < 0.0) throw UsageError("d_coh must be non-negative");
    if (noise_std < 0.0) throw UsageError("noise_std must be non-negative");
    if (!(fov.half_angle > 0.0) || fov.half_angle > std::numbers::pi) {
        throw UsageError("fov half angle must lie in (0, pi]");
    }
    if (!(max_speed_factor > 0.0)) throw UsageError("max_speed_factor must be positive");
    if (goal_radius < 0.0) throw UsageError("goal_radius must be non-negative");
}

Vec2 acceleration_force(const PedestrianState& state, const SfmgParams& params) {
    const Vec2 e = unit_vector(state.position, state.goal);
    return (e * state.desired_speed - state.velocity) / params.tau;
}

Vec2 obstacle_force(const PedestrianState& state, std::span<const Obstacle> obstacles,
                    const SfmgParams& params) {
    if (obstacles.empty()) return {};
    const ObstacleHit hit = nearest_obstacle_point(state.position, obstacles);
    const Vec2 eta = unit_vector(hit.point, state.position);
    return eta * (params.U0 * std::exp(-hit.distance / params.R));
}

double anisotropy(double lambda, double cos_phi) {
    return lambda + (1.0 - lambda) * (1.0 + cos_phi) / 2.0;
}

namespace {

// Deterministic direction for coincident pedestrians, antisymmetric in the pair.
Vec2 coincident_direction(AgentId alpha, AgentId beta) {
    const auto lo = static_cast<std::uint64_t>(std::min(alpha, beta));
    const auto hi = static_cast<std::uint64_t>(std::max(alpha, beta));
    const std::uint64_t h = splitmix64(splitmix64(lo) ^ hi);
    const double angle = static_cast<double>(h % 3600) / 3600.0 * 2.0 * std::numbers::pi;
    const Vec2 eta = Vec2{1.0, 0.0}.rotated(angle);
    return alpha < beta ? eta : -eta;
}

}  // namespace

Vec2 pedestrian_force(const PedestrianState& alpha, const PedestrianState& beta,
                      const SfmgParams& params) {
    const Vec2 diff = alpha.position - beta.position;
    const double d = diff.norm();
    if (d < 1e-9) return coincident_direction(alpha.id, beta.id) * params.V0;
    const Vec2 eta_ab = diff / d;
    const Vec2 e_alpha = unit_vector(alpha.position, alpha.goal);
    const double cos_phi = (-eta_ab).dot(e_alpha);
    return eta_ab * (params.V0 * std::exp(-d / params.sigma) * anisotropy(params.lambda, cos_phi));
}

double min_rotation_into_view(const Vec2& position, const Vec2& gaze, const Vec2& target,
                              double half_angle) {
    const Vec2 bearing = unit_vector(position, target);
    if (bearing.squared_norm() == 0.0 || gaze.squared_norm() == 0.0) return 0.0;
    const double offset = std::abs(wrap_angle(std::atan2(bearing.y, bearing.x) -
                                              std::atan2(gaze.y, gaze.x)));
    return std::max(0.0, offset - half_angle);
}

Vec2 gaze_direction(const Vec2& velocity, const Vec2& goal_direction) {
    if (velocity.norm() > 1e-9) return velocity / velocity.norm();
    return goal_direction;
}

GroupForceParts group_force_parts(const PedestrianState& member, const Group& group,
                                  std::span<const PedestrianState> all_states,
                                  const FieldOfView& fov, const SfmgParams& params) {
    if (!group.contains(member.id)) {
        throw DataError("agent " + std::to_string(member.id) + " is not a member of group " +
                        std::to_string(group.id));
    }
    Vec2 others_sum;
    int others = 0;
    for (const auto& s : all_states) {
        if (s.id == member.id || !group.contains(s.id)) continue;
        others_sum += s.position;
        ++others;
    }
    if (others == 0) return {};

    const Vec2 centroid = (others_sum + member.position) / static_cast<double>(others + 1);
    const Vec2 others_centroid = others_sum / static_cast<double>(others);
    const Vec2 e = unit_vector(member.position, member.goal);
    const Vec2 v_desired = e * member.desired_speed;

    GroupForceParts parts;
    const double theta = min_rotation_into_view(member.position, gaze_direction(member.velocity, e),
                                                others_centroid, fov.half_angle);
    parts.visibility = v_desired * (params.S_vis * theta);
    if (distance(member.position, centroid) >= params.d_coh && v_desired.squared_norm() != 0.0) {
        parts.attraction = unit_vector(member.position, centroid) * params.S_att;
    }
    return parts;
}

Vec2 group_force(const PedestrianState& member, const Group& group,
                 std::span<const PedestrianState> all_states, const FieldOfView& fov,
                 const SfmgParams& params) {
    return group_force_parts(member, group, all_states, fov, params).total();
}

namespace {

Vec2 fluctuation(AgentId agent, const SfmgParams& params, std::uint64_t rng_seed) {
    if (params.noise_std == 0.0) return {};
    std::mt19937_64 rng(splitmix64(rng_seed ^ splitmix64(static_cast<std::uint64_t>(agent))));
    std::normal_distribution<double> normal(0.0, params.noise_std);
    const double x = normal(rng);
    const double y = normal(rng);
    return {x, y};
}

ForceBreakdown breakdown_for(const PedestrianState& agent, const Scene& scene,
                             const SfmgParams& params, std::uint64_t rng_seed) {
    ForceBreakdown f;
    f.acceleration = acceleration_force(agent, params);
    f.obstacle = obstacle_force(agent, scene.obstacles, params);
    for (const auto& other : scene.agents) {
        if (other.id == agent.id) continue;
        f.pedestrians += pedestrian_force(agent, other, params);
    }
    if (agent.group_id) {
        if (const Group* g = scene.find_group(*agent.group_id); g && g->contains(agent.id)) {
            f.group = group_force(agent, *g, scene.agents, params.fov, params);
        }
    }
    f.total = f.component_sum() + fluctuation(agent.id, params, rng_seed);
    return f;
}

}  // namespace

ForceBreakdown total_force(AgentId agent_id, const Scene& scene, const SfmgParams& params,
                           std::uint64_t rng_seed) {
    const PedestrianState* agent = scene.find_agent(agent_id);
    if (agent == nullptr) throw DataError("unknown agent id " + std::to_string(agent_id));
    return breakdown_for(*agent, scene, params, rng_seed);
}

namespace {

Scene advance(const Scene& scene, const SfmgParams& params, std::uint64_t rng_seed,
              std::vector<ForceBreakdown>* forces_out) {
    std::vector<ForceBreakdown> forces;
    forces.reserve(scene.agents.size());
    for (const auto& agent : scene.agents) {
        forces.push_back(breakdown_for(agent, scene, params, rng_seed));
    }
    Scene next = scene;
    for (std::size_t i = 0; i < next.agents.size(); ++i) {
        auto& a = next.agents[i];
        Vec2 v = a.velocity + forces[i].total * scene.dt;
        const double cap = params.max_speed_factor * a.desired_speed;
        const double speed = v.norm();
        if (speed > cap) v *= cap / speed;
        a.velocity = v;
        a.position += v * scene.dt;
    }
    if (forces_out) *forces_out = std::move(forces);
    return next;
}

}  // namespace

Scene step(const Scene& scene, const SfmgParams& params, std::uint64_t rng_seed) {
    return advance(scene, params, rng_seed, nullptr);
}

SimulationResult simulate(const Scene& scene, const SfmgParams& params, double duration_s,
                          std::uint64_t rng_seed) {
    if (!(duration_s > 0.0)) throw UsageError("simulation duration must be positive");
    scene.validate();
    params.validate();

    const int steps = static_cast<int>(std::llround(duration_s / scene.dt));
    SimulationResult result;
    std::vector<std::size_t> slot;  // agent index -> trajectory index
    for (const auto& a : scene.agents) {
        slot.push_back(result.trajectories.size());
        result.trajectories.push_back({a.id, {}});
    }
    auto index_of = [&](AgentId id) {
        for (std::size_t i = 0; i < scene.agents.size(); ++i) {
            if (scene.agents[i].id == id) return slot[i];
        }
        throw InvariantError("agent vanished from simulation bookkeeping");
    };

    Scene current = scene;
    for (int k = 0; k <= steps; ++k) {
        // Arrived agents leave before the step is recorded, so every recorded
        // force is the one that drives the recorded motion.
        std::erase_if(current.agents, [&](const PedestrianState& a) {
            return distance(a.position, a.goal) < params.goal_radius;
        });
        if (current.agents.empty()) break;

        const std::uint64_t step_seed = splitmix64(rng_seed + static_cast<std::uint64_t>(k));
        std::vector<ForceBreakdown> forces;
        Scene next = advance(current, params, step_seed, &forces);
        for (std::size_t i = 0; i < current.agents.size(); ++i) {
            const auto& a = current.agents[i];
            result.trajectories[index_of(a.id)].samples.push_back({k, a.position});
            result.forces.push_back({k, a.id, a.velocity, forces[i]});
        }
        if (k < steps) current = std::move(next);
    }
    std::erase_if(result.trajectories, [](const Trajectory& t) { return t.empty(); });
    result.final_scene = current;
    return result;
}

}  // namespace sfmg
