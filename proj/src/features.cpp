#include "sfmg/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace sfmg {

const char* to_string(GoalSource s) {
    switch (s) {
        case GoalSource::automatic: return "auto";
        case GoalSource::annotated: return "annotated";
        case GoalSource::imm: return "imm";
    }
    return "?";
}

GoalSource parse_goal_source(const std::string& s) {
    if (s == "auto") return GoalSource::automatic;
    if (s == "annotated") return GoalSource::annotated;
    if (s == "imm") return GoalSource::imm;
    throw UsageError("unknown goal source '" + s + "' (expected auto, annotated or imm)");
}

void FeatureConfig::validate() const {
    if (n < 2) throw UsageError("window length n must be at least 2");
    if (!(fov.half_angle > 0.0 && fov.half_angle <= std::numbers::pi)) {
        throw UsageError("field-of-view half angle must lie in (0, pi]");
    }
    if (d_coh < 0.0) throw UsageError("d_coh must be non-negative");
    if (!(nominal_speed > 0.0)) throw UsageError("nominal speed must be positive");
    if (!(imm_observation_s > 0.0)) throw UsageError("IMM observation span must be positive");
}

GroupFeature group_feature(AgentId agent, const Vec2& position, const Vec2& velocity,
                           const Vec2& goal_dir, double desired_speed, const Group* group,
                           std::span<const AgentPosition> present, const FeatureConfig& cfg) {
    GroupFeature g;
    if (group == nullptr || !group->contains(agent)) return g;
    g.in_group = true;

    Vec2 others_sum;
    int others = 0;
    for (const auto& p : present) {
        if (p.id == agent || !group->contains(p.id)) continue;
        others_sum += p.position;
        ++others;
    }
    if (others == 0) return g;

    const Vec2 centroid = (others_sum + position) / static_cast<double>(others + 1);
    const Vec2 others_centroid = others_sum / static_cast<double>(others);
    g.v_desired = goal_dir * desired_speed;
    g.theta = min_rotation_into_view(position, gaze_direction(velocity, goal_dir), others_centroid,
                                     cfg.fov.half_angle);
    if (distance(position, centroid) >= cfg.d_coh && g.v_desired.squared_norm() != 0.0) {
        g.eta_centroid = unit_vector(position, centroid);
    }
    return g;
}

FeatureFrame build_frame(const FrameInputs& in, const FeatureConfig& cfg) {
    if (in.window.n() != cfg.n) {
        throw UsageError("frame window holds " + std::to_string(in.window.n()) + " positions, expected " +
                         std::to_string(cfg.n));
    }
    FeatureFrame f;
    f.window = in.window;
    f.goal_dir = in.goal_dir;
    const Vec2 p = in.window.last();

    if (!in.obstacles.empty()) {
        const ObstacleHit hit = nearest_obstacle_point(p, in.obstacles);
        f.obstacle.dist = hit.distance;
        f.obstacle.eta = unit_vector(hit.point, p);
        f.obstacle.present = true;
    }

    std::vector<NeighborFeature> found;
    for (const auto& other : in.present) {
        if (other.id == in.agent) continue;
        if (cfg.exclude_group_members && in.group != nullptr && in.group->contains(other.id)) continue;
        NeighborFeature nb;
        nb.dist = distance(p, other.position);
        nb.eta = unit_vector(other.position, p);
        nb.present = true;
        found.push_back(nb);
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const NeighborFeature& a, const NeighborFeature& b) { return a.dist < b.dist; });
    const std::size_t keep = std::min<std::size_t>(found.size(), kNeighborSlots);
    std::copy_n(found.begin(), keep, f.neighbors.begin());

    f.group = group_feature(in.agent, p, in.window.last_velocity(), in.goal_dir, in.desired_speed,
                            in.group, in.present, cfg);
    return f;
}

Vec2 imm_goal_direction(std::span<const Vec2> history, double dt, const FeatureConfig& cfg) {
    const auto want = static_cast<std::size_t>(std::lround(cfg.imm_observation_s / dt)) + 1;
    const std::size_t take = std::min(history.size(), std::max<std::size_t>(want, 2));
    if (take < 2) return {};
    ObservationWindow w;
    w.dt = dt;
    w.positions.assign(history.end() - static_cast<std::ptrdiff_t>(take), history.end());
    return estimate_goal(w, cfg.imm).direction;
}

namespace {

// Index of step t in the trajectory, or -1.
long index_of(const Trajectory& tr, int t) {
    auto it = std::lower_bound(tr.samples.begin(), tr.samples.end(), t,
                               [](const TrajectorySample& s, int step) { return s.step < step; });
    if (it == tr.samples.end() || it->step != t) return -1;
    return it - tr.samples.begin();
}

bool use_annotated(const AnnotatedDataset& data, AgentId agent, GoalSource source) {
    const bool has = data.destinations.count(agent) != 0;
    switch (source) {
        case GoalSource::annotated:
            if (!has) throw DataError("no annotated destination for agent " + std::to_string(agent));
            return true;
        case GoalSource::imm: return false;
        case GoalSource::automatic: return has;
    }
    return false;
}

double desired_speed_of(const AnnotatedDataset& data, AgentId agent, const FeatureConfig& cfg) {
    auto it = data.desired_speeds.find(agent);
    return it != data.desired_speeds.end() ? it->second : cfg.nominal_speed;
}

FeatureFrame frame_at(const AnnotatedDataset& data, const Trajectory& tr, long idx,
                      std::span<const AgentPosition> present, const FeatureConfig& cfg) {
    const auto n = static_cast<long>(cfg.n);
    FrameInputs in;
    in.agent = tr.agent_id;
    in.window.dt = data.dt;
    for (long k = idx - n + 1; k <= idx; ++k) in.window.positions.push_back(tr.samples[static_cast<std::size_t>(k)].position);
    const Vec2 p = in.window.last();
    if (use_annotated(data, tr.agent_id, cfg.goal_source)) {
        in.goal_dir = unit_vector(p, data.destinations.at(tr.agent_id));
    } else {
        std::vector<Vec2> history;
        const long want = std::lround(cfg.imm_observation_s / data.dt) + 1;
        for (long k = std::max(0L, idx - want + 1); k <= idx; ++k) {
            history.push_back(tr.samples[static_cast<std::size_t>(k)].position);
        }
        in.goal_dir = imm_goal_direction(history, data.dt, cfg);
    }
    in.desired_speed = desired_speed_of(data, tr.agent_id, cfg);
    in.present = present;
    in.obstacles = data.obstacles;
    in.group = data.group_of(tr.agent_id);
    return build_frame(in, cfg);
}

}  // namespace

bool frame_eligible(const Trajectory& trajectory, int t, int n) {
    const long idx = index_of(trajectory, t);
    if (idx < n) return false;
    const auto& s = trajectory.samples;
    return s[static_cast<std::size_t>(idx)].step - s[static_cast<std::size_t>(idx - n)].step == n;
}

FeatureFrame extract_frame(const AnnotatedDataset& data, AgentId agent, int t, const FeatureConfig& cfg) {
    cfg.validate();
    const Trajectory* tr = data.find_trajectory(agent);
    if (tr == nullptr) throw DataError("unknown agent " + std::to_string(agent));
    const long idx = index_of(*tr, t);
    if (idx < 0) throw DataError("agent " + std::to_string(agent) + " is not observed at step " + std::to_string(t));
    if (!frame_eligible(*tr, t, cfg.n)) {
        throw DataError("agent " + std::to_string(agent) + " lacks " + std::to_string(cfg.n) +
                        " samples of history at step " + std::to_string(t));
    }
    std::vector<AgentPosition> present;
    for (const auto& other : data.trajectories) {
        if (auto q = other.at(t)) present.push_back({other.agent_id, *q});
    }
    return frame_at(data, *tr, idx, present, cfg);
}

std::vector<LabeledFrame> extract_all(const AnnotatedDataset& data, const FeatureConfig& cfg) {
    cfg.validate();
    std::map<int, std::vector<AgentPosition>> by_step;
    for (const auto& tr : data.trajectories) {
        for (const auto& s : tr.samples) by_step[s.step].push_back({tr.agent_id, s.position});
    }
    std::vector<LabeledFrame> out;
    for (const auto& tr : data.trajectories) {
        for (std::size_t i = 0; i < tr.samples.size(); ++i) {
            const int t = tr.samples[i].step;
            if (!frame_eligible(tr, t, cfg.n)) continue;
            LabeledFrame lf;
            lf.agent = tr.agent_id;
            lf.step = t;
            lf.frame = frame_at(data, tr, static_cast<long>(i), by_step.at(t), cfg);
            if (const ForceRecord* rec = data.find_force(tr.agent_id, t)) lf.target = rec->forces;
            out.push_back(std::move(lf));
        }
    }
    return out;
}

}  // namespace sfmg
