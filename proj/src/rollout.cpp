#include "sfmg/rollout.hpp"

#include <algorithm>
#include <cmath>

namespace sfmg {

const Group* RolloutScene::group_of(AgentId id) const {
    for (const auto& g : groups) {
        if (g.contains(id)) return &g;
    }
    return nullptr;
}

int horizon_steps(double horizon_s, double dt) {
    if (!(horizon_s > 0.0) || !(dt > 0.0)) throw UsageError("horizon and dt must be positive");
    return static_cast<int>(std::ceil(horizon_s / dt - 1e-9));
}

RolloutScene scene_from_dataset(const AnnotatedDataset& data, int step, int max_history) {
    RolloutScene scene;
    scene.dt = data.dt;
    scene.start_step = step;
    scene.obstacles = data.obstacles;
    scene.groups = data.groups;
    for (const auto& tr : data.trajectories) {
        auto it = std::lower_bound(tr.samples.begin(), tr.samples.end(), step,
                                   [](const TrajectorySample& s, int t) { return s.step < t; });
        if (it == tr.samples.end() || it->step != step) continue;
        RolloutAgent a;
        a.id = tr.agent_id;
        auto first = it;
        int expected = step;
        while (first != tr.samples.begin() && static_cast<int>(it - first) + 1 < max_history &&
               std::prev(first)->step == expected - 1) {
            --first;
            --expected;
        }
        for (auto s = first; s != std::next(it); ++s) a.history.push_back(s->position);
        if (auto d = data.destinations.find(tr.agent_id); d != data.destinations.end()) a.goal = d->second;
        if (auto v = data.desired_speeds.find(tr.agent_id); v != data.desired_speeds.end()) {
            a.desired_speed = v->second;
        }
        scene.agents.push_back(std::move(a));
    }
    return scene;
}

namespace {

Vec2 last_velocity(const std::vector<Vec2>& h, double dt) {
    if (h.size() < 2) return {};
    return (h.back() - h[h.size() - 2]) / dt;
}

Vec2 goal_direction_for(const RolloutAgent& agent, const std::vector<Vec2>& history, double dt,
                        const FeatureConfig& cfg) {
    const bool annotated = cfg.goal_source == GoalSource::annotated ||
                           (cfg.goal_source == GoalSource::automatic && agent.goal.has_value());
    if (annotated) {
        if (!agent.goal) throw DataError("no annotated destination for agent " + std::to_string(agent.id));
        return unit_vector(history.back(), *agent.goal);
    }
    return imm_goal_direction(history, dt, cfg);
}

}  // namespace

std::vector<Trajectory> rollout(const ModelParams& params, const RolloutScene& scene,
                                const FeatureConfig& features, const RolloutOptions& options) {
    features.validate();
    if (features.n != params.config.n) throw UsageError("feature window n does not match the model");
    const int steps = horizon_steps(options.horizon_s, scene.dt);
    const std::size_t m = scene.agents.size();

    std::vector<std::vector<Vec2>> hist(m);
    std::vector<bool> model_driven(m);
    std::vector<bool> arrived(m, false);
    std::vector<Vec2> cv_velocity(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& a = scene.agents[i];
        if (a.history.empty()) throw UsageError("agent " + std::to_string(a.id) + " has no history");
        hist[i] = a.history;
        model_driven[i] = static_cast<int>(a.history.size()) >= features.n;
        cv_velocity[i] = last_velocity(a.history, scene.dt);
    }

    std::vector<Trajectory> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i].agent_id = scene.agents[i].id;

    std::vector<AgentPosition> present;
    std::vector<Vec2> next(m);
    for (int k = 1; k <= steps; ++k) {
        present.clear();
        for (std::size_t i = 0; i < m; ++i) {
            if (arrived[i]) continue;
            const Vec2 p = options.joint ? hist[i].back()
                                         : scene.agents[i].history.back() + cv_velocity[i] * (scene.dt * (k - 1));
            present.push_back({scene.agents[i].id, p});
        }
        for (std::size_t i = 0; i < m; ++i) {
            const Vec2 p = hist[i].back();
            if (arrived[i]) {
                next[i] = p;
                continue;
            }
            if (!model_driven[i]) {
                next[i] = p + cv_velocity[i] * scene.dt;
                continue;
            }
            const auto& agent = scene.agents[i];
            FrameInputs in;
            in.agent = agent.id;
            in.window.dt = scene.dt;
            in.window.positions.assign(hist[i].end() - features.n, hist[i].end());
            in.goal_dir = goal_direction_for(agent, hist[i], scene.dt, features);
            in.desired_speed = agent.desired_speed;
            std::vector<AgentPosition> seen = present;
            if (!options.joint) {
                for (auto& s : seen) {
                    if (s.id == agent.id) s.position = p;
                }
            }
            in.present = seen;
            in.obstacles = scene.obstacles;
            in.group = scene.group_of(agent.id);
            const FeatureFrame frame = build_frame(in, features);
            const Vec2 force = total_force_forward(frame, params).total;
            const Vec2 v = last_velocity(hist[i], scene.dt) + force * scene.dt;
            next[i] = p + v * scene.dt;
        }
        for (std::size_t i = 0; i < m; ++i) {
            hist[i].push_back(next[i]);
            out[i].samples.push_back({scene.start_step + k, next[i]});
            const auto& goal = scene.agents[i].goal;
            if (!arrived[i] && goal && distance(next[i], *goal) < options.goal_radius) arrived[i] = true;
        }
    }
    return out;
}

std::vector<Trajectory> constant_velocity(const RolloutScene& scene, int steps) {
    std::vector<Trajectory> out;
    for (const auto& a : scene.agents) {
        if (a.history.empty()) throw UsageError("agent " + std::to_string(a.id) + " has no history");
        Trajectory t;
        t.agent_id = a.id;
        const Vec2 v = last_velocity(a.history, scene.dt);
        for (int k = 1; k <= steps; ++k) t.samples.push_back({scene.start_step + k, a.history.back() + v * (scene.dt * k)});
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace sfmg
