#include "sfmg/annotated_dataset.hpp"

#include <algorithm>

namespace sfmg {

const Trajectory* AnnotatedDataset::find_trajectory(AgentId id) const {
    for (const auto& t : trajectories) {
        if (t.agent_id == id) return &t;
    }
    return nullptr;
}

const Group* AnnotatedDataset::group_of(AgentId id) const {
    for (const auto& g : groups) {
        if (g.contains(id)) return &g;
    }
    return nullptr;
}

const ForceRecord* AnnotatedDataset::find_force(AgentId id, int step) const {
    // Records are stored step-major, as simulate() emits them.
    auto it = std::lower_bound(forces.begin(), forces.end(), step,
                               [](const ForceRecord& r, int s) { return r.step < s; });
    for (; it != forces.end() && it->step == step; ++it) {
        if (it->agent_id == id) return &*it;
    }
    return nullptr;
}

void AnnotatedDataset::validate() const {
    if (!(dt > 0.0)) throw DataError("dataset dt must be positive");
    for (const auto& g : groups) {
        for (AgentId m : g.member_ids) {
            if (find_trajectory(m) == nullptr) {
                throw DataError("group " + std::to_string(g.id) + " member " + std::to_string(m) +
                                " has no trajectory");
            }
        }
    }
    for (const auto& t : trajectories) {
        for (std::size_t i = 1; i < t.samples.size(); ++i) {
            if (t.samples[i].step <= t.samples[i - 1].step) {
                throw DataError("trajectory " + std::to_string(t.agent_id) +
                                " has non-increasing timesteps");
            }
        }
    }
}

Scene AnnotatedDataset::scene_at(int step) const {
    Scene scene;
    scene.dt = dt;
    scene.obstacles = obstacles;
    scene.groups = groups;
    for (const auto& t : trajectories) {
        const auto pos = t.at(step);
        if (!pos) continue;
        const ForceRecord* rec = find_force(t.agent_id, step);
        if (rec == nullptr) throw DataError("no force record for agent " + std::to_string(t.agent_id));
        PedestrianState s;
        s.id = t.agent_id;
        s.position = *pos;
        s.velocity = rec->velocity;
        if (auto it = destinations.find(t.agent_id); it != destinations.end()) s.goal = it->second;
        if (auto it = desired_speeds.find(t.agent_id); it != desired_speeds.end()) {
            s.desired_speed = it->second;
        }
        if (const Group* g = group_of(t.agent_id)) s.group_id = g->id;
        scene.agents.push_back(s);
    }
    return scene;
}

}  // namespace sfmg
