#include "sfmg/core.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <set>

namespace sfmg {

bool Group::contains(AgentId agent) const {
    return std::find(member_ids.begin(), member_ids.end(), agent) != member_ids.end();
}

const PedestrianState* Scene::find_agent(AgentId id) const {
    for (const auto& a : agents) {
        if (a.id == id) return &a;
    }
    return nullptr;
}

const Group* Scene::find_group(GroupId id) const {
    for (const auto& g : groups) {
        if (g.id == id) return &g;
    }
    return nullptr;
}

void Scene::validate() const {
    if (!(dt > 0.0)) throw DataError("scene dt must be positive");
    std::set<AgentId> ids;
    for (const auto& a : agents) {
        if (!ids.insert(a.id).second) {
            throw DataError("duplicate agent id " + std::to_string(a.id));
        }
        if (!(a.desired_speed > 0.0)) {
            throw DataError("agent " + std::to_string(a.id) + " has non-positive desired speed");
        }
        if (!a.goal.finite() || !a.position.finite() || !a.velocity.finite()) {
            throw DataError("agent " + std::to_string(a.id) + " has a non-finite state");
        }
    }
    for (const auto& o : obstacles) {
        if (o.polyline.empty()) throw DataError("obstacle polyline has no vertices");
    }
    for (const auto& g : groups) {
        if (!g.contains(g.leader_id)) {
            throw DataError("group " + std::to_string(g.id) + " leader is not a member");
        }
        for (AgentId m : g.member_ids) {
            if (!ids.count(m)) {
                throw DataError("group " + std::to_string(g.id) + " lists unknown agent " + std::to_string(m));
            }
        }
    }
}

std::optional<Vec2> Trajectory::at(int step) const {
    auto it = std::lower_bound(samples.begin(), samples.end(), step,
                               [](const TrajectorySample& s, int v) { return s.step < v; });
    if (it == samples.end() || it->step != step) return std::nullopt;
    return it->position;
}

Vec2 unit_vector(const Vec2& from, const Vec2& to) {
    const Vec2 d = to - from;
    const double n = d.norm();
    if (n < 1e-12) return {};
    return d / n;
}

Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squared_norm();
    if (len2 == 0.0) return a;
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return a + ab * t;
}

ObstacleHit nearest_obstacle_point(const Vec2& p, std::span<const Obstacle> obstacles) {
    if (obstacles.empty()) throw DataError("no obstacles");
    ObstacleHit best{{}, std::numeric_limits<double>::infinity()};
    for (const auto& obstacle : obstacles) {
        const auto& line = obstacle.polyline;
        if (line.size() == 1) {
            const double d = distance(p, line.front());
            if (d < best.distance) best = {line.front(), d};
            continue;
        }
        for (std::size_t i = 0; i + 1 < line.size(); ++i) {
            const Vec2 q = closest_point_on_segment(p, line[i], line[i + 1]);
            const double d = distance(p, q);
            if (d < best.distance) best = {q, d};
        }
    }
    return best;
}

double wrap_angle(double angle) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    angle = std::fmod(angle + std::numbers::pi, two_pi);
    if (angle <= 0.0) angle += two_pi;
    return angle - std::numbers::pi;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace sfmg
