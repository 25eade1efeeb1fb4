#pragma once

// Domain types and geometric primitives shared by every module.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfmg {

// Error categories map onto CLI exit codes (usage 1, data 2, invariant 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class InvariantError : public Error {
public:
    using Error::Error;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    constexpr Vec2& operator-=(const Vec2& o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    constexpr Vec2& operator*=(double s) {
        x *= s;
        y *= s;
        return *this;
    }
    constexpr bool operator==(const Vec2&) const = default;

    constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    constexpr double squared_norm() const { return x * x + y * y; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }

    Vec2 rotated(double angle) const {
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        return {c * x - s * y, s * x + c * y};
    }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

using AgentId = std::int64_t;
using GroupId = std::int64_t;

struct PedestrianState {
    AgentId id = 0;
    Vec2 position;
    Vec2 velocity;
    Vec2 goal;
    double desired_speed = 1.34;  // m/s
    std::optional<GroupId> group_id;
};

struct Obstacle {
    std::vector<Vec2> polyline;

    bool operator==(const Obstacle&) const = default;
};

struct Group {
    GroupId id = 0;
    std::vector<AgentId> member_ids;
    AgentId leader_id = 0;

    bool contains(AgentId agent) const;
    bool operator==(const Group&) const = default;
};

struct Scene {
    double dt = 0.1;
    std::vector<PedestrianState> agents;
    std::vector<Obstacle> obstacles;
    std::vector<Group> groups;

    const PedestrianState* find_agent(AgentId id) const;
    const Group* find_group(GroupId id) const;

    // Throws DataError on a broken invariant (dt, unique ids, group members).
    void validate() const;
};

struct TrajectorySample {
    int step = 0;
    Vec2 position;

    bool operator==(const TrajectorySample&) const = default;
};

struct Trajectory {
    AgentId agent_id = 0;
    std::vector<TrajectorySample> samples;

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
    int first_step() const { return samples.front().step; }
    int last_step() const { return samples.back().step; }
    // Position at a given step, if the agent was observed there.
    std::optional<Vec2> at(int step) const;

    bool operator==(const Trajectory&) const = default;
};

struct ForceBreakdown {
    Vec2 acceleration;
    Vec2 obstacle;
    Vec2 pedestrians;
    Vec2 group;
    Vec2 total;

    Vec2 component_sum() const { return acceleration + obstacle + pedestrians + group; }
};

/// Unit vector pointing from `from` to `to`; the zero vector when the two
/// points coincide (within 1e-12), which callers read as "arrived".
Vec2 unit_vector(const Vec2& from, const Vec2& to);

struct ObstacleHit {
    Vec2 point;
    double distance = 0.0;
};

/// Closest point on any polyline (segment projection clamped to endpoints).
/// Throws DataError("no obstacles") for an empty list.
ObstacleHit nearest_obstacle_point(const Vec2& p, std::span<const Obstacle> obstacles);

/// Closest point on a single segment [a, b].
Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// splitmix64 step; used to derive independent per-run seeds from a master seed.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace sfmg
