#pragma once

// Brute-force reference evaluation of the social force terms, written against
// plain doubles so it shares no code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sfmg/social_force.hpp"

namespace oracle {

struct P {
    double x, y;
};

inline P sub(P a, P b) { return {a.x - b.x, a.y - b.y}; }
inline double len(P a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline P unit(P from, P to) {
    const P d = sub(to, from);
    const double l = len(d);
    if (l < 1e-12) return {0.0, 0.0};
    return {d.x / l, d.y / l};
}
inline P of(const sfmg::Vec2& v) { return {v.x, v.y}; }

// Bisection on the sign of d/dt |a + t(b - a) - p|^2, which is increasing in t.
inline P nearest_on_segment(P p, P a, P b) {
    auto at = [&](double t) { return P{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; };
    auto slope = [&](double t) {
        const P q = sub(at(t), p);
        return q.x * (b.x - a.x) + q.y * (b.y - a.y);
    };
    if (slope(0.0) >= 0.0) return a;
    if (slope(1.0) <= 0.0) return b;
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (slope(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return at(0.5 * (lo + hi));
}

inline P nearest_point(P p, const std::vector<sfmg::Obstacle>& obstacles, double& dist) {
    dist = INFINITY;
    P best{0, 0};
    for (const auto& o : obstacles) {
        const auto& v = o.polyline;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const P q = v.size() == 1 ? of(v[0]) : (i + 1 < v.size() ? nearest_on_segment(p, of(v[i]), of(v[i + 1])) : of(v[i]));
            const double d = len(sub(p, q));
            if (d < dist) {
                dist = d;
                best = q;
            }
        }
    }
    return best;
}

// (v0 e - v) / tau
inline P acceleration(const sfmg::PedestrianState& s, const sfmg::SfmgParams& prm) {
    const P e = unit(of(s.position), of(s.goal));
    return {(s.desired_speed * e.x - s.velocity.x) / prm.tau, (s.desired_speed * e.y - s.velocity.y) / prm.tau};
}

// U0 exp(-d/R) eta, eta from the nearest obstacle point toward the pedestrian
inline P obstacle(const sfmg::PedestrianState& s, const std::vector<sfmg::Obstacle>& obs, const sfmg::SfmgParams& prm) {
    if (obs.empty()) return {0, 0};
    double d = 0.0;
    const P q = nearest_point(of(s.position), obs, d);
    const P eta = unit(q, of(s.position));
    const double m = prm.U0 * std::exp(-d / prm.R);
    return {m * eta.x, m * eta.y};
}

// V0 exp(-d/sigma) eta_ab * (lambda + (1 - lambda)(1 + cos phi)/2), cos phi = eta_ba . e_a
inline P pedestrian(const sfmg::PedestrianState& a, const sfmg::PedestrianState& b, const sfmg::SfmgParams& prm) {
    const P eta = unit(of(b.position), of(a.position));
    const double d = len(sub(of(a.position), of(b.position)));
    const P e = unit(of(a.position), of(a.goal));
    const double cos_phi = -(eta.x * e.x + eta.y * e.y);
    const double F = prm.lambda + (1.0 - prm.lambda) * (1.0 + cos_phi) / 2.0;
    const double m = prm.V0 * std::exp(-d / prm.sigma) * F;
    return {m * eta.x, m * eta.y};
}

// Expanded form: V0 (A1 e^{-d/s} eta + A2 eta (eta_ba . e) e^{-d/s})
inline P pedestrian_expanded(double lambda, double V0, double sigma, double d, P eta_ab, P e) {
    const double A1 = lambda + (1.0 - lambda) / 2.0;
    const double A2 = (1.0 - lambda) / 2.0;
    const double ex = std::exp(-d / sigma);
    const double proj = -(eta_ab.x * e.x + eta_ab.y * e.y);
    return {V0 * (A1 * ex * eta_ab.x + A2 * eta_ab.x * proj * ex), V0 * (A1 * ex * eta_ab.y + A2 * eta_ab.y * proj * ex)};
}

// Unsigned angle between two unit vectors via atan2(|cross|, dot).
inline double angle_between(P a, P b) { return std::atan2(std::abs(a.x * b.y - a.y * b.x), a.x * b.x + a.y * b.y); }

// Visibility plus attraction for one member. theta uses the centroid of the
// other members; attraction uses the centroid of the whole group.
inline P group(const sfmg::PedestrianState& m, const sfmg::Group& g, const std::vector<sfmg::PedestrianState>& all,
               const sfmg::SfmgParams& prm) {
    double ox = 0, oy = 0;
    int k = 0;
    for (const auto& s : all) {
        if (s.id == m.id) continue;
        if (std::find(g.member_ids.begin(), g.member_ids.end(), s.id) == g.member_ids.end()) continue;
        ox += s.position.x;
        oy += s.position.y;
        ++k;
    }
    if (k == 0) return {0, 0};
    const P others{ox / k, oy / k};
    const P centroid{(ox + m.position.x) / (k + 1), (oy + m.position.y) / (k + 1)};
    const P e = unit(of(m.position), of(m.goal));
    const P vdes{e.x * m.desired_speed, e.y * m.desired_speed};
    const double sp = len(of(m.velocity));
    const P gaze = sp > 1e-9 ? P{m.velocity.x / sp, m.velocity.y / sp} : e;
    const P bearing = unit(of(m.position), others);
    double theta = 0.0;
    if (len(bearing) > 0 && len(gaze) > 0) theta = std::max(0.0, angle_between(gaze, bearing) - prm.fov.half_angle);
    P f{prm.S_vis * theta * vdes.x, prm.S_vis * theta * vdes.y};
    if (len(sub(of(m.position), centroid)) >= prm.d_coh && (vdes.x != 0 || vdes.y != 0)) {
        const P n = unit(of(m.position), centroid);
        f.x += prm.S_att * n.x;
        f.y += prm.S_att * n.y;
    }
    return f;
}

struct RandomCase {
    sfmg::Scene scene;
    sfmg::SfmgParams params;
};

// Random scene: 2-6 agents no closer than 0.05 m, 0-3 obstacles, maybe one
// group, and random force parameters.
inline RandomCase random_case(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(-6.0, 6.0);
    std::uniform_real_distribution<double> vel(-1.5, 1.5);
    std::uniform_real_distribution<double> unit01(0.0, 1.0);
    std::uniform_int_distribution<int> n_agents(2, 6);
    std::uniform_int_distribution<int> n_obs(0, 3);
    std::uniform_int_distribution<int> n_vertices(1, 4);
    RandomCase c;
    auto& p = c.params;
    p.tau = 0.2 + unit01(rng);
    p.V0 = 0.5 + 6.0 * unit01(rng);
    p.sigma = 0.1 + 0.8 * unit01(rng);
    p.U0 = 1.0 + 15.0 * unit01(rng);
    p.R = 0.1 + 0.5 * unit01(rng);
    p.lambda = unit01(rng);
    p.S_vis = -3.0 + 6.0 * unit01(rng);
    p.S_att = 2.0 * unit01(rng);
    p.d_coh = 1.5 * unit01(rng);
    p.fov.half_angle = 0.2 + (std::acos(-1.0) - 0.2) * unit01(rng);

    const int m = n_agents(rng);
    for (int i = 0; i < m; ++i) {
        sfmg::PedestrianState s;
        s.id = 10 + i;
        for (;;) {
            s.position = {pos(rng), pos(rng)};
            bool ok = true;
            for (const auto& o : c.scene.agents) ok = ok && sfmg::distance(o.position, s.position) > 0.05;
            if (ok) break;
        }
        s.velocity = unit01(rng) < 0.1 ? sfmg::Vec2{} : sfmg::Vec2{vel(rng), vel(rng)};
        s.goal = {pos(rng) * 2, pos(rng) * 2};
        s.desired_speed = 0.5 + unit01(rng);
        c.scene.agents.push_back(s);
    }
    const int k = n_obs(rng);
    for (int i = 0; i < k; ++i) {
        sfmg::Obstacle o;
        const int nv = n_vertices(rng);
        for (int j = 0; j < nv; ++j) o.polyline.push_back({pos(rng) * 1.5, pos(rng) * 1.5});
        c.scene.obstacles.push_back(o);
    }
    if (m >= 2 && unit01(rng) < 0.7) {
        sfmg::Group g;
        g.id = 1;
        const int size = std::min(m, 2 + static_cast<int>(unit01(rng) * 3));
        for (int i = 0; i < size; ++i) {
            g.member_ids.push_back(c.scene.agents[static_cast<std::size_t>(i)].id);
            c.scene.agents[static_cast<std::size_t>(i)].group_id = 1;
        }
        g.leader_id = g.member_ids.front();
        c.scene.groups.push_back(g);
    }
    return c;
}

struct Breakdown {
    P acc, obs, ped, grp;
};

inline Breakdown breakdown(const sfmg::PedestrianState& a, const sfmg::Scene& scene, const sfmg::SfmgParams& prm) {
    Breakdown b{acceleration(a, prm), obstacle(a, scene.obstacles, prm), {0, 0}, {0, 0}};
    for (const auto& o : scene.agents) {
        if (o.id == a.id) continue;
        const P f = pedestrian(a, o, prm);
        b.ped.x += f.x;
        b.ped.y += f.y;
    }
    if (a.group_id) {
        for (const auto& g : scene.groups) {
            if (g.id == *a.group_id) b.grp = group(a, g, scene.agents, prm);
        }
    }
    return b;
}

inline double err(P a, const sfmg::Vec2& b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

}  // namespace oracle
