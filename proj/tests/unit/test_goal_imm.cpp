#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sfmg/goal_imm.hpp"

using namespace sfmg;

namespace {

// Fine-step midpoint integration of x' = v cos h, y' = v sin h, h' = w.
Vec2 integrate_ctrv(Vec2 p, double h, double v, double w, double T) {
    const int steps = 200000;
    const double dt = T / steps;
    for (int i = 0; i < steps; ++i) {
        const double hm = h + 0.5 * w * dt;
        p += Vec2{std::cos(hm), std::sin(hm)} * (v * dt);
        h += w * dt;
    }
    return p;
}

ObservationWindow straight_window(const Vec2& start, const Vec2& velocity, int n = 10, double dt = 0.1) {
    ObservationWindow w;
    w.dt = dt;
    for (int k = 0; k < n; ++k) w.positions.push_back(start + velocity * (k * dt));
    return w;
}

bool is_spd(const Eigen::Matrix4d& m) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m);
    return es.eigenvalues().minCoeff() > 0.0;
}

}  // namespace

TEST_CASE("ctrv with zero turn rate is a straight line") {
    const Vec2 g = ctrv_endpoint({1, 2}, 0.0, 1.5, 0.0, 8.0);
    CHECK(g.x == doctest::Approx(13.0));
    CHECK(g.y == doctest::Approx(2.0));
    const Vec2 h = ctrv_endpoint({0, 0}, std::acos(-1.0) / 2, 1.0, 0.0, 2.0);
    CHECK(h.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(h.y == doctest::Approx(2.0));
}

TEST_CASE("ctrv closed form matches numerical integration") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const Vec2 p{5 * u(rng), 5 * u(rng)};
        const double h = 3 * u(rng);
        const double v = 1.0 + 0.5 * u(rng);
        const double w = 0.4 * u(rng);
        const Vec2 a = ctrv_endpoint(p, h, v, w, 8.0);
        const Vec2 b = integrate_ctrv(p, h, v, w, 8.0);
        CHECK(distance(a, b) < 1e-6);
    }
    // quarter circle: w = pi/2 over 1 s at unit speed, radius 2/pi
    const double pi = std::acos(-1.0);
    const Vec2 q = ctrv_endpoint({0, 0}, 0.0, 1.0, pi / 2, 1.0);
    CHECK(q.x == doctest::Approx(2 / pi));
    CHECK(q.y == doctest::Approx(2 / pi));
}

TEST_CASE("hypotheses are mirror-symmetric in the turn rate") {
    const ObservationWindow w = straight_window({0, 0}, {1.3, 0});
    const ImmConfig cfg;
    const auto hs = generate_hypotheses(w, cfg.turn_rates, cfg.horizon_s);
    REQUIRE(hs.size() == 5);
    for (std::size_t i = 0; i < hs.size(); ++i) {
        const auto& a = hs[i];
        const auto& b = hs[hs.size() - 1 - i];
        CHECK(a.turn_rate == doctest::Approx(-b.turn_rate));
        CHECK(a.goal_point.x == doctest::Approx(b.goal_point.x));
        CHECK(a.goal_point.y == doctest::Approx(-b.goal_point.y));
    }
    CHECK(hs[2].goal_point.x == doctest::Approx(0.9 * 1.3 + 8.0 * 1.3));
}

TEST_CASE("hypothesis generation edge cases") {
    const ImmConfig cfg;
    const ObservationWindow still = straight_window({3, 4}, {0, 0});
    const auto hs = generate_hypotheses(still, cfg.turn_rates, cfg.horizon_s);
    REQUIRE(hs.size() == 1);
    CHECK(hs[0].goal_point == Vec2{3, 4});
    ObservationWindow one;
    one.positions = {{0, 0}};
    CHECK_THROWS_AS(generate_hypotheses(one, cfg.turn_rates, cfg.horizon_s), UsageError);
    const std::vector<double> dup{0.0, 0.0, 0.2};
    CHECK(generate_hypotheses(straight_window({0, 0}, {1, 0}), dup, 8.0).size() == 2);
}

TEST_CASE("model probabilities stay on the simplex and covariances stay SPD") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.05);
    const ImmConfig cfg;
    for (int trial = 0; trial < 20; ++trial) {
        const ObservationWindow w = straight_window({0, 0}, {1.0, 0.3});
        ImmState s = init_imm(generate_hypotheses(w, cfg.turn_rates, cfg.horizon_s), {0, 0}, {1.0, 0.3}, 0.1, cfg);
        Vec2 p{0, 0};
        for (int k = 0; k < 60; ++k) {
            p += Vec2{std::cos(0.02 * k), std::sin(0.02 * k)} * 0.12;
            const ImmEstimate est = imm_update(s, p + Vec2{noise(rng), noise(rng)});
            CHECK(std::abs(s.mu.sum() - 1.0) < 1e-12);
            CHECK(s.mu.minCoeff() >= 0.0);
            CHECK(is_spd(est.cov));
            for (const auto& f : s.filters) CHECK(is_spd(f.cov));
        }
    }
}

TEST_CASE("identical hypotheses leave the probabilities unchanged") {
    const ImmConfig cfg;
    std::vector<GoalHypothesis> hs(3, GoalHypothesis{{10, 0}, 0.0, 1.0});
    ImmState s = init_imm(hs, {0, 0}, {1, 0}, 0.1, cfg);
    for (int k = 1; k <= 30; ++k) {
        imm_update(s, {0.1 * k + 0.01 * std::sin(k), 0.02 * std::cos(k)});
        for (Eigen::Index j = 0; j < 3; ++j) CHECK(s.mu(j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("the hypothesis matching the motion wins") {
    const ImmConfig cfg;
    std::vector<GoalHypothesis> hs{{{10, 0}, 0.0, 1.0}, {{0, 10}, 0.0, 1.0}};
    ImmState s = init_imm(hs, {0, 0}, {1, 0}, 0.1, cfg);
    for (int k = 1; k <= 10; ++k) imm_update(s, {0.1 * k, 0.0});
    CHECK(s.mu(0) > 0.9);
    CHECK(map_index(s) == 0);
    const Vec2 d = goal_direction(s, {3, 0});
    CHECK(d.x == doctest::Approx(1.0));
    CHECK(d.y == doctest::Approx(0.0));
}

TEST_CASE("MAP converges to a hypothesis placed on the true goal") {
    // Straight walk toward a goal that is one of five candidates spread
    // around the start; near-zero measurement noise.
    const ImmConfig cfg;
    const double pi = std::acos(-1.0);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1e-4);
    int correct = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const double base = 2 * pi * u(rng);
        const double dist = 6.0 + 4.0 * u(rng);
        const double speed = 0.8 + 0.8 * u(rng);
        const auto truth = static_cast<std::size_t>(std::lround(4.0 * u(rng)));
        std::vector<GoalHypothesis> hs;
        for (int i = 0; i < 5; ++i) {
            const double a = base + (i - static_cast<int>(truth)) * pi / 6;
            hs.push_back({Vec2{std::cos(a), std::sin(a)} * dist, 0.0, speed});
        }
        const Vec2 dir = unit_vector({0, 0}, hs[truth].goal_point);
        ImmState s = init_imm(hs, {0, 0}, dir * speed, 0.1, cfg);
        for (int k = 1; k <= 12; ++k) imm_update(s, dir * (speed * 0.1 * k) + Vec2{noise(rng), noise(rng)});
        if (map_index(s) == truth) ++correct;
    }
    CHECK(correct >= 95);
}

TEST_CASE("goal direction examples") {
    const ImmConfig cfg;
    std::vector<GoalHypothesis> hs{{{4, 3}, 0.0, 1.0}};
    const ImmState s = init_imm(hs, {0, 0}, {1, 0}, 0.1, cfg);
    const Vec2 d = goal_direction(s, {0, 0});
    CHECK(d.x == doctest::Approx(0.8));
    CHECK(d.y == doctest::Approx(0.6));
    CHECK(goal_direction(s, {4.1, 3.0}) == Vec2{});

    const GoalEstimate e = estimate_goal(straight_window({0, 0}, {1.2, 0}));
    CHECK(e.direction.x == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(e.direction.y) < 1e-6);

    const GoalEstimate still = estimate_goal(straight_window({2, 2}, {0, 0}));
    CHECK(still.direction == Vec2{});
}

TEST_CASE("invalid IMM inputs are rejected") {
    const ImmConfig cfg;
    CHECK_THROWS_AS(init_imm({}, {0, 0}, {1, 0}, 0.1, cfg), UsageError);
    CHECK_THROWS_AS(init_imm({{{1, 0}, 0, 1}}, {0, 0}, {1, 0}, 0.0, cfg), UsageError);
    ImmState s = init_imm({{{1, 0}, 0, 1}}, {0, 0}, {1, 0}, 0.1, cfg);
    CHECK_THROWS_AS(imm_update(s, {NAN, 0}), UsageError);
}
