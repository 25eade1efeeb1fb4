#pragma once

// Goal-direction estimation: CTRV-generated goal hypotheses, one Kalman
// filter per hypothesis, fused by an interacting multiple model estimator.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sfmg/core.hpp"
#include "sfmg/feature_frame.hpp"

namespace sfmg {

struct GoalHypothesis {
    Vec2 goal_point;
    double turn_rate = 0.0;  // rad/s
    double speed = 0.0;      // m/s
};

struct ImmConfig {
    std::vector<double> turn_rates{-0.4, -0.2, 0.0, 0.2, 0.4};
    double horizon_s = 8.0;
    double stay_probability = 0.9;  // diagonal of the Markov transition matrix
    double q = 0.1;                 // process noise intensity
    double r = 0.05;                // measurement noise std, m
    double steer_time = 0.2;        // s, how quickly a filter turns toward its goal
    double min_speed = 0.05;        // m/s, below this the window counts as stationary
    double min_separation = 0.5;    // m, hypotheses closer than this are merged
    double arrival_radius = 0.3;    // m
};

struct KalmanFilterState {
    Eigen::Vector4d mean = Eigen::Vector4d::Zero();  // px, py, vx, vy
    Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();
};

struct ImmState {
    std::vector<GoalHypothesis> hypotheses;
    std::vector<KalmanFilterState> filters;
    Eigen::VectorXd mu;
    Eigen::MatrixXd transition;  // rows sum to 1
    double dt = 0.1;
    ImmConfig config;
};

struct ImmEstimate {
    Eigen::Vector4d mean = Eigen::Vector4d::Zero();
    Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();
    bool regularized = false;  // an innovation covariance needed +1e-9 I
};

/// CTRV endpoint after horizon_s from the given state.
Vec2 ctrv_endpoint(const Vec2& position, double heading, double speed, double turn_rate,
                   double horizon_s);

/// One hypothesis per turn rate, propagated from the window's last state.
/// A stationary window yields a single hypothesis at the current position.
/// Throws UsageError for windows with fewer than two samples.
std::vector<GoalHypothesis> generate_hypotheses(const ObservationWindow& window,
                                                std::span<const double> turn_rates,
                                                double horizon_s, double min_speed = 0.05,
                                                double min_separation = 0.5);

ImmState init_imm(std::vector<GoalHypothesis> hypotheses, const Vec2& position,
                  const Vec2& velocity, double dt, const ImmConfig& config);

/// One IMM cycle (mix, per-filter predict/update, probability update, fuse).
ImmEstimate imm_update(ImmState& state, const Vec2& measurement);

std::size_t map_index(const ImmState& state);

/// Unit vector toward the most probable hypothesis goal; zero inside the
/// arrival radius.
Vec2 goal_direction(const ImmState& state, const Vec2& position);

struct GoalEstimate {
    Vec2 goal;
    Vec2 direction;
    ImmState state;
};

/// Hypotheses from the window's last state, filters started at its first
/// sample and updated with the rest.
GoalEstimate estimate_goal(const ObservationWindow& window, const ImmConfig& config = {});

}  // namespace sfmg
