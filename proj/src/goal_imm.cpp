#include "sfmg/goal_imm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace sfmg {

Vec2 ctrv_endpoint(const Vec2& position, double heading, double speed, double turn_rate,
                   double horizon_s) {
    if (std::abs(turn_rate) < 1e-9) {
        return position + Vec2{std::cos(heading), std::sin(heading)} * (speed * horizon_s);
    }
    const double r = speed / turn_rate;
    const double h1 = heading + turn_rate * horizon_s;
    return position + Vec2{r * (std::sin(h1) - std::sin(heading)), r * (std::cos(heading) - std::cos(h1))};
}

std::vector<GoalHypothesis> generate_hypotheses(const ObservationWindow& window,
                                                std::span<const double> turn_rates,
                                                double horizon_s, double min_speed,
                                                double min_separation) {
    if (window.n() < 2) throw UsageError("goal hypotheses need at least two samples");
    const Vec2 velocity = window.last_velocity();
    const double speed = velocity.norm();
    if (speed < min_speed || turn_rates.empty()) return {{window.last(), 0.0, speed}};

    const double heading = std::atan2(velocity.y, velocity.x);
    std::vector<GoalHypothesis> out;
    for (double omega : turn_rates) {
        const Vec2 goal = ctrv_endpoint(window.last(), heading, speed, omega, horizon_s);
        const bool distinct = std::all_of(out.begin(), out.end(), [&](const GoalHypothesis& h) {
            return distance(h.goal_point, goal) >= min_separation;
        });
        if (distinct) out.push_back({goal, omega, speed});
    }
    return out;
}

ImmState init_imm(std::vector<GoalHypothesis> hypotheses, const Vec2& position,
                  const Vec2& velocity, double dt, const ImmConfig& config) {
    if (hypotheses.empty()) throw UsageError("IMM needs at least one hypothesis");
    if (!(dt > 0.0)) throw UsageError("IMM dt must be positive");
    const auto m = static_cast<Eigen::Index>(hypotheses.size());

    ImmState state;
    state.hypotheses = std::move(hypotheses);
    state.dt = dt;
    state.config = config;
    state.mu = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    if (m == 1) {
        state.transition = Eigen::MatrixXd::Ones(1, 1);
    } else {
        const double off = (1.0 - config.stay_probability) / static_cast<double>(m - 1);
        state.transition = Eigen::MatrixXd::Constant(m, m, off);
        state.transition.diagonal().setConstant(config.stay_probability);
    }

    KalmanFilterState init;
    init.mean << position.x, position.y, velocity.x, velocity.y;
    const double pos_var = config.r * config.r;
    init.cov = Eigen::Vector4d(pos_var, pos_var, 1.0, 1.0).asDiagonal();
    state.filters.assign(static_cast<std::size_t>(m), init);
    return state;
}

namespace {

// Constant velocity with the heading relaxed toward the hypothesis goal; the
// steering term enters as a known control input computed from the mean.
void predict(KalmanFilterState& f, const Vec2& goal, double dt, const ImmConfig& cfg) {
    const double g = std::min(1.0, dt / cfg.steer_time);
    const Vec2 p{f.mean(0), f.mean(1)};
    const double speed = Vec2{f.mean(2), f.mean(3)}.norm();
    const Vec2 desired = unit_vector(p, goal) * speed;

    Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
    F(0, 2) = F(1, 3) = dt * (1.0 - g);
    F(2, 2) = F(3, 3) = 1.0 - g;
    Eigen::Vector4d u(dt * g * desired.x, dt * g * desired.y, g * desired.x, g * desired.y);

    Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
    const double dt2 = dt * dt;
    for (int i = 0; i < 2; ++i) {
        Q(i, i) = cfg.q * dt2 * dt2 / 4.0;
        Q(i, i + 2) = Q(i + 2, i) = cfg.q * dt2 * dt / 2.0;
        Q(i + 2, i + 2) = cfg.q * dt2;
    }
    f.mean = F * f.mean + u;
    f.cov = F * f.cov * F.transpose() + Q;
}

// Kalman update (Joseph form); returns the log-likelihood of the innovation.
double update(KalmanFilterState& f, const Vec2& z, const ImmConfig& cfg, bool& regularized) {
    Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
    H(0, 0) = H(1, 1) = 1.0;
    const Eigen::Matrix2d R = Eigen::Matrix2d::Identity() * (cfg.r * cfg.r);
    const Eigen::Vector2d nu = Eigen::Vector2d(z.x, z.y) - H * f.mean;
    Eigen::Matrix2d S = H * f.cov * H.transpose() + R;
    Eigen::LLT<Eigen::Matrix2d> llt(S);
    if (llt.info() != Eigen::Success) {
        S += Eigen::Matrix2d::Identity() * 1e-9;
        llt.compute(S);
        regularized = true;
    }
    const Eigen::Matrix<double, 4, 2> K = f.cov * H.transpose() * llt.solve(Eigen::Matrix2d::Identity());
    f.mean += K * nu;
    const Eigen::Matrix4d I_KH = Eigen::Matrix4d::Identity() - K * H;
    f.cov = I_KH * f.cov * I_KH.transpose() + K * R * K.transpose();
    f.cov = 0.5 * (f.cov + f.cov.transpose());

    const Eigen::Matrix2d L = llt.matrixL();
    const double log_det = 2.0 * std::log(L(0, 0) * L(1, 1));
    const double maha = nu.dot(llt.solve(nu));
    return -0.5 * (maha + log_det) - std::log(2.0 * std::numbers::pi);
}

}  // namespace

ImmEstimate imm_update(ImmState& state, const Vec2& measurement) {
    if (!measurement.finite()) throw UsageError("IMM measurement must be finite");
    const auto m = static_cast<Eigen::Index>(state.filters.size());

    // Mixing.
    const Eigen::VectorXd c = state.transition.transpose() * state.mu;
    std::vector<KalmanFilterState> mixed(state.filters.size());
    for (Eigen::Index j = 0; j < m; ++j) {
        auto& out = mixed[static_cast<std::size_t>(j)];
        out.mean.setZero();
        out.cov.setZero();
        if (c(j) <= 0.0) {
            out = state.filters[static_cast<std::size_t>(j)];
            continue;
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            const double w = state.transition(i, j) * state.mu(i) / c(j);
            out.mean += w * state.filters[static_cast<std::size_t>(i)].mean;
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            const double w = state.transition(i, j) * state.mu(i) / c(j);
            const auto& fi = state.filters[static_cast<std::size_t>(i)];
            const Eigen::Vector4d d = fi.mean - out.mean;
            out.cov += w * (fi.cov + d * d.transpose());
        }
    }

    // Model-matched filtering.
    ImmEstimate est;
    Eigen::VectorXd log_post(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        auto& f = mixed[static_cast<std::size_t>(j)];
        predict(f, state.hypotheses[static_cast<std::size_t>(j)].goal_point, state.dt, state.config);
        const double ll = update(f, measurement, state.config, est.regularized);
        log_post(j) = ll + std::log(std::max(c(j), std::numeric_limits<double>::min()));
    }
    state.filters = std::move(mixed);

    // Probability update in log space.
    const double top = log_post.maxCoeff();
    Eigen::VectorXd mu = (log_post.array() - top).exp().matrix();
    mu /= mu.sum();
    state.mu = mu;

    for (Eigen::Index j = 0; j < m; ++j) est.mean += mu(j) * state.filters[static_cast<std::size_t>(j)].mean;
    est.cov.setZero();
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& f = state.filters[static_cast<std::size_t>(j)];
        const Eigen::Vector4d d = f.mean - est.mean;
        est.cov += mu(j) * (f.cov + d * d.transpose());
    }
    return est;
}

std::size_t map_index(const ImmState& state) {
    Eigen::Index best = 0;
    state.mu.maxCoeff(&best);
    return static_cast<std::size_t>(best);
}

Vec2 goal_direction(const ImmState& state, const Vec2& position) {
    const Vec2 goal = state.hypotheses[map_index(state)].goal_point;
    if (distance(position, goal) < state.config.arrival_radius) return {};
    return unit_vector(position, goal);
}

GoalEstimate estimate_goal(const ObservationWindow& window, const ImmConfig& config) {
    auto hypotheses = generate_hypotheses(window, config.turn_rates, config.horizon_s, config.min_speed,
                                          config.min_separation);
    const Vec2 v0 = (window.positions[1] - window.positions[0]) / window.dt;
    ImmState state = init_imm(std::move(hypotheses), window.positions[0], v0, window.dt, config);
    for (std::size_t k = 1; k < window.positions.size(); ++k) imm_update(state, window.positions[k]);
    GoalEstimate out;
    out.goal = state.hypotheses[map_index(state)].goal_point;
    out.direction = goal_direction(state, window.last());
    out.state = std::move(state);
    return out;
}

}  // namespace sfmg
