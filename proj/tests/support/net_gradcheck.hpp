#pragma once

// Central-difference gradient checks for every SFMGNet sub-network, on the
// loss 0.5 |y - target|^2 with a random input and an O(1) target.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sfmg/sfmgnet.hpp"

namespace gradcheck {

using namespace sfmg;

struct Result {
    double max_relative_error = 0.0;
    std::string worst;
    int nudges = 0;
};

inline Vec2 random_unit(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> a(0.0, 2.0 * std::acos(-1.0));
    const double t = a(rng);
    return {std::cos(t), std::sin(t)};
}

inline Net1Input random_net1_input(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> step(0.0, 0.2);
    std::uniform_real_distribution<double> turn(-0.3, 0.3);
    Net1Input in;
    Vec2 p{0, 0};
    Vec2 dir = random_unit(rng);
    std::vector<Vec2> pts{p};
    for (int k = 1; k < n; ++k) {
        dir = dir.rotated(turn(rng));
        p += dir * step(rng);
        pts.push_back(p);
    }
    for (int k = 0; k < n; ++k) {
        in.offsets.push_back(pts[static_cast<std::size_t>(k)].x);
        in.offsets.push_back(pts[static_cast<std::size_t>(k)].y);
        if (k > 0) in.step_norms.push_back(distance(pts[static_cast<std::size_t>(k)], pts[static_cast<std::size_t>(k - 1)]));
    }
    in.goal_dir = random_unit(rng);
    return in;
}

inline NeighborFeature random_neighbor(std::mt19937_64& rng, bool present) {
    std::uniform_real_distribution<double> d(0.15, 3.0);
    NeighborFeature nb;
    if (present) {
        nb.present = true;
        nb.dist = d(rng);
        nb.eta = random_unit(rng);
    }
    return nb;
}

inline Net3Input random_net3_input(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, kNeighborSlots);
    const int k = count(rng);
    Net3Input in;
    for (int i = 0; i < kNeighborSlots; ++i) in.neighbors[static_cast<std::size_t>(i)] = random_neighbor(rng, i < k);
    std::sort(in.neighbors.begin(), in.neighbors.begin() + k,
              [](const NeighborFeature& a, const NeighborFeature& b) { return a.dist < b.dist; });
    in.goal_dir = random_unit(rng);
    return in;
}

inline Vec2 random_target(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> t(-2.0, 2.0);
    return {t(rng), t(rng)};
}

inline double min_abs(const nn::DenseCache& c) {
    double m = INFINITY;
    for (double z : c.pre_activation) m = std::min(m, std::abs(z));
    return m;
}

// Shared driver: `fwd` evaluates the network, `bwd` accumulates parameter
// gradients into a zeroed copy for upstream y - target. `only` restricts the
// check to parameters whose names contain one of the given substrings.
template <typename Net, typename Fwd, typename Bwd>
Result check(Net& net, const std::string& prefix, const Vec2& target, Fwd fwd, Bwd bwd,
             const std::vector<std::string>& only = {}) {
    nn::ParamList params;
    net.collect(params, prefix);
    Net sink = net.zeros_like();
    nn::ParamList sink_params;
    sink.collect(sink_params, prefix);

    auto keep = [&](const std::string& name) {
        if (only.empty()) return true;
        return std::any_of(only.begin(), only.end(), [&](const std::string& o) { return name.find(o) != std::string::npos; });
    };
    nn::ParamList checked;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (keep(params[i].first)) {
            checked.push_back(params[i]);
            index.push_back(i);
        }
    }
    auto loss = [&] {
        const Vec2 y = fwd(net);
        return 0.5 * (y - target).squared_norm();
    };
    auto analytic = [&] {
        sink = net.zeros_like();
        sink_params.clear();
        sink.collect(sink_params, prefix);
        bwd(net, target, sink);
        std::vector<nn::Matrix> out;
        for (std::size_t i : index) out.push_back(*sink_params[i].second);
        return out;
    };
    const auto r = nn::grad_check(checked, loss, analytic);
    return {r.max_relative_error, r.worst_param, 0};
}

inline Result net1(std::uint64_t seed, int n = 10, int width = 32) {
    std::mt19937_64 rng(seed);
    Net1 net = Net1::create(n, width, rng);
    const Net1Input in = random_net1_input(n, rng);
    const Vec2 target = random_target(rng);
    return check(
        net, "net1", target, [&](const Net1& m) { return m.forward(in); },
        [&](const Net1& m, const Vec2& t, Net1& sink) {
            Net1::Cache c;
            const Vec2 y = m.forward(in, c);
            m.backward(in, c, y - t, sink);
        });
}

inline Result net2(std::uint64_t seed, int width = 16) {
    std::mt19937_64 rng(seed);
    Net2 net = Net2::create(width, rng);
    std::uniform_real_distribution<double> d(0.05, 3.0);
    std::uniform_real_distribution<double> w(-2.0, -0.2);
    net.range.scale(0, 0) = w(rng);
    Net2Input in;
    in.dist = d(rng);
    in.eta = random_unit(rng);
    const Vec2 target = random_target(rng);
    return check(
        net, "net2", target, [&](const Net2& m) { return m.forward(in); },
        [&](const Net2& m, const Vec2& t, Net2& sink) {
            Net2::Cache c;
            const Vec2 y = m.forward(in, c);
            m.backward(in, c, y - t, sink);
        });
}

// Redraws the case when a relu pre-activation sits within 1e-4 of its kink,
// where central differences straddle the corner.
template <typename Runner>
Result with_nudges(Runner run) {
    Result last;
    for (int attempt = 0; attempt < 8; ++attempt) {
        auto [r, margin] = run(attempt);
        r.nudges = attempt;
        last = r;
        if (margin > 1e-4) return r;
    }
    return last;
}

inline Result net3_instance(std::uint64_t seed, int width = 16) {
    return with_nudges([&](int attempt) {
        std::mt19937_64 rng(seed * 7919 + static_cast<std::uint64_t>(attempt));
        Net3Instance net = Net3Instance::create(width, rng);
        const NeighborFeature nb = random_neighbor(rng, true);
        const Vec2 goal = random_unit(rng);
        const Vec2 target = random_target(rng);
        Net3Instance::Cache c0;
        net.forward(nb, goal, c0);
        const double margin = std::min(min_abs(c0.a1), min_abs(c0.a2));
        Result r = check(
            net, "net3_1", target,
            [&](const Net3Instance& m) {
                Net3Instance::Cache c;
                return m.forward(nb, goal, c);
            },
            [&](const Net3Instance& m, const Vec2& t, Net3Instance& sink) {
                Net3Instance::Cache c;
                const Vec2 y = m.forward(nb, goal, c);
                m.backward(nb, c, y - t, sink);
            });
        return std::pair{r, margin};
    });
}

inline double net3_margin(const Net3& net, const Net3Input& in) {
    Net3::Cache c;
    net.forward(in, c);
    double m = min_abs(c.agg_hidden);
    for (int i = 0; i < kNeighborSlots; ++i) {
        if (!in.neighbors[static_cast<std::size_t>(i)].present) continue;
        m = std::min({m, min_abs(c.instances[static_cast<std::size_t>(i)].a1), min_abs(c.instances[static_cast<std::size_t>(i)].a2)});
    }
    return m;
}

// Whole pedestrian module (nine instances plus aggregator), or only the
// aggregator parameters when `aggregator_only` is set.
inline Result net3(std::uint64_t seed, bool aggregator_only = false, int width = 16, int agg_width = 32) {
    return with_nudges([&](int attempt) {
        std::mt19937_64 rng(seed * 104729 + static_cast<std::uint64_t>(attempt));
        Net3 net = Net3::create(width, agg_width, rng);
        const Net3Input in = random_net3_input(rng);
        const Vec2 target = random_target(rng);
        const double margin = net3_margin(net, in);
        const std::vector<std::string> only =
            aggregator_only ? std::vector<std::string>{"aggregator"} : std::vector<std::string>{};
        Result r = check(
            net, "net3", target, [&](const Net3& m) { return m.forward(in); },
            [&](const Net3& m, const Vec2& t, Net3& sink) {
                Net3::Cache c;
                const Vec2 y = m.forward(in, c);
                m.backward(in, c, y - t, sink);
            },
            only);
        return std::pair{r, margin};
    });
}

inline Result net4(std::uint64_t seed, int width = 16) {
    return with_nudges([&](int attempt) {
        std::mt19937_64 rng(seed * 15485863 + static_cast<std::uint64_t>(attempt));
        Net4 net = Net4::create(width, rng);
        std::uniform_real_distribution<double> th(0.0, 2.0);
        Net4Input in;
        in.theta_v = random_unit(rng) * (1.34 * th(rng));
        in.eta_centroid = random_unit(rng);
        const Vec2 target = random_target(rng);
        Net4::Cache c0;
        net.forward(in, c0);
        const double margin = std::min(min_abs(c0.g1), min_abs(c0.g2));
        Result r = check(
            net, "net4", target, [&](const Net4& m) { return m.forward(in); },
            [&](const Net4& m, const Vec2& t, Net4& sink) {
                Net4::Cache c;
                const Vec2 y = m.forward(in, c);
                m.backward(in, c, y - t, sink);
            });
        return std::pair{r, margin};
    });
}

inline Result recombination(std::uint64_t seed, int width = 16) {
    return with_nudges([&](int attempt) {
        std::mt19937_64 rng(seed * 32452843 + static_cast<std::uint64_t>(attempt));
        Recombination net = Recombination::create(width, rng);
        std::uniform_real_distribution<double> f(-3.0, 3.0);
        const Vec2 x{f(rng), f(rng)};
        const Vec2 target = random_target(rng);
        Recombination::Cache c0;
        net.forward(x, c0);
        const double margin = min_abs(c0.in_layer);
        Result r = check(
            net, "recombination", target, [&](const Recombination& m) { return m.forward(x); },
            [&](const Recombination& m, const Vec2& t, Recombination& sink) {
                Recombination::Cache c;
                const Vec2 y = m.forward(x, c);
                m.backward(c, y - t, sink);
            });
        return std::pair{r, margin};
    });
}

}  // namespace gradcheck
