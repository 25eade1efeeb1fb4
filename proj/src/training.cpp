#include "sfmg/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace sfmg {

const char* to_string(ModuleId m) {
    switch (m) {
        case ModuleId::net1: return "net1";
        case ModuleId::net2: return "net2";
        case ModuleId::net3: return "net3";
        case ModuleId::net4: return "net4";
    }
    return "?";
}

TrainingSample make_sample(const FeatureFrame& frame, const ForceBreakdown& target) {
    TrainingSample s;
    s.net1 = net1_input(frame);
    s.net2 = net2_input(frame);
    s.net3 = net3_input(frame);
    s.net4 = net4_input(frame);
    s.target = target;
    s.in_group = frame.group.in_group;
    return s;
}

std::vector<TrainingSample> make_samples(std::span<const LabeledFrame> frames) {
    std::vector<TrainingSample> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        if (f.target) out.push_back(make_sample(f.frame, *f.target));
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
    if (batch_size < 1) throw UsageError("batch size must be at least 1");
    if (max_epochs < 1) throw UsageError("max_epochs must be at least 1");
    if (patience < 1) throw UsageError("patience must be at least 1");
}

TrainConfig recombination_defaults() {
    TrainConfig c;
    c.lr = 0.1;
    return c;
}

namespace {

double sq_err(const Vec2& y, const Vec2& t) { return 0.5 * (y - t).squared_norm(); }

// Uniform view of the four modules and the recombination layer for the
// generic fitting loop.
struct Net1Task {
    using Net = Net1;
    static const Net1Input& input(const TrainingSample& s) { return s.net1; }
    static Vec2 target(const TrainingSample& s) { return s.target.acceleration; }
};
struct Net2Task {
    using Net = Net2;
    static const Net2Input& input(const TrainingSample& s) { return s.net2; }
    static Vec2 target(const TrainingSample& s) { return s.target.obstacle; }
};
struct Net3Task {
    using Net = Net3;
    static const Net3Input& input(const TrainingSample& s) { return s.net3; }
    static Vec2 target(const TrainingSample& s) { return s.target.pedestrians; }
};
struct Net4Task {
    using Net = Net4;
    static const Net4Input& input(const TrainingSample& s) { return s.net4; }
    static Vec2 target(const TrainingSample& s) { return s.target.group; }
};

std::vector<nn::Matrix> snapshot(const nn::ParamList& params) {
    std::vector<nn::Matrix> out;
    for (const auto& p : params) out.push_back(*p.second);
    return out;
}

void restore(const nn::ParamList& params, const std::vector<nn::Matrix>& values) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i].second = values[i];
}

// forward(i, cache) -> prediction, backward(i, cache, upstream, sink),
// target(i) -> Vec2, all over sample indices of the given sets.
template <typename Net, typename FwdTrain, typename Backward, typename TgtTrain, typename FwdDev,
          typename TgtDev>
TrainLog fit(Net& net, std::size_t n_train, std::size_t n_dev, FwdTrain forward_train,
             Backward backward_train, TgtTrain target_train, FwdDev forward_dev, TgtDev target_dev,
             const TrainConfig& config) {
    config.validate();
    if (n_train == 0) throw UsageError("training set is empty");

    nn::ParamList params;
    net.collect(params, "m");
    Net sink = net.zeros_like();
    nn::ParamList grads;
    sink.collect(grads, "m");
    std::vector<nn::Matrix*> pptr;
    std::vector<const nn::Matrix*> gptr;
    for (auto& p : params) pptr.push_back(p.second);
    for (auto& g : grads) gptr.push_back(g.second);

    nn::AdamState adam;
    adam.lr = config.lr;
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    typename Net::Cache cache;

    auto dev_mse = [&]() {
        if (n_dev == 0) return 0.0;
        double sum = 0.0;
        for (std::size_t i = 0; i < n_dev; ++i) sum += sq_err(forward_dev(i, cache), target_dev(i));
        return sum / static_cast<double>(n_dev);
    };

    TrainLog log;
    log.best_dev_mse = std::numeric_limits<double>::infinity();
    std::vector<nn::Matrix> best = snapshot(params);
    int since_best = 0;
    const std::size_t per_epoch =
        config.max_samples_per_epoch == 0 ? n_train : std::min(n_train, config.max_samples_per_epoch);

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < per_epoch; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(per_epoch, start + static_cast<std::size_t>(config.batch_size));
            const double scale = 1.0 / static_cast<double>(stop - start);
            for (auto& g : grads) g.second->set_zero();
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t i = order[k];
                const Vec2 y = forward_train(i, cache);
                const Vec2 t = target_train(i);
                epoch_loss += sq_err(y, t);
                backward_train(i, cache, (y - t) * scale, sink);
            }
            nn::adam_update(adam, pptr, gptr);
        }
        log.train_mse.push_back(epoch_loss / static_cast<double>(per_epoch));
        const double dev = n_dev == 0 ? log.train_mse.back() : dev_mse();
        log.dev_mse.push_back(dev);
        if (!std::isfinite(dev)) break;
        if (dev < log.best_dev_mse) {
            log.best_dev_mse = dev;
            log.best_epoch = epoch;
            best = snapshot(params);
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    restore(params, best);
    return log;
}

template <typename Task>
TrainLog fit_module(typename Task::Net& net, std::span<const TrainingSample> train,
                    std::span<const TrainingSample> dev, const TrainConfig& config) {
    using Net = typename Task::Net;
    using Cache = typename Net::Cache;
    auto fwd_train = [&](std::size_t i, Cache& c) { return net.forward(Task::input(train[i]), c); };
    auto bwd_train = [&](std::size_t i, const Cache& c, const Vec2& up, Net& sink) {
        net.backward(Task::input(train[i]), c, up, sink);
    };
    auto tgt_train = [&](std::size_t i) { return Task::target(train[i]); };
    auto fwd_dev = [&](std::size_t i, Cache& c) { return net.forward(Task::input(dev[i]), c); };
    auto tgt_dev = [&](std::size_t i) { return Task::target(dev[i]); };
    return fit(net, train.size(), dev.size(), fwd_train, bwd_train, tgt_train, fwd_dev, tgt_dev, config);
}

ForceBreakdown module_outputs(const ModelParams& p, const TrainingSample& s) {
    ForceBreakdown f;
    f.acceleration = p.net1.forward(s.net1);
    f.obstacle = p.net2.forward(s.net2) - p.baseline_net2;
    f.pedestrians = p.net3.forward(s.net3) - p.baseline_net3;
    f.group = p.net4.forward(s.net4) - p.baseline_net4;
    return f;
}

}  // namespace

double module_mse(const ModelParams& params, ModuleId module, std::span<const TrainingSample> samples) {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : samples) {
        switch (module) {
            case ModuleId::net1: sum += sq_err(params.net1.forward(s.net1), s.target.acceleration); break;
            case ModuleId::net2:
                sum += sq_err(params.net2.forward(s.net2) - params.baseline_net2, s.target.obstacle);
                break;
            case ModuleId::net3:
                sum += sq_err(params.net3.forward(s.net3) - params.baseline_net3, s.target.pedestrians);
                break;
            case ModuleId::net4:
                sum += sq_err(params.net4.forward(s.net4) - params.baseline_net4, s.target.group);
                break;
        }
    }
    return sum / static_cast<double>(samples.size());
}

Vec2 ablation_target(const ForceBreakdown& target, const AblationMask& mask) {
    if (mask == AblationMask{}) return target.total;
    Vec2 f = target.acceleration;
    if (mask.obstacle) f += target.obstacle;
    if (mask.pedestrians) f += target.pedestrians;
    if (mask.group) f += target.group;
    return f;
}

double total_mse(const ModelParams& params, std::span<const TrainingSample> samples) {
    if (samples.empty()) return 0.0;
    const AblationMask mask = params.mask();
    double sum = 0.0;
    for (const auto& s : samples) {
        const Vec2 y = params.recombination.forward(masked_sum(module_outputs(params, s), mask));
        sum += sq_err(y, ablation_target(s.target, mask));
    }
    return sum / static_cast<double>(samples.size());
}

TrainLog train_module(ModelParams& params, ModuleId module, std::span<const TrainingSample> train,
                      std::span<const TrainingSample> dev, const TrainConfig& config) {
    TrainLog log;
    switch (module) {
        case ModuleId::net1: log = fit_module<Net1Task>(params.net1, train, dev, config); break;
        case ModuleId::net2: log = fit_module<Net2Task>(params.net2, train, dev, config); break;
        case ModuleId::net3: log = fit_module<Net3Task>(params.net3, train, dev, config); break;
        case ModuleId::net4: log = fit_module<Net4Task>(params.net4, train, dev, config); break;
    }
    params.update_baselines();
    return log;
}

TrainLog train_recombination(ModelParams& params, std::span<const TrainingSample> train,
                             std::span<const TrainingSample> dev, const TrainConfig& config) {
    const AblationMask mask = params.mask();
    auto sums = [&](std::span<const TrainingSample> set) {
        std::vector<Vec2> out;
        out.reserve(set.size());
        for (const auto& s : set) out.push_back(masked_sum(module_outputs(params, s), mask));
        return out;
    };
    const std::vector<Vec2> train_in = sums(train);
    const std::vector<Vec2> dev_in = sums(dev);

    Recombination& net = params.recombination;
    using Cache = Recombination::Cache;
    auto fwd_train = [&](std::size_t i, Cache& c) { return net.forward(train_in[i], c); };
    auto bwd_train = [&](std::size_t, const Cache& c, const Vec2& up, Recombination& sink) {
        net.backward(c, up, sink);
    };
    auto tgt_train = [&](std::size_t i) { return ablation_target(train[i].target, mask); };
    auto fwd_dev = [&](std::size_t i, Cache& c) { return net.forward(dev_in[i], c); };
    auto tgt_dev = [&](std::size_t i) { return ablation_target(dev[i].target, mask); };
    return fit(net, train.size(), dev.size(), fwd_train, bwd_train, tgt_train, fwd_dev, tgt_dev, config);
}

}  // namespace sfmg
