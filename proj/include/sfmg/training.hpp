#pragma once

// Per-module training against simulator force components, and the
// recombination layer on top of frozen modules.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sfmg/features.hpp"
#include "sfmg/sfmgnet.hpp"

namespace sfmg {

enum class ModuleId { net1, net2, net3, net4 };

const char* to_string(ModuleId m);

/// Precomputed network inputs and simulator targets for one frame.
struct TrainingSample {
    Net1Input net1;
    Net2Input net2;
    Net3Input net3;
    Net4Input net4;
    ForceBreakdown target;
    bool in_group = false;
};

TrainingSample make_sample(const FeatureFrame& frame, const ForceBreakdown& target);

/// Frames without force targets are skipped.
std::vector<TrainingSample> make_samples(std::span<const LabeledFrame> frames);

struct TrainConfig {
    double lr = 0.001;
    int batch_size = 16;
    int max_epochs = 200;
    int patience = 10;
    std::size_t max_samples_per_epoch = 0;  // 0: every training sample
    std::uint64_t seed = 11;

    void validate() const;
};

struct TrainLog {
    std::vector<double> train_mse;  // per epoch
    std::vector<double> dev_mse;    // per epoch
    int best_epoch = -1;            // 0-based
    double best_dev_mse = 0.0;
};

/// Mean over samples and both components of the squared error.
double module_mse(const ModelParams& params, ModuleId module, std::span<const TrainingSample> samples);

/// Simulator force restricted to the components an ablation models: the
/// acceleration term plus whichever of obstacle, pedestrian and group forces
/// the mask keeps. The full mask returns the stored total.
Vec2 ablation_target(const ForceBreakdown& target, const AblationMask& mask);

/// Model MSE against ablation_target (the simulator total for the full model).
double total_mse(const ModelParams& params, std::span<const TrainingSample> samples);

/// Adam on one module's weights with early stopping on dev MSE. The best
/// dev-epoch weights are kept; baselines are refreshed afterwards.
TrainLog train_module(ModelParams& params, ModuleId module, std::span<const TrainingSample> train,
                      std::span<const TrainingSample> dev, const TrainConfig& config = {});

/// Trains only the recombination layer (modules frozen) for the model's
/// ablation mask.
TrainLog train_recombination(ModelParams& params, std::span<const TrainingSample> train,
                             std::span<const TrainingSample> dev, const TrainConfig& config);

/// Default recombination hyperparameters (Adam learning rate 0.1).
TrainConfig recombination_defaults();

}  // namespace sfmg
