#pragma once

// Run configuration and the generate -> extract -> split -> train -> evaluate
// pipeline shared by the command-line tool, the acceptance suite and the
// Python module.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfmg/datasets.hpp"
#include "sfmg/features.hpp"
#include "sfmg/metrics.hpp"
#include "sfmg/rollout.hpp"
#include "sfmg/sfmgnet.hpp"
#include "sfmg/training.hpp"

namespace sfmg {

/// Flat key-value configuration. Every key has a default; unknown keys are
/// rejected. Files hold "key = value" lines with '#' comments.
class RunConfig {
public:
    RunConfig();

    static const std::vector<std::string>& keys();
    static constexpr const char* env_prefix = "SFMG_";

    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    double number(const std::string& key) const;
    long integer(const std::string& key) const;
    bool flag(const std::string& key) const;

    void load_file(const std::filesystem::path& path);
    /// Applies SFMG_<KEY> variables (dots become underscores, upper case).
    void load_env(char** envp);

    /// Canonical "key = value" listing in key order.
    std::string canonical() const;
    /// 16 hex digits of FNV-1a over canonical().
    std::string fingerprint() const;
    const std::map<std::string, std::string>& values() const { return values_; }

    SfmgParams sfmg_params() const;
    SyntheticConfig synthetic_config() const;
    SyntheticConfig eval_synthetic_config() const;
    SplitSpec split_spec() const;
    ModelConfig model_config() const;
    TrainConfig train_config() const;
    TrainConfig recombination_config() const;
    FeatureConfig feature_config() const;
    EvalProtocol eval_protocol() const;
    RolloutOptions rollout_options() const;

private:
    std::map<std::string, std::string> values_;
};

struct ModuleScores {
    double net1 = 0.0;
    double net2 = 0.0;
    double net3 = 0.0;
    double net4 = 0.0;
    double full = 0.0;
};

struct TrainedModels {
    std::array<std::optional<ModelParams>, 4> by_ablation;  // indexed by Ablation
    std::array<TrainLog, 4> module_logs;                    // net1..net4
    std::array<TrainLog, 4> recombination_logs;
    ModuleScores test_mse;  // full-model entry uses the requested ablation
    std::size_t train_samples = 0;
    std::size_t dev_samples = 0;
    std::size_t test_samples = 0;

    const ModelParams& model(Ablation a) const;
};

std::vector<TrainingSample> build_samples(const SyntheticDataset& data, const FeatureConfig& features);

/// Trains the four modules once, then one recombination layer per requested
/// ablation setting. test_mse.full refers to the first requested setting.
TrainedModels train_models(const SyntheticDataset& data, const RunConfig& config,
                           const std::vector<Ablation>& ablations);

/// Short fingerprint of a synthetic dataset's configuration and size.
std::string data_fingerprint(const SyntheticDataset& data, const SyntheticConfig& cfg);

/// Held-out evaluation scenes drawn with a seed derived from the master seed.
SyntheticDataset evaluation_scenes(const RunConfig& config, const SfmgParams& params);

std::string to_hex(std::uint64_t v);
std::uint64_t fnv1a(const std::string& s);

}  // namespace sfmg
