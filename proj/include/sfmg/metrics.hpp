#pragma once

// Displacement errors, near-collision rate and the segment-based evaluation
// harness (including the four-way ablation comparison).

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "sfmg/annotated_dataset.hpp"
#include "sfmg/rollout.hpp"

namespace sfmg {

/// Mean pointwise distance; trajectories must have equal length and steps.
double ade(const Trajectory& pred, const Trajectory& truth);
/// Distance between the final points.
double fde(const Trajectory& pred, const Trajectory& truth);

/// Percentage of frames in which some pair is closer than `threshold`.
double near_collision_pct(const std::vector<std::vector<Vec2>>& frames, double threshold = 0.1);

struct SceneReport {
    std::string name;
    double ade = 0.0;
    double fde = 0.0;
    std::size_t agent_segments = 0;
};

struct EvalReport {
    std::string label;
    std::vector<SceneReport> scenes;
    double ade = 0.0;  // pooled over all scored agent segments
    double fde = 0.0;
    double near_collision_pct = 0.0;
    std::size_t segments = 0;
    std::size_t agent_segments = 0;
    std::size_t frames = 0;  // predicted frames with at least two scored agents
    std::string fingerprint;

    bool empty() const { return agent_segments == 0; }
    std::string to_text() const;
    std::string to_json() const;
};

/// Maps a dataset and an observed scene to predictions for `steps` steps.
using Predictor =
    std::function<std::vector<Trajectory>(const AnnotatedDataset&, const RolloutScene&, int steps)>;

Predictor sfmgnet_predictor(const ModelParams& params, const FeatureConfig& features,
                            const RolloutOptions& options = {});
Predictor constant_velocity_predictor();
/// Replays the ground truth; agents missing from it stay in place.
Predictor oracle_predictor();

struct EvalProtocol {
    int n = 10;
    double horizon_s = 4.8;
    bool sliding = false;  // stride 1 instead of non-overlapping windows
    int max_history = 13;  // samples handed to the predictor
    double collision_threshold = 0.1;
};

/// Segments start n steps after each dataset's first step and advance by the
/// horizon (or by one step when sliding). Agents are scored when they have n
/// steps of history and ground truth over the whole horizon.
EvalReport evaluate(const Predictor& predictor, const std::vector<AnnotatedDataset>& datasets,
                    const EvalProtocol& protocol, const std::string& label = "");

struct AblationReports {
    std::array<EvalReport, 4> reports;  // att, abr, abrpr, full

    const EvalReport& of(Ablation a) const { return reports[static_cast<std::size_t>(a)]; }
    /// ADE(full) <= ADE(abrpr) <= ADE(abr) <= ADE(att).
    bool ordered() const;
    std::string to_text() const;
};

/// Evaluates one model per ablation setting on the same data.
AblationReports ablation_suite(const std::array<ModelParams, 4>& models,
                               const std::vector<AnnotatedDataset>& datasets, const FeatureConfig& features,
                               const EvalProtocol& protocol, const RolloutOptions& options = {});

inline constexpr double kReferenceAverageAde = 0.15;
inline constexpr double kReferenceAverageFde = 0.26;

/// Table-style ADE/FDE grid: one row per scene plus the average, with the
/// published benchmark averages printed as a reference line.
std::string table_grid(const EvalReport& report);

}  // namespace sfmg
