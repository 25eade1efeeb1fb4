#pragma once

// SFMGNet: four force modules whose layer structure follows the social force
// terms (goal acceleration, obstacle, pedestrian and group forces), nine
// per-neighbour pedestrian instances with an aggregator, and a recombination
// layer mapping the summed module outputs to the total force.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfmg/core.hpp"
#include "sfmg/feature_frame.hpp"
#include "sfmg/tinynn.hpp"

namespace sfmg {

enum class Ablation { att, abr, abrpr, full };

const char* to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

/// Which modules feed the recombination layer. net1 is always active.
struct AblationMask {
    bool obstacle = true;
    bool pedestrians = true;
    bool group = true;

    static AblationMask of(Ablation a);
    bool operator==(const AblationMask&) const = default;
};

struct NetWidths {
    int net1 = 32;
    int net2 = 16;
    int net3 = 16;
    int net3_aggregator = 32;
    int net4 = 16;
    int recombination = 16;
};

// ---- module inputs -------------------------------------------------------

struct Net1Input {
    std::vector<double> step_norms;  // D, n-1 values
    std::vector<double> offsets;     // flattened window offsets, 2n values
    Vec2 goal_dir;
};

struct Net2Input {
    double dist = kFarField;
    Vec2 eta;
};

struct Net3Input {
    std::array<NeighborFeature, kNeighborSlots> neighbors{};
    Vec2 goal_dir;
};

struct Net4Input {
    Vec2 theta_v;  // theta * V_desired
    Vec2 eta_centroid;
};

Net1Input net1_input(const FeatureFrame& frame);
Net2Input net2_input(const FeatureFrame& frame);
Net3Input net3_input(const FeatureFrame& frame);
Net4Input net4_input(const FeatureFrame& frame);

// ---- networks ------------------------------------------------------------

struct Net1 {
    nn::Dense vd;   // D -> hidden, sigmoid
    nn::Dense vds;  // hidden -> desired speed scalar, pure rescale
    nn::Dense vi;   // offsets -> hidden, tanh
    nn::Dense vis;  // hidden -> velocity term, pure rescale

    struct Cache {
        nn::DenseCache vd, vds, vi, vis;
    };

    static Net1 create(int n, int width, std::mt19937_64& rng);
    Vec2 forward(const Net1Input& in, Cache& cache) const;
    Vec2 forward(const Net1Input& in) const;
    void backward(const Net1Input& in, const Cache& cache, const Vec2& upstream, Net1& sink) const;
    Net1 zeros_like() const;
    void collect(nn::ParamList& out, const std::string& prefix);
};

struct Net2 {
    nn::ExpUnit range;  // e^{d / W_R}
    nn::Dense u;        // sigmoid
    nn::Dense fb;       // rescale

    struct Cache {
        double e = 0.0;
        nn::DenseCache u, fb;
    };

    static Net2 create(int width, std::mt19937_64& rng);
    Vec2 forward(const Net2Input& in, Cache& cache) const;
    Vec2 forward(const Net2Input& in) const;
    void backward(const Net2Input& in, const Cache& cache, const Vec2& upstream, Net2& sink) const;
    Net2 zeros_like() const;
    void collect(nn::ParamList& out, const std::string& prefix);
};

/// Pairwise repulsion from one neighbour slot.
struct Net3Instance {
    nn::ExpUnit range1;  // e^{d / W_sigma}
    nn::ExpUnit range2;  // e^{-d / W_sigma2}
    nn::Dense a1;        // relu
    nn::Dense a2;        // relu
    nn::Dense out;       // rescale of the summed branches

    struct Cache {
        double e1 = 0.0;
        double e2 = 0.0;
        double projection = 0.0;  // eta_beta_alpha . e_alpha
        nn::DenseCache a1, a2, out;
    };

    static Net3Instance create(int width, std::mt19937_64& rng);
    Vec2 forward(const NeighborFeature& nb, const Vec2& goal_dir, Cache& cache) const;
    void backward(const NeighborFeature& nb, const Cache& cache, const Vec2& upstream,
                  Net3Instance& sink) const;
    Net3Instance zeros_like() const;
    void collect(nn::ParamList& out, const std::string& prefix);
};

struct Net3 {
    std::array<Net3Instance, kNeighborSlots> instances;
    nn::Dense agg_hidden;  // 18 -> hidden, relu
    nn::Dense agg_out;

    struct Cache {
        std::array<Net3Instance::Cache, kNeighborSlots> instances;
        nn::DenseCache agg_hidden, agg_out;
    };

    static Net3 create(int width, int aggregator_width, std::mt19937_64& rng);
    Vec2 forward(const Net3Input& in, Cache& cache) const;
    Vec2 forward(const Net3Input& in) const;
    void backward(const Net3Input& in, const Cache& cache, const Vec2& upstream, Net3& sink) const;
    Net3 zeros_like() const;
    void collect(nn::ParamList& out, const std::string& prefix);
};

struct Net4 {
    nn::Dense g1;  // theta * V_desired -> hidden, relu
    nn::Dense g2;  // centroid direction -> hidden, relu
    nn::Dense G;   // rescale of the summed branches

    struct Cache {
        nn::DenseCache g1, g2, G;
    };

    static Net4 create(int width, std::mt19937_64& rng);
    Vec2 forward(const Net4Input& in, Cache& cache) const;
    Vec2 forward(const Net4Input& in) const;
    void backward(const Net4Input& in, const Cache& cache, const Vec2& upstream, Net4& sink) const;
    Net4 zeros_like() const;
    void collect(nn::ParamList& out, const std::string& prefix);
};

struct Recombination {
    nn::Dense in_layer;   // W_IF, relu
    nn::Dense out_layer;  // W_FF

    struct Cache {
        nn::DenseCache in_layer, out_layer;
    };

    static Recombination create(int width, std::mt19937_64& rng);
    Vec2 forward(const Vec2& force_sum, Cache& cache) const;
    Vec2 forward(const Vec2& force_sum) const;
    void backward(const Cache& cache, const Vec2& upstream, Recombination& sink) const;
    Recombination zeros_like() const;
    void collect(nn::ParamList& out, const std::string& prefix);
};

// ---- full model ----------------------------------------------------------

struct ModelConfig {
    int n = 10;
    double dt = 0.1;
    NetWidths widths;
    Ablation ablation = Ablation::full;
    std::uint64_t seed = 1;

    void validate() const;
};

struct ModelParams {
    ModelConfig config;
    Net1 net1;
    Net2 net2;
    Net3 net3;
    Net4 net4;
    Recombination recombination;
    // Module outputs at "nothing there" inputs, subtracted at inference.
    Vec2 baseline_net2;
    Vec2 baseline_net3;
    Vec2 baseline_net4;
    std::string data_fingerprint;

    static ModelParams create(const ModelConfig& config);

    AblationMask mask() const { return AblationMask::of(config.ablation); }

    /// Module outputs with baselines removed.
    Vec2 net1_force(const FeatureFrame& frame) const;
    Vec2 net2_force(const FeatureFrame& frame) const;
    Vec2 net3_force(const FeatureFrame& frame) const;
    Vec2 net4_force(const FeatureFrame& frame) const;

    /// Recomputes the three baselines from the current weights.
    void update_baselines();

    nn::ParamList params();
    nn::ConstParamList params() const;
};

/// Sum of the active (masked) module outputs.
Vec2 masked_sum(const ForceBreakdown& modules, const AblationMask& mask);

/// Module breakdown plus the recombined total; masked modules report zero.
ForceBreakdown total_force_forward(const FeatureFrame& frame, const ModelParams& params);

/// Checkpoint directory: weights.txt (tinynn text format) and manifest.json.
void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace sfmg
