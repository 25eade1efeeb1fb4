#pragma once

// Synthetic crossing-passageway data, benchmark-style trajectory files and
// deterministic sample splits.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sfmg/annotated_dataset.hpp"
#include "sfmg/social_force.hpp"

namespace sfmg {

struct SyntheticConfig {
    int runs = 1000;
    double duration_s = 30.0;
    double dt = 0.1;
    int min_peds = 2;
    int max_peds = 10;
    double group_prob = 0.5;
    int min_group_size = 2;
    int max_group_size = 4;
    double min_goal_distance = 7.0;
    double max_goal_distance = 10.0;
    double corridor_width = 4.0;
    double arm_length = 10.0;
    double desired_speed = 1.34;
    double desired_speed_spread = 0.0;  // half-width of a uniform spread
    std::uint64_t seed = 42;

    void validate() const;
};

struct SyntheticDataset {
    std::vector<AnnotatedDataset> runs;
};

/// Two crossing corridors bounded by four L-shaped wall polylines.
std::vector<Obstacle> passageway_walls(double corridor_width, double arm_length);

/// Draws one randomized scenario (agents, groups, walls) for a run index.
Scene make_scenario(const SyntheticConfig& cfg, int run_index);

/// Simulates one scenario and packages it as an annotated dataset with
/// per-sample force targets.
AnnotatedDataset simulate_run(const SyntheticConfig& cfg, const SfmgParams& params, int run_index);

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg, const SfmgParams& params);

std::uint64_t run_seed(std::uint64_t master_seed, int run_index);

struct SplitSpec {
    double train = 0.50;
    double dev = 0.25;
    double test = 0.25;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> dev;
    std::vector<std::size_t> test;
};

/// Shuffles sample indices [0, count) with the spec's seed and partitions
/// them by fraction; the test set takes the remainder.
SplitIndices split_indices(std::size_t count, const SplitSpec& spec);

template <typename T>
struct Split {
    std::vector<T> train;
    std::vector<T> dev;
    std::vector<T> test;
};

template <typename T>
Split<T> split(const std::vector<T>& samples, const SplitSpec& spec) {
    const SplitIndices idx = split_indices(samples.size(), spec);
    Split<T> out;
    for (auto i : idx.train) out.train.push_back(samples[i]);
    for (auto i : idx.dev) out.dev.push_back(samples[i]);
    for (auto i : idx.test) out.test.push_back(samples[i]);
    return out;
}

struct LoadOptions {
    std::filesystem::path groups_path;        // optional
    std::filesystem::path obstacles_path;     // optional
    std::filesystem::path destinations_path;  // optional
    std::filesystem::path forces_path;        // optional, synthetic runs only
    double dt = 0.0;          // 0: read "# dt:" header, else frame stride / frame_rate
    double frame_rate = 0.0;  // frames per second of the frame_id counter
};

/// Reads "frame_id pedestrian_id x y" rows (whitespace or comma separated,
/// '#' comments ignored) plus the optional companion files.
AnnotatedDataset load_trajectories(const std::filesystem::path& path,
                                   const LoadOptions& options = {});

void write_trajectories(const std::filesystem::path& path, const AnnotatedDataset& data);
void write_groups(const std::filesystem::path& path, const std::vector<Group>& groups);
void write_obstacles(const std::filesystem::path& path, const std::vector<Obstacle>& obstacles);
void write_destinations(const std::filesystem::path& path, const std::map<AgentId, Vec2>& dest);
void write_forces(const std::filesystem::path& path, const AnnotatedDataset& data);

std::vector<Group> read_groups(const std::filesystem::path& path);
std::vector<Obstacle> read_obstacles(const std::filesystem::path& path);
std::map<AgentId, Vec2> read_destinations(const std::filesystem::path& path);

/// Writes every companion file of a dataset into `dir` (trajectories.txt,
/// groups.txt, obstacles.txt, destinations.txt and forces.txt when present).
void write_dataset_dir(const std::filesystem::path& dir, const AnnotatedDataset& data);
AnnotatedDataset read_dataset_dir(const std::filesystem::path& dir);

/// Synthetic dataset directory: manifest.json plus one subdirectory per run.
void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data,
                     const SyntheticConfig& cfg);
SyntheticDataset read_synthetic(const std::filesystem::path& dir);

/// Decimal formatting that round-trips a double exactly.
std::string format_double(double v);

}  // namespace sfmg
