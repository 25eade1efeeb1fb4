#include "sfmg/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace sfmg {

namespace fs = std::filesystem;

void SyntheticConfig::validate() const {
    if (runs < 1) throw UsageError("synthetic runs must be >= 1");
    if (!(duration_s > 0.0) || !(dt > 0.0)) throw UsageError("duration and dt must be positive");
    if (min_peds < 2 || max_peds < min_peds) throw UsageError("pedestrian count range is invalid");
    if (group_prob < 0.0 || group_prob > 1.0) throw UsageError("group_prob must lie in [0, 1]");
    if (min_group_size < 2 || max_group_size < min_group_size) {
        throw UsageError("group size range is invalid");
    }
    if (!(min_goal_distance > 0.0) || max_goal_distance < min_goal_distance) {
        throw UsageError("goal distance range is invalid");
    }
    if (!(corridor_width > 1.0) || !(arm_length > corridor_width)) {
        throw UsageError("passageway geometry is invalid");
    }
    if (!(desired_speed > desired_speed_spread) || desired_speed_spread < 0.0) {
        throw UsageError("desired speed range is invalid");
    }
}

std::vector<Obstacle> passageway_walls(double corridor_width, double arm_length) {
    const double h = corridor_width / 2.0;
    const double L = arm_length;
    std::vector<Obstacle> walls;
    for (double sx : {1.0, -1.0}) {
        for (double sy : {1.0, -1.0}) {
            walls.push_back({{{sx * h, sy * L}, {sx * h, sy * h}, {sx * L, sy * h}}});
        }
    }
    return walls;
}

std::uint64_t run_seed(std::uint64_t master_seed, int run_index) {
    return splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(run_index) + 1));
}

namespace {

// Arm k points along +x, +y, -x, -y; `along` is the distance from the
// crossing centre, `lateral` the offset across the corridor.
Vec2 arm_point(int arm, double along, double lateral) {
    static constexpr Vec2 axes[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const Vec2 u = axes[arm];
    const Vec2 w{-u.y, u.x};
    return u * along + w * lateral;
}

bool clear_of(const Vec2& p, const std::vector<PedestrianState>& placed, double min_sep) {
    return std::all_of(placed.begin(), placed.end(),
                       [&](const PedestrianState& s) { return distance(p, s.position) >= min_sep; });
}

}  // namespace

Scene make_scenario(const SyntheticConfig& cfg, int run_index) {
    std::mt19937_64 rng(run_seed(cfg.seed, run_index));
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    const double half = cfg.corridor_width / 2.0;
    const double lateral_max = half - 0.5;
    const double start_lo = half + 1.0;
    const double start_hi = std::min(cfg.arm_length - 1.0, half + 4.0);
    const double goal_hi = cfg.arm_length - 1.0;
    constexpr double min_sep = 0.6;

    Scene scene;
    scene.dt = cfg.dt;
    scene.obstacles = passageway_walls(cfg.corridor_width, cfg.arm_length);

    const int n = uniform_int(cfg.min_peds, cfg.max_peds);
    int group_size = 0;
    if (std::bernoulli_distribution(cfg.group_prob)(rng)) {
        group_size = uniform_int(cfg.min_group_size, std::min(cfg.max_group_size, n));
    }

    auto draw_goal = [&](int start_arm, const Vec2& start, Vec2& goal) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            int arm = uniform_int(0, 2);
            if (arm >= start_arm) ++arm;
            const Vec2 g = arm_point(arm, uniform(half + 0.5, goal_hi), uniform(-lateral_max, lateral_max));
            const double d = distance(start, g);
            if (d >= cfg.min_goal_distance && d <= cfg.max_goal_distance) {
                goal = g;
                return arm;
            }
        }
        throw InvariantError("could not place a goal at the configured distance");
    };
    auto speed = [&] {
        return cfg.desired_speed + (cfg.desired_speed_spread > 0.0
                                        ? uniform(-cfg.desired_speed_spread, cfg.desired_speed_spread)
                                        : 0.0);
    };

    AgentId next_id = 0;
    if (group_size > 0) {
        const int arm = uniform_int(0, 3);
        const double along = uniform(start_lo, start_hi);
        const double lateral = uniform(-lateral_max, lateral_max);
        Vec2 group_goal;
        const int goal_arm = draw_goal(arm, arm_point(arm, along, lateral), group_goal);
        const Vec2 goal_axis = arm_point(goal_arm, 0.0, 1.0);

        Group group;
        group.id = 0;
        for (int m = 0; m < group_size; ++m) {
            PedestrianState s;
            s.id = next_id++;
            s.group_id = group.id;
            s.desired_speed = speed();
            bool placed = false;
            for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                const double a = m == 0 ? along : along + uniform(-1.2, 1.2);
                const double l = m == 0 ? lateral : std::clamp(lateral + uniform(-1.2, 1.2), -lateral_max, lateral_max);
                const Vec2 p = arm_point(arm, a, l);
                const Vec2 g = group_goal + goal_axis * (m == 0 ? 0.0 : uniform(-0.8, 0.8));
                const double d = distance(p, g);
                if (!clear_of(p, scene.agents, min_sep) || d < cfg.min_goal_distance ||
                    d > cfg.max_goal_distance) {
                    continue;
                }
                s.position = p;
                s.goal = g;
                placed = true;
            }
            if (!placed) throw InvariantError("could not place group member");
            group.member_ids.push_back(s.id);
            scene.agents.push_back(s);
        }
        // Leader listed first; the pick is seeded once per group.
        const int leader = uniform_int(0, group_size - 1);
        std::rotate(group.member_ids.begin(), group.member_ids.begin() + leader,
                    group.member_ids.begin() + leader + 1);
        group.leader_id = group.member_ids.front();
        scene.groups.push_back(group);
    }

    while (static_cast<int>(scene.agents.size()) < n) {
        PedestrianState s;
        s.id = next_id;
        s.desired_speed = speed();
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            const int arm = uniform_int(0, 3);
            const Vec2 p = arm_point(arm, uniform(start_lo, start_hi), uniform(-lateral_max, lateral_max));
            if (!clear_of(p, scene.agents, min_sep)) continue;
            Vec2 g;
            draw_goal(arm, p, g);
            s.position = p;
            s.goal = g;
            placed = true;
        }
        if (!placed) break;  // crowded start zones; run with fewer agents
        ++next_id;
        scene.agents.push_back(s);
    }

    for (auto& a : scene.agents) {
        a.velocity = unit_vector(a.position, a.goal) * a.desired_speed;
    }
    return scene;
}

AnnotatedDataset simulate_run(const SyntheticConfig& cfg, const SfmgParams& params, int run_index) {
    const Scene scene = make_scenario(cfg, run_index);
    SimulationResult sim = simulate(scene, params, cfg.duration_s, run_seed(cfg.seed, run_index));
    char name[32];
    std::snprintf(name, sizeof name, "run_%05d", run_index);
    AnnotatedDataset data;
    data.name = name;
    data.dt = cfg.dt;
    data.trajectories = std::move(sim.trajectories);
    data.groups = scene.groups;
    data.obstacles = scene.obstacles;
    for (const auto& a : scene.agents) {
        data.destinations[a.id] = a.goal;
        data.desired_speeds[a.id] = a.desired_speed;
    }
    data.forces = std::move(sim.forces);
    // Group members that never produced a sample cannot be annotated.
    for (auto& g : data.groups) {
        std::erase_if(g.member_ids, [&](AgentId m) { return data.find_trajectory(m) == nullptr; });
    }
    std::erase_if(data.groups, [](const Group& g) { return g.member_ids.size() < 2 || !g.contains(g.leader_id); });
    return data;
}

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg, const SfmgParams& params) {
    cfg.validate();
    params.validate();
    SyntheticDataset out;
    out.runs.reserve(static_cast<std::size_t>(cfg.runs));
    for (int i = 0; i < cfg.runs; ++i) out.runs.push_back(simulate_run(cfg, params, i));
    return out;
}

void SplitSpec::validate() const {
    if (train < 0.0 || dev < 0.0 || test < 0.0 || std::abs(train + dev + test - 1.0) > 1e-9) {
        throw UsageError("split fractions must be non-negative and sum to 1");
    }
}

SplitIndices split_indices(std::size_t count, const SplitSpec& spec) {
    spec.validate();
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(splitmix64(spec.seed));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train * static_cast<double>(count) + 1e-9));
    const auto n_dev = static_cast<std::size_t>(std::floor(spec.dev * static_cast<double>(count) + 1e-9));
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.dev.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), order.end());
    return out;
}

// ---------------------------------------------------------------------------
// Text formats

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

struct Line {
    int number;
    std::vector<std::string> fields;
};

std::vector<Line> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<Line> lines;
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        const auto first = raw.find_first_not_of(" \t");
        if (first == std::string::npos || raw[first] == '#') continue;
        for (char& c : raw) {
            if (c == ',' || c == '\t') c = ' ';
        }
        std::istringstream ss(raw);
        Line line{number, {}};
        for (std::string f; ss >> f;) line.fields.push_back(f);
        lines.push_back(std::move(line));
    }
    return lines;
}

// Header comments of the form "# key: value".
std::map<std::string, std::string> read_header(const fs::path& path) {
    std::ifstream in(path);
    std::map<std::string, std::string> header;
    std::string raw;
    while (std::getline(in, raw)) {
        if (raw.empty() || raw[0] != '#') continue;
        const auto colon = raw.find(':');
        if (colon == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t#");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        header[trim(raw.substr(0, colon))] = trim(raw.substr(colon + 1));
    }
    return header;
}

double parse_double(const std::string& s, const fs::path& path, int line) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(v)) {
        throw DataError(path.string() + ":" + std::to_string(line) + ": malformed number '" + s + "'");
    }
    return v;
}

AgentId parse_id(const std::string& s, const fs::path& path, int line) {
    const double v = parse_double(s, path, line);
    if (v != std::round(v)) {
        throw DataError(path.string() + ":" + std::to_string(line) + ": non-integer id '" + s + "'");
    }
    return static_cast<AgentId>(std::llround(v));
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

}  // namespace

std::vector<Group> read_groups(const fs::path& path) {
    std::vector<Group> groups;
    for (const auto& line : read_lines(path)) {
        Group g;
        g.id = static_cast<GroupId>(groups.size());
        for (const auto& f : line.fields) g.member_ids.push_back(parse_id(f, path, line.number));
        g.leader_id = g.member_ids.front();
        groups.push_back(std::move(g));
    }
    return groups;
}

std::vector<Obstacle> read_obstacles(const fs::path& path) {
    std::vector<Obstacle> obstacles;
    for (const auto& line : read_lines(path)) {
        if (line.fields.size() % 2 != 0) {
            throw DataError(path.string() + ":" + std::to_string(line.number) +
                            ": polyline needs an even number of coordinates");
        }
        Obstacle o;
        for (std::size_t i = 0; i < line.fields.size(); i += 2) {
            o.polyline.push_back({parse_double(line.fields[i], path, line.number),
                                  parse_double(line.fields[i + 1], path, line.number)});
        }
        obstacles.push_back(std::move(o));
    }
    return obstacles;
}

std::map<AgentId, Vec2> read_destinations(const fs::path& path) {
    std::map<AgentId, Vec2> dest;
    for (const auto& line : read_lines(path)) {
        if (line.fields.size() != 3) {
            throw DataError(path.string() + ":" + std::to_string(line.number) +
                            ": expected 'pedestrian_id x y'");
        }
        dest[parse_id(line.fields[0], path, line.number)] = {
            parse_double(line.fields[1], path, line.number), parse_double(line.fields[2], path, line.number)};
    }
    return dest;
}

namespace {

void read_forces(const fs::path& path, AnnotatedDataset& data, double stride) {
    for (const auto& line : read_lines(path)) {
        if (line.fields.size() != 15) {
            throw DataError(path.string() + ":" + std::to_string(line.number) + ": expected 15 columns");
        }
        std::array<double, 15> v{};
        for (std::size_t i = 0; i < 15; ++i) v[i] = parse_double(line.fields[i], path, line.number);
        ForceRecord r;
        r.step = static_cast<int>(std::llround(v[0] / stride));
        r.agent_id = static_cast<AgentId>(std::llround(v[1]));
        data.desired_speeds[r.agent_id] = v[2];
        r.velocity = {v[3], v[4]};
        r.forces.acceleration = {v[5], v[6]};
        r.forces.obstacle = {v[7], v[8]};
        r.forces.pedestrians = {v[9], v[10]};
        r.forces.group = {v[11], v[12]};
        r.forces.total = {v[13], v[14]};
        data.forces.push_back(r);
    }
    std::stable_sort(data.forces.begin(), data.forces.end(),
                     [](const ForceRecord& a, const ForceRecord& b) { return a.step < b.step; });
}

}  // namespace

AnnotatedDataset load_trajectories(const fs::path& path, const LoadOptions& options) {
    const auto header = read_header(path);
    const auto lines = read_lines(path);

    struct Row {
        double frame;
        AgentId id;
        Vec2 p;
        int line;
    };
    std::vector<Row> rows;
    rows.reserve(lines.size());
    for (const auto& line : lines) {
        if (line.fields.size() < 4) {
            throw DataError(path.string() + ":" + std::to_string(line.number) +
                            ": expected 'frame_id pedestrian_id x y'");
        }
        rows.push_back({parse_double(line.fields[0], path, line.number), parse_id(line.fields[1], path, line.number),
                        {parse_double(line.fields[2], path, line.number),
                         parse_double(line.fields[3], path, line.number)},
                        line.number});
    }

    // Frame stride: header value, else gcd of distinct frame gaps.
    std::int64_t stride = 0;
    if (auto it = header.find("frame_stride"); it != header.end()) {
        stride = static_cast<std::int64_t>(std::llround(parse_double(it->second, path, 0)));
    } else {
        std::vector<std::int64_t> frames;
        for (const auto& r : rows) frames.push_back(std::llround(r.frame));
        std::sort(frames.begin(), frames.end());
        frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
        for (std::size_t i = 1; i < frames.size(); ++i) stride = std::gcd(stride, frames[i] - frames[i - 1]);
    }
    if (stride <= 0) stride = 1;

    AnnotatedDataset data;
    data.name = path.parent_path().filename().string();
    if (options.dt > 0.0) {
        data.dt = options.dt;
    } else if (auto it = header.find("dt"); it != header.end()) {
        data.dt = parse_double(it->second, path, 0);
    } else if (options.frame_rate > 0.0) {
        data.dt = static_cast<double>(stride) / options.frame_rate;
    } else {
        data.dt = 0.4;  // benchmark annotation rate
    }

    std::map<AgentId, std::vector<TrajectorySample>> by_agent;
    for (const auto& r : rows) {
        const auto frame = std::llround(r.frame);
        if (frame % stride != 0) {
            throw DataError(path.string() + ":" + std::to_string(r.line) + ": frame off the stride grid");
        }
        by_agent[r.id].push_back({static_cast<int>(frame / stride), r.p});
    }
    for (auto& [id, samples] : by_agent) {
        std::stable_sort(samples.begin(), samples.end(),
                         [](const TrajectorySample& a, const TrajectorySample& b) { return a.step < b.step; });
        for (std::size_t i = 1; i < samples.size(); ++i) {
            if (samples[i].step == samples[i - 1].step) {
                throw DataError(path.string() + ": pedestrian " + std::to_string(id) +
                                " appears twice in frame " + std::to_string(samples[i].step * stride));
            }
        }
        data.trajectories.push_back({id, std::move(samples)});
    }

    if (!options.groups_path.empty()) {
        data.groups = read_groups(options.groups_path);
        for (const auto& g : data.groups) {
            for (AgentId m : g.member_ids) {
                if (data.find_trajectory(m) == nullptr) {
                    throw DataError(options.groups_path.string() + ": unknown pedestrian id " +
                                    std::to_string(m));
                }
            }
        }
    }
    if (!options.obstacles_path.empty()) data.obstacles = read_obstacles(options.obstacles_path);
    if (!options.destinations_path.empty()) data.destinations = read_destinations(options.destinations_path);
    if (!options.forces_path.empty()) read_forces(options.forces_path, data, static_cast<double>(stride));
    data.validate();
    return data;
}

void write_trajectories(const fs::path& path, const AnnotatedDataset& data) {
    auto out = open_out(path);
    out << "# dt: " << format_double(data.dt) << "\n# frame_stride: 1\n";
    struct Row {
        int step;
        AgentId id;
        Vec2 p;
    };
    std::vector<Row> rows;
    for (const auto& t : data.trajectories) {
        for (const auto& s : t.samples) rows.push_back({s.step, t.agent_id, s.position});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.step != b.step ? a.step < b.step : a.id < b.id;
    });
    for (const auto& r : rows) {
        out << r.step << ' ' << r.id << ' ' << format_double(r.p.x) << ' ' << format_double(r.p.y) << '\n';
    }
}

void write_groups(const fs::path& path, const std::vector<Group>& groups) {
    auto out = open_out(path);
    for (const auto& g : groups) {
        out << g.leader_id;
        for (AgentId m : g.member_ids) {
            if (m != g.leader_id) out << ' ' << m;
        }
        out << '\n';
    }
}

void write_obstacles(const fs::path& path, const std::vector<Obstacle>& obstacles) {
    auto out = open_out(path);
    for (const auto& o : obstacles) {
        for (std::size_t i = 0; i < o.polyline.size(); ++i) {
            if (i) out << ' ';
            out << format_double(o.polyline[i].x) << ' ' << format_double(o.polyline[i].y);
        }
        out << '\n';
    }
}

void write_destinations(const fs::path& path, const std::map<AgentId, Vec2>& dest) {
    auto out = open_out(path);
    for (const auto& [id, g] : dest) out << id << ' ' << format_double(g.x) << ' ' << format_double(g.y) << '\n';
}

void write_forces(const fs::path& path, const AnnotatedDataset& data) {
    auto out = open_out(path);
    out << "# frame pedestrian_id desired_speed vx vy fax fay fbx fby fpx fpy fgx fgy ftx fty\n";
    for (const auto& r : data.forces) {
        const auto speed_it = data.desired_speeds.find(r.agent_id);
        const double v0 = speed_it == data.desired_speeds.end() ? 0.0 : speed_it->second;
        const auto& f = r.forces;
        out << r.step << ' ' << r.agent_id << ' ' << format_double(v0);
        for (const Vec2& v : {r.velocity, f.acceleration, f.obstacle, f.pedestrians, f.group, f.total}) {
            out << ' ' << format_double(v.x) << ' ' << format_double(v.y);
        }
        out << '\n';
    }
}

void write_dataset_dir(const fs::path& dir, const AnnotatedDataset& data) {
    fs::create_directories(dir);
    write_trajectories(dir / "trajectories.txt", data);
    write_groups(dir / "groups.txt", data.groups);
    write_obstacles(dir / "obstacles.txt", data.obstacles);
    write_destinations(dir / "destinations.txt", data.destinations);
    if (!data.forces.empty()) write_forces(dir / "forces.txt", data);
}

AnnotatedDataset read_dataset_dir(const fs::path& dir) {
    LoadOptions opts;
    auto optional = [&](const char* name) { return fs::exists(dir / name) ? dir / name : fs::path{}; };
    opts.groups_path = optional("groups.txt");
    opts.obstacles_path = optional("obstacles.txt");
    opts.destinations_path = optional("destinations.txt");
    opts.forces_path = optional("forces.txt");
    AnnotatedDataset data = load_trajectories(dir / "trajectories.txt", opts);
    data.name = dir.filename().string();
    return data;
}

void write_synthetic(const fs::path& dir, const SyntheticDataset& data, const SyntheticConfig& cfg) {
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["format"] = "sfmg-synthetic";
    manifest["version"] = 1;
    manifest["runs"] = data.runs.size();
    manifest["config"] = {{"runs", cfg.runs},
                          {"duration_s", cfg.duration_s},
                          {"dt", cfg.dt},
                          {"min_peds", cfg.min_peds},
                          {"max_peds", cfg.max_peds},
                          {"group_prob", cfg.group_prob},
                          {"seed", cfg.seed}};
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (const auto& run : data.runs) {
        write_dataset_dir(dir / run.name, run);
        names.push_back(run.name);
    }
    manifest["run_dirs"] = names;
    auto out = open_out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
}

SyntheticDataset read_synthetic(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("missing synthetic manifest " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "sfmg-synthetic" || manifest.value("version", 0) != 1) {
        throw DataError("unsupported synthetic manifest in " + dir.string());
    }
    SyntheticDataset data;
    for (const auto& name : manifest.at("run_dirs")) {
        data.runs.push_back(read_dataset_dir(dir / name.get<std::string>()));
    }
    return data;
}

}  // namespace sfmg
