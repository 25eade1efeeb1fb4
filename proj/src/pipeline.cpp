#include "sfmg/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace sfmg {

namespace {

const std::vector<std::pair<std::string, std::string>>& default_entries() {
    static const std::vector<std::pair<std::string, std::string>> entries = {
        {"seed", "42"},
        {"dt", "0.1"},
        {"window_n", "10"},
        {"horizon_s", "4.8"},
        {"goal_source", "auto"},
        {"ablation", "full"},

        {"sim.tau", "0.5"},
        {"sim.v0", "5"},
        {"sim.sigma", "0.3"},
        {"sim.u0", "10"},
        {"sim.r", "0.2"},
        {"sim.lambda", "0.2"},
        {"sim.s_vis", "-1"},
        {"sim.s_att", "1"},
        {"sim.d_coh", "0.5"},
        {"sim.noise_std", "0"},
        {"sim.fov_deg", "100"},
        {"sim.max_speed_factor", "1.3"},
        {"sim.goal_radius", "0.3"},

        {"gen.runs", "1000"},
        {"gen.duration_s", "30"},
        {"gen.min_peds", "2"},
        {"gen.max_peds", "10"},
        {"gen.group_prob", "0.5"},
        {"gen.min_group_size", "2"},
        {"gen.max_group_size", "4"},
        {"gen.min_goal_distance", "7"},
        {"gen.max_goal_distance", "10"},
        {"gen.corridor_width", "4"},
        {"gen.arm_length", "10"},
        {"gen.desired_speed", "1.34"},
        {"gen.desired_speed_spread", "0"},

        {"split.train", "0.5"},
        {"split.dev", "0.25"},
        {"split.test", "0.25"},
        {"split.seed", "7"},

        {"model.seed", "1"},
        {"model.width.net1", "32"},
        {"model.width.net2", "16"},
        {"model.width.net3", "16"},
        {"model.width.net3_aggregator", "32"},
        {"model.width.net4", "16"},
        {"model.width.recombination", "16"},

        {"train.lr", "0.001"},
        {"train.batch_size", "16"},
        {"train.max_epochs", "200"},
        {"train.patience", "10"},
        {"train.max_samples_per_epoch", "0"},
        {"train.seed", "11"},

        {"recomb.lr", "0.1"},
        {"recomb.batch_size", "16"},
        {"recomb.max_epochs", "200"},
        {"recomb.patience", "10"},

        {"features.exclude_group_members", "false"},
        {"features.nominal_speed", "1.34"},

        {"imm.turn_rates", "-0.4,-0.2,0,0.2,0.4"},
        {"imm.horizon_s", "8"},
        {"imm.stay_probability", "0.9"},
        {"imm.q", "0.1"},
        {"imm.r", "0.05"},
        {"imm.steer_time", "0.2"},
        {"imm.observation_s", "1.2"},

        {"eval.runs", "100"},
        {"eval.group_prob", "1"},
        {"eval.sliding", "false"},
        {"eval.max_history", "13"},
        {"eval.collision_threshold", "0.1"},
        {"eval.joint", "true"},
    };
    return entries;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string env_name(const std::string& key) {
    std::string out = RunConfig::env_prefix;
    for (char c : key) {
        out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (item.empty() || end != item.c_str() + item.size()) {
            throw UsageError("config key '" + key + "' expects a comma-separated list of numbers, got '" + text + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw UsageError("config key '" + key + "' must not be empty");
    return out;
}

}  // namespace

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

RunConfig::RunConfig() {
    for (const auto& [k, v] : default_entries()) values_[k] = v;
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> out = [] {
        std::vector<std::string> k;
        for (const auto& e : default_entries()) k.push_back(e.first);
        return k;
    }();
    return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
    it->second = trim(value);
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
    return it->second;
}

double RunConfig::number(const std::string& key) const {
    const std::string& s = get(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw UsageError("config key '" + key + "' expects a number, got '" + s + "'");
    }
    return v;
}

long RunConfig::integer(const std::string& key) const {
    const std::string& s = get(key);
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw UsageError("config key '" + key + "' expects an integer, got '" + s + "'");
    }
    return v;
}

bool RunConfig::flag(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw UsageError("config key '" + key + "' expects true or false, got '" + s + "'");
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (!values_.count(key)) {
            throw UsageError(path.string() + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
        }
        set(key, line.substr(eq + 1));
    }
}

void RunConfig::load_env(char** envp) {
    if (envp == nullptr) return;
    std::map<std::string, std::string> by_env;
    for (const auto& k : keys()) by_env[env_name(k)] = k;
    const std::size_t plen = std::strlen(env_prefix);
    for (char** e = envp; *e != nullptr; ++e) {
        const std::string entry = *e;
        if (entry.compare(0, plen, env_prefix) != 0) continue;
        const auto eq = entry.find('=');
        const std::string name = entry.substr(0, eq);
        auto it = by_env.find(name);
        if (it == by_env.end()) throw UsageError("unknown configuration variable " + name);
        set(it->second, eq == std::string::npos ? "" : entry.substr(eq + 1));
    }
}

std::string RunConfig::canonical() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
    return out.str();
}

std::string RunConfig::fingerprint() const { return to_hex(fnv1a(canonical())); }

SfmgParams RunConfig::sfmg_params() const {
    SfmgParams p;
    p.tau = number("sim.tau");
    p.V0 = number("sim.v0");
    p.sigma = number("sim.sigma");
    p.U0 = number("sim.u0");
    p.R = number("sim.r");
    p.lambda = number("sim.lambda");
    p.S_vis = number("sim.s_vis");
    p.S_att = number("sim.s_att");
    p.d_coh = number("sim.d_coh");
    p.noise_std = number("sim.noise_std");
    p.fov.half_angle = number("sim.fov_deg") * std::numbers::pi / 180.0;
    p.max_speed_factor = number("sim.max_speed_factor");
    p.goal_radius = number("sim.goal_radius");
    p.validate();
    return p;
}

SyntheticConfig RunConfig::synthetic_config() const {
    SyntheticConfig c;
    c.runs = static_cast<int>(integer("gen.runs"));
    c.duration_s = number("gen.duration_s");
    c.dt = number("dt");
    c.min_peds = static_cast<int>(integer("gen.min_peds"));
    c.max_peds = static_cast<int>(integer("gen.max_peds"));
    c.group_prob = number("gen.group_prob");
    c.min_group_size = static_cast<int>(integer("gen.min_group_size"));
    c.max_group_size = static_cast<int>(integer("gen.max_group_size"));
    c.min_goal_distance = number("gen.min_goal_distance");
    c.max_goal_distance = number("gen.max_goal_distance");
    c.corridor_width = number("gen.corridor_width");
    c.arm_length = number("gen.arm_length");
    c.desired_speed = number("gen.desired_speed");
    c.desired_speed_spread = number("gen.desired_speed_spread");
    c.seed = static_cast<std::uint64_t>(integer("seed"));
    c.validate();
    return c;
}

SyntheticConfig RunConfig::eval_synthetic_config() const {
    SyntheticConfig c = synthetic_config();
    c.runs = static_cast<int>(integer("eval.runs"));
    c.group_prob = number("eval.group_prob");
    c.seed = splitmix64(c.seed ^ 0xE7A1ULL);
    c.validate();
    return c;
}

SplitSpec RunConfig::split_spec() const {
    SplitSpec s;
    s.train = number("split.train");
    s.dev = number("split.dev");
    s.test = number("split.test");
    s.seed = static_cast<std::uint64_t>(integer("split.seed"));
    s.validate();
    return s;
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.n = static_cast<int>(integer("window_n"));
    m.dt = number("dt");
    m.widths.net1 = static_cast<int>(integer("model.width.net1"));
    m.widths.net2 = static_cast<int>(integer("model.width.net2"));
    m.widths.net3 = static_cast<int>(integer("model.width.net3"));
    m.widths.net3_aggregator = static_cast<int>(integer("model.width.net3_aggregator"));
    m.widths.net4 = static_cast<int>(integer("model.width.net4"));
    m.widths.recombination = static_cast<int>(integer("model.width.recombination"));
    m.ablation = parse_ablation(get("ablation"));
    m.seed = static_cast<std::uint64_t>(integer("model.seed"));
    m.validate();
    return m;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.lr = number("train.lr");
    t.batch_size = static_cast<int>(integer("train.batch_size"));
    t.max_epochs = static_cast<int>(integer("train.max_epochs"));
    t.patience = static_cast<int>(integer("train.patience"));
    const long cap = integer("train.max_samples_per_epoch");
    if (cap < 0) throw UsageError("train.max_samples_per_epoch must be non-negative");
    t.max_samples_per_epoch = static_cast<std::size_t>(cap);
    t.seed = static_cast<std::uint64_t>(integer("train.seed"));
    t.validate();
    return t;
}

TrainConfig RunConfig::recombination_config() const {
    TrainConfig t = train_config();
    t.lr = number("recomb.lr");
    t.batch_size = static_cast<int>(integer("recomb.batch_size"));
    t.max_epochs = static_cast<int>(integer("recomb.max_epochs"));
    t.patience = static_cast<int>(integer("recomb.patience"));
    t.validate();
    return t;
}

FeatureConfig RunConfig::feature_config() const {
    const SfmgParams p = sfmg_params();
    FeatureConfig f;
    f.n = static_cast<int>(integer("window_n"));
    f.fov = p.fov;
    f.d_coh = p.d_coh;
    f.nominal_speed = number("features.nominal_speed");
    f.exclude_group_members = flag("features.exclude_group_members");
    f.goal_source = parse_goal_source(get("goal_source"));
    f.imm.turn_rates = parse_list("imm.turn_rates", get("imm.turn_rates"));
    f.imm.horizon_s = number("imm.horizon_s");
    f.imm.stay_probability = number("imm.stay_probability");
    f.imm.q = number("imm.q");
    f.imm.r = number("imm.r");
    f.imm.steer_time = number("imm.steer_time");
    f.imm.arrival_radius = p.goal_radius;
    f.imm_observation_s = number("imm.observation_s");
    f.validate();
    return f;
}

EvalProtocol RunConfig::eval_protocol() const {
    EvalProtocol e;
    e.n = static_cast<int>(integer("window_n"));
    e.horizon_s = number("horizon_s");
    e.sliding = flag("eval.sliding");
    e.max_history = static_cast<int>(integer("eval.max_history"));
    e.collision_threshold = number("eval.collision_threshold");
    if (!(e.horizon_s > 0.0)) throw UsageError("horizon_s must be positive");
    return e;
}

RolloutOptions RunConfig::rollout_options() const {
    RolloutOptions o;
    o.horizon_s = number("horizon_s");
    o.joint = flag("eval.joint");
    o.goal_radius = number("sim.goal_radius");
    return o;
}

const ModelParams& TrainedModels::model(Ablation a) const {
    const auto& m = by_ablation[static_cast<std::size_t>(a)];
    if (!m) throw UsageError(std::string("no model trained for ablation ") + to_string(a));
    return *m;
}

std::vector<TrainingSample> build_samples(const SyntheticDataset& data, const FeatureConfig& features) {
    std::vector<TrainingSample> all;
    for (const auto& run : data.runs) {
        const auto frames = extract_all(run, features);
        auto s = make_samples(frames);
        all.insert(all.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    if (all.empty()) throw DataError("no labelled frames: the data carries no force targets or no eligible windows");
    return all;
}

std::string data_fingerprint(const SyntheticDataset& data, const SyntheticConfig& cfg) {
    std::ostringstream s;
    s << "runs=" << data.runs.size() << " dt=" << format_double(cfg.dt) << " seed=" << cfg.seed
      << " group_prob=" << format_double(cfg.group_prob) << " duration=" << format_double(cfg.duration_s);
    std::size_t samples = 0;
    for (const auto& r : data.runs) {
        for (const auto& t : r.trajectories) samples += t.size();
    }
    s << " samples=" << samples;
    return to_hex(fnv1a(s.str()));
}

TrainedModels train_models(const SyntheticDataset& data, const RunConfig& config,
                           const std::vector<Ablation>& ablations) {
    if (ablations.empty()) throw UsageError("no ablation setting requested");
    const FeatureConfig features = config.feature_config();
    ModelConfig mc = config.model_config();
    if (!data.runs.empty()) mc.dt = data.runs.front().dt;
    for (const auto& r : data.runs) {
        if (std::abs(r.dt - mc.dt) > 1e-12) throw DataError("runs with different dt cannot be trained together");
    }

    const auto samples = build_samples(data, features);
    const auto parts = split(samples, config.split_spec());
    if (parts.train.empty() || parts.dev.empty() || parts.test.empty()) {
        throw DataError("too few samples for a train/dev/test split (" + std::to_string(samples.size()) + ")");
    }

    TrainedModels out;
    out.train_samples = parts.train.size();
    out.dev_samples = parts.dev.size();
    out.test_samples = parts.test.size();

    ModelParams base = ModelParams::create(mc);
    base.data_fingerprint = data_fingerprint(data, config.synthetic_config());
    const TrainConfig tc = config.train_config();
    const ModuleId modules[] = {ModuleId::net1, ModuleId::net2, ModuleId::net3, ModuleId::net4};
    for (std::size_t i = 0; i < 4; ++i) {
        out.module_logs[i] = train_module(base, modules[i], parts.train, parts.dev, tc);
    }
    out.test_mse.net1 = module_mse(base, ModuleId::net1, parts.test);
    out.test_mse.net2 = module_mse(base, ModuleId::net2, parts.test);
    out.test_mse.net3 = module_mse(base, ModuleId::net3, parts.test);
    out.test_mse.net4 = module_mse(base, ModuleId::net4, parts.test);

    const TrainConfig rc = config.recombination_config();
    for (std::size_t i = 0; i < ablations.size(); ++i) {
        ModelParams m = base;
        m.config.ablation = ablations[i];
        const auto slot = static_cast<std::size_t>(ablations[i]);
        out.recombination_logs[slot] = train_recombination(m, parts.train, parts.dev, rc);
        if (i == 0) out.test_mse.full = total_mse(m, parts.test);
        out.by_ablation[slot] = std::move(m);
    }
    return out;
}

SyntheticDataset evaluation_scenes(const RunConfig& config, const SfmgParams& params) {
    return generate_synthetic(config.eval_synthetic_config(), params);
}

}  // namespace sfmg
