// sfmg: generate synthetic data, train SFMGNet, predict, evaluate and run the
// ablation study. Exit codes: 0 ok, 1 usage, 2 data, 3 invariant violation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "sfmg/pipeline.hpp"

extern char** environ;

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace sfmg {
namespace {

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out = "runs";
    std::optional<long> seed;
    std::optional<std::string> ablation;
    std::optional<double> dt;
    std::optional<long> window_n;
    std::optional<double> horizon_s;
    std::optional<std::string> goal_source;
};

struct CommandOptions {
    std::string data;
    std::string checkpoint;
    std::vector<std::string> benchmark;
    double frame_rate = 0.0;
    int run = 0;
    std::optional<int> step;
};

RunConfig resolve_config(const CommonOptions& o) {
    RunConfig c;
    if (!o.config_path.empty()) c.load_file(o.config_path);
    c.load_env(environ);
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        c.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (o.seed) c.set("seed", std::to_string(*o.seed));
    if (o.ablation) c.set("ablation", *o.ablation);
    if (o.dt) c.set("dt", format_double(*o.dt));
    if (o.window_n) c.set("window_n", std::to_string(*o.window_n));
    if (o.horizon_s) c.set("horizon_s", format_double(*o.horizon_s));
    if (o.goal_source) c.set("goal_source", *o.goal_source);
    // Parse everything once so bad values fail before any work starts.
    c.sfmg_params();
    c.synthetic_config();
    c.split_spec();
    c.model_config();
    c.train_config();
    c.recombination_config();
    c.feature_config();
    c.eval_protocol();
    return c;
}

fs::path stamp_dir(const CommonOptions& o, const std::string& command, const RunConfig& c,
                   const std::vector<std::string>& inputs) {
    std::string key = command + '\n' + c.canonical();
    for (const auto& i : inputs) key += i + '\n';
    const fs::path dir = fs::path(o.out) / (command + "-" + to_hex(fnv1a(key)).substr(0, 12));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

void write_run_log(const fs::path& dir, const std::string& command, const RunConfig& c, ordered_json inputs,
                   ordered_json metrics, const std::vector<std::string>& artifacts) {
    ordered_json log;
    log["command"] = command;
    log["config_fingerprint"] = c.fingerprint();
    log["seed"] = c.get("seed");
    log["config"] = c.values();
    log["inputs"] = std::move(inputs);
    log["metrics"] = std::move(metrics);
    log["artifacts"] = artifacts;
    write_text(dir / "run_log.json", log.dump(2) + '\n');
}

fs::path synthetic_root(const std::string& data) {
    if (data.empty()) throw UsageError("--data is required (point it at the output of 'sfmg gen')");
    const fs::path p(data);
    if (fs::exists(p / "manifest.json")) return p;
    if (fs::exists(p / "data" / "manifest.json")) return p / "data";
    throw DataError("no generated data at " + p.string() +
                    " (expected manifest.json or data/manifest.json; run 'sfmg gen' first)");
}

fs::path checkpoint_root(const std::string& checkpoint) {
    if (checkpoint.empty()) throw UsageError("--checkpoint is required (point it at the output of 'sfmg train')");
    const fs::path p(checkpoint);
    if (fs::exists(p / "manifest.json") && fs::exists(p / "weights.txt")) return p;
    if (fs::exists(p / "checkpoint" / "manifest.json")) return p / "checkpoint";
    throw DataError("no checkpoint at " + p.string() +
                    " (expected manifest.json and weights.txt; run 'sfmg train' first)");
}

// Synthetic directory, dataset directory or single trajectory file.
std::vector<AnnotatedDataset> load_any(const std::string& path, const LoadOptions& opts) {
    const fs::path p(path);
    if (!fs::exists(p)) throw DataError("input not found: " + p.string());
    if (fs::is_directory(p)) {
        if (fs::exists(p / "manifest.json") || fs::exists(p / "data" / "manifest.json")) {
            return read_synthetic(synthetic_root(path)).runs;
        }
        return {read_dataset_dir(p)};
    }
    AnnotatedDataset d = load_trajectories(p, opts);
    if (d.name.empty()) d.name = p.stem().string();
    return {d};
}

ordered_json module_scores_json(const TrainedModels& t) {
    return {{"net1_test_mse", t.test_mse.net1}, {"net2_test_mse", t.test_mse.net2},
            {"net3_test_mse", t.test_mse.net3}, {"net4_test_mse", t.test_mse.net4},
            {"full_test_mse", t.test_mse.full}, {"train_samples", t.train_samples},
            {"dev_samples", t.dev_samples},     {"test_samples", t.test_samples}};
}

int cmd_simulate(const CommonOptions& o, const CommandOptions& a) {
    const RunConfig c = resolve_config(o);
    const SyntheticConfig sc = c.synthetic_config();
    if (a.run < 0) throw UsageError("--run must be non-negative");
    const AnnotatedDataset run = simulate_run(sc, c.sfmg_params(), a.run);
    const fs::path dir = stamp_dir(o, "simulate", c, {std::to_string(a.run)});

    std::ofstream out(dir / "forces.tsv");
    if (!out) throw DataError("cannot write " + (dir / "forces.tsv").string());
    out << "t\tagent\tpx\tpy\tfax\tfay\tfbx\tfby\tfpx\tfpy\tfgx\tfgy\tftx\tfty\n";
    for (const auto& r : run.forces) {
        const Trajectory* tr = run.find_trajectory(r.agent_id);
        if (tr == nullptr) continue;
        const auto p = tr->at(r.step);
        if (!p) continue;
        const auto& f = r.forces;
        const Vec2 cols[] = {*p, f.acceleration, f.obstacle, f.pedestrians, f.group, f.total};
        out << format_double(r.step * run.dt) << '\t' << r.agent_id;
        for (const auto& v : cols) out << '\t' << format_double(v.x) << '\t' << format_double(v.y);
        out << '\n';
    }
    out.close();
    write_dataset_dir(dir / "scene", run);
    write_run_log(dir, "simulate", c, {{"run", a.run}},
                  {{"agents", run.trajectories.size()}, {"force_rows", run.forces.size()}},
                  {"forces.tsv", "scene"});
    std::cout << dir.string() << '\n';
    return 0;
}

int cmd_gen(const CommonOptions& o, const CommandOptions&) {
    const RunConfig c = resolve_config(o);
    const SyntheticConfig sc = c.synthetic_config();
    const SyntheticDataset data = generate_synthetic(sc, c.sfmg_params());
    const fs::path dir = stamp_dir(o, "gen", c, {});
    write_synthetic(dir / "data", data, sc);
    std::size_t samples = 0;
    for (const auto& r : data.runs) {
        for (const auto& t : r.trajectories) samples += t.size();
    }
    write_run_log(dir, "gen", c, ordered_json::object(),
                  {{"runs", data.runs.size()}, {"samples", samples}, {"data_fingerprint", data_fingerprint(data, sc)}},
                  {"data"});
    std::cout << dir.string() << '\n';
    return 0;
}

int cmd_train(const CommonOptions& o, const CommandOptions& a) {
    const RunConfig c = resolve_config(o);
    const fs::path root = synthetic_root(a.data);
    const SyntheticDataset data = read_synthetic(root);
    const Ablation ablation = parse_ablation(c.get("ablation"));
    const TrainedModels trained = train_models(data, c, {ablation});
    const fs::path dir = stamp_dir(o, "train", c, {fs::absolute(root).lexically_normal().string()});
    save_checkpoint(dir / "checkpoint", trained.model(ablation));

    ordered_json logs = ordered_json::object();
    const char* names[] = {"net1", "net2", "net3", "net4"};
    for (std::size_t i = 0; i < 4; ++i) {
        logs[names[i]] = {{"best_epoch", trained.module_logs[i].best_epoch},
                          {"best_dev_mse", trained.module_logs[i].best_dev_mse},
                          {"train_mse", trained.module_logs[i].train_mse},
                          {"dev_mse", trained.module_logs[i].dev_mse}};
    }
    const auto& rl = trained.recombination_logs[static_cast<std::size_t>(ablation)];
    logs["recombination"] = {{"best_epoch", rl.best_epoch}, {"best_dev_mse", rl.best_dev_mse},
                             {"train_mse", rl.train_mse}, {"dev_mse", rl.dev_mse}};
    write_text(dir / "train_log.json", logs.dump(2) + '\n');

    const ordered_json scores = module_scores_json(trained);
    write_run_log(dir, "train", c, {{"data", root.string()}}, scores, {"checkpoint", "train_log.json"});
    for (const auto& [k, v] : scores.items()) std::cout << k << ' ' << v.dump() << '\n';
    std::cout << dir.string() << '\n';
    return 0;
}

int cmd_predict(const CommonOptions& o, const CommandOptions& a) {
    const RunConfig c = resolve_config(o);
    const fs::path ck = checkpoint_root(a.checkpoint);
    const ModelParams model = load_checkpoint(ck);
    if (a.data.empty()) throw UsageError("--data is required (a gen output, dataset directory or trajectory file)");
    LoadOptions lo;
    lo.frame_rate = a.frame_rate;
    if (o.dt) lo.dt = *o.dt;
    const auto datasets = load_any(a.data, lo);
    if (a.run < 0 || static_cast<std::size_t>(a.run) >= datasets.size()) {
        throw UsageError("--run " + std::to_string(a.run) + " out of range (" + std::to_string(datasets.size()) +
                         " scenes)");
    }
    const AnnotatedDataset& data = datasets[static_cast<std::size_t>(a.run)];
    data.validate();
    if (std::abs(data.dt - model.config.dt) > 1e-9) {
        throw DataError("data dt " + format_double(data.dt) + " differs from the checkpoint dt " +
                        format_double(model.config.dt));
    }
    FeatureConfig fc = c.feature_config();
    fc.n = model.config.n;
    int first = 0;
    bool any = false;
    for (const auto& t : data.trajectories) {
        if (t.empty()) continue;
        first = any ? std::min(first, t.first_step()) : t.first_step();
        any = true;
    }
    if (!any) throw DataError("no trajectories in " + a.data);
    const int t0 = a.step.value_or(first + fc.n);
    const EvalProtocol protocol = c.eval_protocol();
    const RolloutScene scene = scene_from_dataset(data, t0, std::max(protocol.max_history, fc.n));
    if (scene.agents.empty()) throw DataError("no agent is observed at step " + std::to_string(t0));
    RolloutOptions ro = c.rollout_options();
    const auto pred = rollout(model, scene, fc, ro);

    const fs::path dir = stamp_dir(o, "predict", c, {fs::absolute(ck).lexically_normal().string(), a.data,
                                                      std::to_string(a.run), std::to_string(t0)});
    std::ofstream out(dir / "predictions.tsv");
    if (!out) throw DataError("cannot write " + (dir / "predictions.tsv").string());
    out << "series\tagent\tstep\tt\tx\ty\n";
    auto row = [&](const char* series, AgentId id, int step, const Vec2& p) {
        out << series << '\t' << id << '\t' << step << '\t' << format_double(step * data.dt) << '\t'
            << format_double(p.x) << '\t' << format_double(p.y) << '\n';
    };
    std::size_t truth_rows = 0;
    for (std::size_t i = 0; i < scene.agents.size(); ++i) {
        const auto& agent = scene.agents[i];
        const int h0 = t0 - static_cast<int>(agent.history.size()) + 1;
        for (std::size_t k = 0; k < agent.history.size(); ++k) row("observed", agent.id, h0 + static_cast<int>(k), agent.history[k]);
        for (const auto& s : pred[i].samples) row("predicted", agent.id, s.step, s.position);
        if (const Trajectory* tr = data.find_trajectory(agent.id)) {
            for (const auto& s : pred[i].samples) {
                if (auto p = tr->at(s.step)) {
                    row("truth", agent.id, s.step, *p);
                    ++truth_rows;
                }
            }
        }
    }
    out.close();
    write_run_log(dir, "predict", c, {{"checkpoint", ck.string()}, {"data", a.data}, {"run", a.run}, {"step", t0}},
                  {{"agents", scene.agents.size()}, {"horizon_steps", horizon_steps(ro.horizon_s, data.dt)},
                   {"truth_rows", truth_rows}},
                  {"predictions.tsv"});
    std::cout << dir.string() << '\n';
    return 0;
}

int cmd_eval(const CommonOptions& o, const CommandOptions& a) {
    const RunConfig c = resolve_config(o);
    const fs::path ck = checkpoint_root(a.checkpoint);
    const ModelParams model = load_checkpoint(ck);
    FeatureConfig fc = c.feature_config();
    fc.n = model.config.n;
    EvalProtocol protocol = c.eval_protocol();
    protocol.n = model.config.n;

    std::vector<AnnotatedDataset> datasets;
    std::string source;
    LoadOptions lo;
    lo.frame_rate = a.frame_rate;
    if (o.dt) lo.dt = *o.dt;
    if (!a.benchmark.empty()) {
        for (const auto& b : a.benchmark) {
            auto d = load_any(b, lo);
            datasets.insert(datasets.end(), d.begin(), d.end());
        }
        source = "benchmark";
    } else if (!a.data.empty()) {
        datasets = load_any(a.data, lo);
        source = a.data;
    } else {
        datasets = evaluation_scenes(c, c.sfmg_params()).runs;
        source = "held-out synthetic scenes";
    }
    for (const auto& d : datasets) {
        d.validate();
        if (std::abs(d.dt - model.config.dt) > 1e-9) {
            throw DataError("scene '" + d.name + "' has dt " + format_double(d.dt) + " but the checkpoint expects " +
                            format_double(model.config.dt));
        }
    }
    EvalReport report = evaluate(sfmgnet_predictor(model, fc, c.rollout_options()), datasets, protocol,
                                 to_string(model.config.ablation));
    report.fingerprint = c.fingerprint();
    if (report.empty()) throw DataError("no segments: no agent has " + std::to_string(protocol.n) +
                                        " observed steps followed by the full horizon");
    const EvalReport cv = evaluate(constant_velocity_predictor(), datasets, protocol, "cv");

    std::vector<std::string> inputs{fs::absolute(ck).lexically_normal().string(), source};
    inputs.insert(inputs.end(), a.benchmark.begin(), a.benchmark.end());
    const fs::path dir = stamp_dir(o, "eval", c, inputs);
    const std::string grid = table_grid(report);
    write_text(dir / "grid.txt", grid);
    write_text(dir / "report.txt", report.to_text());
    write_text(dir / "report.json", report.to_json() + '\n');
    write_text(dir / "cv_report.json", cv.to_json() + '\n');
    write_run_log(dir, "eval", c, {{"checkpoint", ck.string()}, {"source", source}},
                  {{"ade", report.ade}, {"fde", report.fde}, {"near_collision_pct", report.near_collision_pct},
                   {"agent_segments", report.agent_segments}, {"cv_ade", cv.ade}, {"cv_fde", cv.fde}},
                  {"grid.txt", "report.txt", "report.json", "cv_report.json"});
    std::cout << grid;
    std::printf("pooled ADE/FDE %.4f/%.4f  near-collision %.3f%%  (CV %.4f/%.4f)\n", report.ade, report.fde,
                report.near_collision_pct, cv.ade, cv.fde);
    std::cout << dir.string() << '\n';
    return 0;
}

int cmd_ablate(const CommonOptions& o, const CommandOptions& a) {
    const RunConfig c = resolve_config(o);
    const fs::path root = synthetic_root(a.data);
    const SyntheticDataset data = read_synthetic(root);
    const TrainedModels trained =
        train_models(data, c, {Ablation::full, Ablation::abrpr, Ablation::abr, Ablation::att});
    std::array<ModelParams, 4> models;
    for (int i = 0; i < 4; ++i) models[static_cast<std::size_t>(i)] = trained.model(static_cast<Ablation>(i));

    const SyntheticDataset eval = evaluation_scenes(c, c.sfmg_params());
    const AblationReports reports =
        ablation_suite(models, eval.runs, c.feature_config(), c.eval_protocol(), c.rollout_options());
    const fs::path dir = stamp_dir(o, "ablate", c, {fs::absolute(root).lexically_normal().string()});
    ordered_json metrics = ordered_json::object();
    for (Ablation ab : {Ablation::att, Ablation::abr, Ablation::abrpr, Ablation::full}) {
        save_checkpoint(dir / "checkpoints" / to_string(ab), trained.model(ab));
        const auto& r = reports.of(ab);
        metrics[to_string(ab)] = {{"ade", r.ade}, {"fde", r.fde}, {"near_collision_pct", r.near_collision_pct}};
    }
    metrics["ordered"] = reports.ordered();
    metrics["modules"] = module_scores_json(trained);
    write_text(dir / "ablation.txt", reports.to_text());
    write_run_log(dir, "ablate", c, {{"data", root.string()}}, metrics, {"ablation.txt", "checkpoints"});
    std::cout << reports.to_text();
    std::cout << "ordering " << (reports.ordered() ? "holds" : "violated") << '\n' << dir.string() << '\n';
    return 0;
}

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", o.sets, "override one config key (key=value), repeatable");
    sub->add_option("--out", o.out, "parent directory for run-stamped outputs");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--ablation", o.ablation, "att, abr, abrpr or full");
    sub->add_option("--dt", o.dt, "sampling interval in seconds");
    sub->add_option("--window-n", o.window_n, "observation window length in steps");
    sub->add_option("--horizon-s", o.horizon_s, "prediction horizon in seconds");
    sub->add_option("--goal-source", o.goal_source, "auto, annotated or imm");
}

}  // namespace
}  // namespace sfmg

int main(int argc, char** argv) {
    using namespace sfmg;
    CLI::App app{"SFMGNet pedestrian workbench. Config keys may also be set through SFMG_<KEY> environment "
                 "variables (dots become underscores, e.g. SFMG_TRAIN_LR)."};
    app.require_subcommand(1);
    CommonOptions common;
    CommandOptions args;

    struct Entry {
        const char* name;
        const char* help;
        int (*fn)(const CommonOptions&, const CommandOptions&);
    };
    const Entry entries[] = {
        {"simulate", "simulate one scenario and dump trajectories and force components", cmd_simulate},
        {"gen", "generate the synthetic training corpus", cmd_gen},
        {"train", "train the modules and the recombination layer", cmd_train},
        {"predict", "roll out a checkpoint from one observed step", cmd_predict},
        {"eval", "evaluate a checkpoint (ADE, FDE, near-collision)", cmd_eval},
        {"ablate", "train and compare the four ablation settings", cmd_ablate},
    };
    std::map<CLI::App*, const Entry*> dispatch;
    for (const auto& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        add_common(sub, common);
        const std::string name = e.name;
        if (name == "simulate" || name == "predict") sub->add_option("--run", args.run, "scenario index");
        if (name == "train" || name == "ablate" || name == "predict" || name == "eval") {
            sub->add_option("--data", args.data, "gen output, dataset directory or trajectory file");
        }
        if (name == "predict" || name == "eval") {
            sub->add_option("--checkpoint", args.checkpoint, "train output or checkpoint directory");
            sub->add_option("--frame-rate", args.frame_rate, "frame_id counter rate of benchmark files");
        }
        if (name == "predict") sub->add_option("--step", args.step, "last observed step");
        if (name == "eval") sub->add_option("--benchmark", args.benchmark, "benchmark-format trajectory files");
        dispatch[sub] = &e;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        for (const auto& [sub, entry] : dispatch) {
            if (sub->parsed()) return entry->fn(common, args);
        }
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
}
