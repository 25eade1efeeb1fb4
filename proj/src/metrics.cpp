#include "sfmg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

namespace sfmg {

double ade(const Trajectory& pred, const Trajectory& truth) {
    if (pred.size() != truth.size()) {
        throw UsageError("ade: length mismatch (" + std::to_string(pred.size()) + " vs " +
                         std::to_string(truth.size()) + ")");
    }
    if (pred.empty()) throw UsageError("ade: empty trajectory");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred.samples[i].step != truth.samples[i].step) throw UsageError("ade: timesteps are not aligned");
        sum += distance(pred.samples[i].position, truth.samples[i].position);
    }
    return sum / static_cast<double>(pred.size());
}

double fde(const Trajectory& pred, const Trajectory& truth) {
    if (pred.empty() || truth.empty()) throw UsageError("fde: empty trajectory");
    return distance(pred.samples.back().position, truth.samples.back().position);
}

namespace {

bool has_close_pair(const std::vector<Vec2>& frame, double threshold) {
    for (std::size_t i = 0; i < frame.size(); ++i) {
        for (std::size_t j = i + 1; j < frame.size(); ++j) {
            if (distance(frame[i], frame[j]) < threshold) return true;
        }
    }
    return false;
}

}  // namespace

double near_collision_pct(const std::vector<std::vector<Vec2>>& frames, double threshold) {
    if (frames.empty()) return 0.0;
    const auto hits = std::count_if(frames.begin(), frames.end(),
                                    [&](const std::vector<Vec2>& f) { return has_close_pair(f, threshold); });
    return 100.0 * static_cast<double>(hits) / static_cast<double>(frames.size());
}

std::string EvalReport::to_text() const {
    std::ostringstream out;
    out << "label " << (label.empty() ? "-" : label) << '\n';
    out << "ade " << ade << '\n';
    out << "fde " << fde << '\n';
    out << "near_collision_pct " << near_collision_pct << '\n';
    out << "segments " << segments << '\n';
    out << "agent_segments " << agent_segments << '\n';
    out << "frames " << frames << '\n';
    if (!fingerprint.empty()) out << "fingerprint " << fingerprint << '\n';
    for (const auto& s : scenes) {
        out << "scene " << s.name << ' ' << s.ade << ' ' << s.fde << ' ' << s.agent_segments << '\n';
    }
    return out.str();
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["label"] = label;
    j["ade"] = ade;
    j["fde"] = fde;
    j["near_collision_pct"] = near_collision_pct;
    j["segments"] = segments;
    j["agent_segments"] = agent_segments;
    j["frames"] = frames;
    j["fingerprint"] = fingerprint;
    j["scenes"] = nlohmann::json::array();
    for (const auto& s : scenes) {
        j["scenes"].push_back({{"name", s.name}, {"ade", s.ade}, {"fde", s.fde}, {"agent_segments", s.agent_segments}});
    }
    return j.dump(2);
}

Predictor sfmgnet_predictor(const ModelParams& params, const FeatureConfig& features,
                            const RolloutOptions& options) {
    return [&params, features, options](const AnnotatedDataset&, const RolloutScene& scene, int steps) {
        RolloutOptions o = options;
        o.horizon_s = steps * scene.dt;
        return rollout(params, scene, features, o);
    };
}

Predictor constant_velocity_predictor() {
    return [](const AnnotatedDataset&, const RolloutScene& scene, int steps) {
        return constant_velocity(scene, steps);
    };
}

Predictor oracle_predictor() {
    return [](const AnnotatedDataset& data, const RolloutScene& scene, int steps) {
        std::vector<Trajectory> out;
        for (const auto& a : scene.agents) {
            const Trajectory* tr = data.find_trajectory(a.id);
            Trajectory t;
            t.agent_id = a.id;
            Vec2 last = a.history.back();
            for (int k = 1; k <= steps; ++k) {
                const int step = scene.start_step + k;
                if (tr != nullptr) {
                    if (auto p = tr->at(step)) last = *p;
                }
                t.samples.push_back({step, last});
            }
            out.push_back(std::move(t));
        }
        return out;
    };
}

namespace {

bool has_future(const Trajectory& tr, int t0, int steps) {
    for (int k = 1; k <= steps; ++k) {
        if (!tr.at(t0 + k)) return false;
    }
    return true;
}

Trajectory truth_segment(const Trajectory& tr, int t0, int steps) {
    Trajectory t;
    t.agent_id = tr.agent_id;
    for (int k = 1; k <= steps; ++k) t.samples.push_back({t0 + k, *tr.at(t0 + k)});
    return t;
}

}  // namespace

EvalReport evaluate(const Predictor& predictor, const std::vector<AnnotatedDataset>& datasets,
                    const EvalProtocol& protocol, const std::string& label) {
    if (protocol.n < 2) throw UsageError("evaluation window n must be at least 2");
    EvalReport report;
    report.label = label;
    double ade_sum = 0.0;
    double fde_sum = 0.0;
    std::size_t hit_frames = 0;

    for (const auto& data : datasets) {
        const int steps = horizon_steps(protocol.horizon_s, data.dt);
        int first = 0;
        int last = -1;
        bool any = false;
        for (const auto& tr : data.trajectories) {
            if (tr.empty()) continue;
            first = any ? std::min(first, tr.first_step()) : tr.first_step();
            last = any ? std::max(last, tr.last_step()) : tr.last_step();
            any = true;
        }
        if (!any) continue;

        SceneReport scene_report;
        scene_report.name = data.name;
        double scene_ade = 0.0;
        double scene_fde = 0.0;
        const int stride = protocol.sliding ? 1 : steps;
        for (int t0 = first + protocol.n; t0 + steps <= last; t0 += stride) {
            std::vector<const Trajectory*> scored;
            for (const auto& tr : data.trajectories) {
                if (frame_eligible(tr, t0, protocol.n) && has_future(tr, t0, steps)) scored.push_back(&tr);
            }
            if (scored.empty()) continue;
            const RolloutScene scene =
                scene_from_dataset(data, t0, std::max(protocol.max_history, protocol.n));
            const std::vector<Trajectory> pred = predictor(data, scene, steps);
            std::map<AgentId, const Trajectory*> by_id;
            for (const auto& p : pred) by_id[p.agent_id] = &p;

            std::vector<const Trajectory*> pred_scored;
            for (const Trajectory* tr : scored) {
                auto it = by_id.find(tr->agent_id);
                if (it == by_id.end()) throw InvariantError("predictor dropped agent " + std::to_string(tr->agent_id));
                const Trajectory truth = truth_segment(*tr, t0, steps);
                const double a = ade(*it->second, truth);
                const double f = fde(*it->second, truth);
                ade_sum += a;
                fde_sum += f;
                scene_ade += a;
                scene_fde += f;
                ++scene_report.agent_segments;
                pred_scored.push_back(it->second);
            }
            ++report.segments;
            if (pred_scored.size() >= 2) {
                std::vector<Vec2> frame;
                for (int k = 0; k < steps; ++k) {
                    frame.clear();
                    for (const Trajectory* p : pred_scored) frame.push_back(p->samples[static_cast<std::size_t>(k)].position);
                    if (has_close_pair(frame, protocol.collision_threshold)) ++hit_frames;
                }
                report.frames += static_cast<std::size_t>(steps);
            }
        }
        if (scene_report.agent_segments > 0) {
            scene_report.ade = scene_ade / static_cast<double>(scene_report.agent_segments);
            scene_report.fde = scene_fde / static_cast<double>(scene_report.agent_segments);
            report.agent_segments += scene_report.agent_segments;
            report.scenes.push_back(scene_report);
        }
    }
    if (report.agent_segments > 0) {
        report.ade = ade_sum / static_cast<double>(report.agent_segments);
        report.fde = fde_sum / static_cast<double>(report.agent_segments);
    }
    if (report.frames > 0) {
        report.near_collision_pct = 100.0 * static_cast<double>(hit_frames) / static_cast<double>(report.frames);
    }
    return report;
}

bool AblationReports::ordered() const {
    const double full = of(Ablation::full).ade;
    const double abrpr = of(Ablation::abrpr).ade;
    const double abr = of(Ablation::abr).ade;
    const double att = of(Ablation::att).ade;
    return full <= abrpr && abrpr <= abr && abr <= att;
}

std::string AblationReports::to_text() const {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof line, "%-8s %10s %10s %8s\n", "model", "ADE", "FDE", "nc%");
    out << line;
    for (Ablation a : {Ablation::att, Ablation::abr, Ablation::abrpr, Ablation::full}) {
        const EvalReport& r = of(a);
        std::snprintf(line, sizeof line, "%-8s %10.4f %10.4f %8.3f\n", to_string(a), r.ade, r.fde, r.near_collision_pct);
        out << line;
    }
    return out.str();
}

AblationReports ablation_suite(const std::array<ModelParams, 4>& models,
                               const std::vector<AnnotatedDataset>& datasets, const FeatureConfig& features,
                               const EvalProtocol& protocol, const RolloutOptions& options) {
    AblationReports out;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto expected = static_cast<Ablation>(i);
        if (models[i].config.ablation != expected) {
            throw UsageError(std::string("ablation suite expects the ") + to_string(expected) + " model in slot " +
                             std::to_string(i));
        }
        out.reports[i] = evaluate(sfmgnet_predictor(models[i], features, options), datasets, protocol,
                                  to_string(expected));
    }
    return out;
}

std::string table_grid(const EvalReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-24s %s\n", "Scene", "ADE/FDE (m)");
    out << line;
    for (const auto& s : report.scenes) {
        std::snprintf(line, sizeof line, "%-24s %.2f/%.2f\n", s.name.c_str(), s.ade, s.fde);
        out << line;
    }
    double ade_mean = 0.0;
    double fde_mean = 0.0;
    for (const auto& s : report.scenes) {
        ade_mean += s.ade / static_cast<double>(report.scenes.size());
        fde_mean += s.fde / static_cast<double>(report.scenes.size());
    }
    std::snprintf(line, sizeof line, "%-24s %.2f/%.2f\n", "Average", ade_mean, fde_mean);
    out << line;
    std::snprintf(line, sizeof line, "%-24s %.2f/%.2f  (published benchmark average, informational)\n",
                  "Reference", kReferenceAverageAde, kReferenceAverageFde);
    out << line;
    return out.str();
}

}  // namespace sfmg
