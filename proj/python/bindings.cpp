#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sfmg/pipeline.hpp"

namespace py = pybind11;
using namespace sfmg;

namespace {

using Point = std::pair<double, double>;

Vec2 to_vec(const Point& p) { return {p.first, p.second}; }
Point to_point(const Vec2& v) { return {v.x, v.y}; }

Trajectory to_trajectory(const std::vector<Point>& points) {
    Trajectory t;
    for (std::size_t i = 0; i < points.size(); ++i) t.samples.push_back({static_cast<int>(i), to_vec(points[i])});
    return t;
}

py::dict breakdown_dict(const ForceBreakdown& f) {
    py::dict d;
    d["acceleration"] = to_point(f.acceleration);
    d["obstacle"] = to_point(f.obstacle);
    d["pedestrians"] = to_point(f.pedestrians);
    d["group"] = to_point(f.group);
    d["total"] = to_point(f.total);
    return d;
}

py::dict report_dict(const EvalReport& r) {
    py::dict d;
    d["label"] = r.label;
    d["ade"] = r.ade;
    d["fde"] = r.fde;
    d["near_collision_pct"] = r.near_collision_pct;
    d["segments"] = r.segments;
    d["agent_segments"] = r.agent_segments;
    d["frames"] = r.frames;
    return d;
}

PedestrianState make_state(int id, const Point& position, const Point& velocity, const Point& goal,
                           double desired_speed) {
    PedestrianState s;
    s.id = static_cast<AgentId>(id);
    s.position = to_vec(position);
    s.velocity = to_vec(velocity);
    s.goal = to_vec(goal);
    s.desired_speed = desired_speed;
    return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SFMGNet pedestrian workbench: group social forces, SFMGNet training and evaluation";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<InvariantError>(m, "InvariantError", PyExc_RuntimeError);

    py::class_<SfmgParams>(m, "SfmgParams")
        .def(py::init<>())
        .def_readwrite("tau", &SfmgParams::tau)
        .def_readwrite("V0", &SfmgParams::V0)
        .def_readwrite("sigma", &SfmgParams::sigma)
        .def_readwrite("U0", &SfmgParams::U0)
        .def_readwrite("R", &SfmgParams::R)
        .def_readwrite("lambda_", &SfmgParams::lambda)
        .def_readwrite("S_vis", &SfmgParams::S_vis)
        .def_readwrite("S_att", &SfmgParams::S_att)
        .def_readwrite("d_coh", &SfmgParams::d_coh)
        .def_readwrite("noise_std", &SfmgParams::noise_std)
        .def_readwrite("max_speed_factor", &SfmgParams::max_speed_factor)
        .def_readwrite("goal_radius", &SfmgParams::goal_radius)
        .def_property(
            "fov_half_angle", [](const SfmgParams& p) { return p.fov.half_angle; },
            [](SfmgParams& p, double v) { p.fov.half_angle = v; })
        .def("validate", &SfmgParams::validate);

    m.def(
        "acceleration_force",
        [](const Point& position, const Point& velocity, const Point& goal, double desired_speed,
           const SfmgParams& p) {
            return to_point(acceleration_force(make_state(0, position, velocity, goal, desired_speed), p));
        },
        py::arg("position"), py::arg("velocity"), py::arg("goal"), py::arg("desired_speed"), py::arg("params"));

    m.def(
        "pedestrian_force",
        [](const Point& alpha_pos, const Point& alpha_vel, const Point& alpha_goal, const Point& beta_pos,
           const SfmgParams& p) {
            const PedestrianState a = make_state(0, alpha_pos, alpha_vel, alpha_goal, 1.34);
            const PedestrianState b = make_state(1, beta_pos, {0.0, 0.0}, beta_pos, 1.34);
            return to_point(pedestrian_force(a, b, p));
        },
        py::arg("alpha_position"), py::arg("alpha_velocity"), py::arg("alpha_goal"), py::arg("beta_position"),
        py::arg("params"));

    m.def(
        "obstacle_force",
        [](const Point& position, const std::vector<std::vector<Point>>& polylines, const SfmgParams& p) {
            std::vector<Obstacle> obs;
            for (const auto& line : polylines) {
                Obstacle o;
                for (const auto& q : line) o.polyline.push_back(to_vec(q));
                obs.push_back(std::move(o));
            }
            return to_point(obstacle_force(make_state(0, position, {}, position, 1.34), obs, p));
        },
        py::arg("position"), py::arg("polylines"), py::arg("params"));

    m.def("anisotropy", &anisotropy, py::arg("lambda_"), py::arg("cos_phi"));

    m.def(
        "ade", [](const std::vector<Point>& p, const std::vector<Point>& t) { return ade(to_trajectory(p), to_trajectory(t)); },
        py::arg("predicted"), py::arg("truth"));
    m.def(
        "fde", [](const std::vector<Point>& p, const std::vector<Point>& t) { return fde(to_trajectory(p), to_trajectory(t)); },
        py::arg("predicted"), py::arg("truth"));
    m.def(
        "near_collision_pct",
        [](const std::vector<std::vector<Point>>& frames, double threshold) {
            std::vector<std::vector<Vec2>> f;
            for (const auto& frame : frames) {
                std::vector<Vec2> v;
                for (const auto& p : frame) v.push_back(to_vec(p));
                f.push_back(std::move(v));
            }
            return near_collision_pct(f, threshold);
        },
        py::arg("frames"), py::arg("threshold") = 0.1);

    m.def(
        "estimate_goal_direction",
        [](const std::vector<Point>& positions, double dt) {
            ObservationWindow w;
            w.dt = dt;
            for (const auto& p : positions) w.positions.push_back(to_vec(p));
            return to_point(estimate_goal(w).direction);
        },
        py::arg("positions"), py::arg("dt"),
        "Goal direction (unit vector) of the most probable IMM hypothesis.");

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def("set", &RunConfig::set)
        .def("get", &RunConfig::get)
        .def("load_file", [](RunConfig& c, const std::filesystem::path& p) { c.load_file(p); })
        .def("fingerprint", &RunConfig::fingerprint)
        .def("canonical", &RunConfig::canonical)
        .def("values", &RunConfig::values)
        .def_static("keys", &RunConfig::keys);

    py::class_<AnnotatedDataset>(m, "Scene")
        .def_readonly("name", &AnnotatedDataset::name)
        .def_readonly("dt", &AnnotatedDataset::dt)
        .def("agents", [](const AnnotatedDataset& d) {
            std::vector<AgentId> ids;
            for (const auto& t : d.trajectories) ids.push_back(t.agent_id);
            return ids;
        })
        .def("trajectory", [](const AnnotatedDataset& d, AgentId id) {
            const Trajectory* t = d.find_trajectory(id);
            if (t == nullptr) throw DataError("unknown agent " + std::to_string(id));
            std::vector<std::pair<int, Point>> out;
            for (const auto& s : t->samples) out.push_back({s.step, to_point(s.position)});
            return out;
        })
        .def("force", [](const AnnotatedDataset& d, AgentId id, int step) -> py::object {
            const ForceRecord* r = d.find_force(id, step);
            if (r == nullptr) return py::none();
            return breakdown_dict(r->forces);
        });

    py::class_<SyntheticDataset>(m, "SyntheticDataset")
        .def("__len__", [](const SyntheticDataset& d) { return d.runs.size(); })
        .def("__getitem__", [](const SyntheticDataset& d, std::size_t i) {
            if (i >= d.runs.size()) throw py::index_error();
            return d.runs[i];
        });

    m.def(
        "generate", [](const RunConfig& c) { return generate_synthetic(c.synthetic_config(), c.sfmg_params()); },
        py::arg("config"), "Synthetic crossing-passageway runs for the configured seed.");
    m.def(
        "evaluation_scenes", [](const RunConfig& c) { return evaluation_scenes(c, c.sfmg_params()); },
        py::arg("config"));
    m.def("write_synthetic", [](const std::filesystem::path& dir, const SyntheticDataset& d, const RunConfig& c) {
        write_synthetic(dir, d, c.synthetic_config());
    });
    m.def("read_synthetic", [](const std::filesystem::path& dir) { return read_synthetic(dir); });

    py::class_<ModelParams>(m, "Model")
        .def_property_readonly("ablation", [](const ModelParams& p) { return std::string(to_string(p.config.ablation)); })
        .def_property_readonly("n", [](const ModelParams& p) { return p.config.n; })
        .def_property_readonly("dt", [](const ModelParams& p) { return p.config.dt; });

    m.def("save_checkpoint", [](const std::filesystem::path& dir, const ModelParams& p) { save_checkpoint(dir, p); });
    m.def("load_checkpoint", [](const std::filesystem::path& dir) { return load_checkpoint(dir); });

    m.def(
        "train",
        [](const SyntheticDataset& data, const RunConfig& c, const std::vector<std::string>& ablations) {
            std::vector<Ablation> abl;
            for (const auto& a : ablations) abl.push_back(parse_ablation(a));
            TrainedModels t;
            {
                py::gil_scoped_release release;
                t = train_models(data, c, abl);
            }
            py::dict models;
            for (const auto a : abl) models[to_string(a)] = t.model(a);
            py::dict mse;
            mse["net1"] = t.test_mse.net1;
            mse["net2"] = t.test_mse.net2;
            mse["net3"] = t.test_mse.net3;
            mse["net4"] = t.test_mse.net4;
            mse["full"] = t.test_mse.full;
            return py::make_tuple(models, mse);
        },
        py::arg("data"), py::arg("config"), py::arg("ablations") = std::vector<std::string>{"full"},
        "Trains the modules once and one recombination per ablation; returns (models, test MSEs).");

    m.def(
        "evaluate",
        [](const ModelParams& model, const SyntheticDataset& data, const RunConfig& c) {
            const EvalReport r = evaluate(sfmgnet_predictor(model, c.feature_config(), c.rollout_options()), data.runs,
                                          c.eval_protocol(), to_string(model.config.ablation));
            return report_dict(r);
        },
        py::arg("model"), py::arg("data"), py::arg("config"));

    m.def(
        "evaluate_constant_velocity",
        [](const SyntheticDataset& data, const RunConfig& c) {
            return report_dict(evaluate(constant_velocity_predictor(), data.runs, c.eval_protocol(), "cv"));
        },
        py::arg("data"), py::arg("config"));

    m.def(
        "rollout",
        [](const ModelParams& model, const AnnotatedDataset& scene_data, int step, const RunConfig& c) {
            const RolloutScene scene = scene_from_dataset(scene_data, step, std::max(c.eval_protocol().max_history, model.config.n));
            FeatureConfig fc = c.feature_config();
            fc.n = model.config.n;
            const auto pred = rollout(model, scene, fc, c.rollout_options());
            py::dict out;
            for (const auto& t : pred) {
                std::vector<Point> pts;
                for (const auto& s : t.samples) pts.push_back(to_point(s.position));
                out[py::int_(t.agent_id)] = pts;
            }
            return out;
        },
        py::arg("model"), py::arg("scene"), py::arg("step"), py::arg("config"));
}
