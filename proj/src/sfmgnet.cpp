#include "sfmg/sfmgnet.hpp"

#include <fstream>

#include <json.hpp>

namespace sfmg {

using nn::Activation;
using nn::Dense;

const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::att: return "att";
        case Ablation::abr: return "abr";
        case Ablation::abrpr: return "abrpr";
        case Ablation::full: return "full";
    }
    return "?";
}

Ablation parse_ablation(const std::string& s) {
    if (s == "att") return Ablation::att;
    if (s == "abr") return Ablation::abr;
    if (s == "abrpr") return Ablation::abrpr;
    if (s == "full") return Ablation::full;
    throw UsageError("unknown ablation '" + s + "' (expected att, abr, abrpr or full)");
}

AblationMask AblationMask::of(Ablation a) {
    switch (a) {
        case Ablation::att: return {false, false, false};
        case Ablation::abr: return {true, false, false};
        case Ablation::abrpr: return {true, true, false};
        case Ablation::full: return {true, true, true};
    }
    return {};
}

Net1Input net1_input(const FeatureFrame& frame) {
    const NormalizedWindow w = normalize_window(frame.window.positions, frame.window.n());
    Net1Input in;
    in.step_norms = w.step_norms;
    in.offsets.reserve(w.offsets.size() * 2);
    for (const auto& o : w.offsets) {
        in.offsets.push_back(o.x);
        in.offsets.push_back(o.y);
    }
    in.goal_dir = frame.goal_dir;
    return in;
}

Net2Input net2_input(const FeatureFrame& frame) {
    if (!frame.obstacle.present) return {};
    return {frame.obstacle.dist, frame.obstacle.eta};
}

Net3Input net3_input(const FeatureFrame& frame) { return {frame.neighbors, frame.goal_dir}; }

Net4Input net4_input(const FeatureFrame& frame) {
    return {frame.group.v_desired * frame.group.theta, frame.group.eta_centroid};
}

namespace {

std::array<double, 2> arr(const Vec2& v) { return {v.x, v.y}; }
Vec2 vec(const nn::Vector& v) { return {v[0], v[1]}; }

}  // namespace

// ---- net1 ------------------------------------------------------------------

Net1 Net1::create(int n, int width, std::mt19937_64& rng) {
    Net1 net;
    net.vd = Dense::create(n - 1, width, Activation::sigmoid, true, rng);
    net.vds = Dense::create(width, 1, Activation::identity, false, rng);
    net.vi = Dense::create(2 * n, width, Activation::tanh, true, rng);
    net.vis = Dense::create(width, 2, Activation::identity, false, rng);
    return net;
}

Vec2 Net1::forward(const Net1Input& in, Cache& cache) const {
    nn::forward_into(vd, in.step_norms, cache.vd);
    nn::forward_into(vds, cache.vd.output, cache.vds);
    nn::forward_into(vi, in.offsets, cache.vi);
    nn::forward_into(vis, cache.vi.output, cache.vis);
    return in.goal_dir * cache.vds.output[0] - vec(cache.vis.output);
}

Vec2 Net1::forward(const Net1Input& in) const {
    Cache cache;
    return forward(in, cache);
}

void Net1::backward(const Net1Input& in, const Cache& cache, const Vec2& upstream, Net1& sink) const {
    nn::Vector g;
    const std::array<double, 1> g_speed{upstream.dot(in.goal_dir)};
    nn::backward_into(vds, cache.vds, g_speed, sink.vds, g);
    nn::Vector unused;
    nn::backward_into(vd, cache.vd, g, sink.vd, unused);
    const auto g_vel = arr(-upstream);
    nn::backward_into(vis, cache.vis, g_vel, sink.vis, g);
    nn::backward_into(vi, cache.vi, g, sink.vi, unused);
}

Net1 Net1::zeros_like() const { return {vd.zeros_like(), vds.zeros_like(), vi.zeros_like(), vis.zeros_like()}; }

void Net1::collect(nn::ParamList& out, const std::string& prefix) {
    nn::collect(vd, prefix + ".W_vd", out);
    nn::collect(vds, prefix + ".W_vds", out);
    nn::collect(vi, prefix + ".W_vi", out);
    nn::collect(vis, prefix + ".W_vis", out);
}

// ---- net2 ------------------------------------------------------------------

Net2 Net2::create(int width, std::mt19937_64& rng) {
    Net2 net;
    net.range.scale = nn::Matrix(1, 1, -1.0);
    net.range.sign = 1.0;
    net.u = Dense::create(2, width, Activation::sigmoid, true, rng);
    net.fb = Dense::create(width, 2, Activation::identity, true, rng);
    return net;
}

Vec2 Net2::forward(const Net2Input& in, Cache& cache) const {
    cache.e = range.forward(in.dist);
    const auto x = arr(in.eta * cache.e);
    nn::forward_into(u, x, cache.u);
    nn::forward_into(fb, cache.u.output, cache.fb);
    return vec(cache.fb.output);
}

Vec2 Net2::forward(const Net2Input& in) const {
    Cache cache;
    return forward(in, cache);
}

void Net2::backward(const Net2Input& in, const Cache& cache, const Vec2& upstream, Net2& sink) const {
    nn::Vector g;
    nn::Vector gx;
    nn::backward_into(fb, cache.fb, arr(upstream), sink.fb, g);
    nn::backward_into(u, cache.u, g, sink.u, gx);
    const double g_e = gx[0] * in.eta.x + gx[1] * in.eta.y;
    range.backward_into(in.dist, cache.e, g_e, sink.range);
}

Net2 Net2::zeros_like() const { return {range.zeros_like(), u.zeros_like(), fb.zeros_like()}; }

void Net2::collect(nn::ParamList& out, const std::string& prefix) {
    out.emplace_back(prefix + ".W_R", &range.scale);
    nn::collect(u, prefix + ".W_U", out);
    nn::collect(fb, prefix + ".W_fB", out);
}

// ---- net3 ------------------------------------------------------------------

Net3Instance Net3Instance::create(int width, std::mt19937_64& rng) {
    Net3Instance net;
    net.range1.scale = nn::Matrix(1, 1, -1.0);
    net.range1.sign = 1.0;
    net.range2.scale = nn::Matrix(1, 1, 1.0);
    net.range2.sign = -1.0;
    net.a1 = Dense::create(2, width, Activation::relu, true, rng);
    net.a2 = Dense::create(2, width, Activation::relu, true, rng);
    net.out = Dense::create(width, 2, Activation::identity, true, rng);
    return net;
}

Vec2 Net3Instance::forward(const NeighborFeature& nb, const Vec2& goal_dir, Cache& cache) const {
    cache.e1 = range1.forward(nb.dist);
    cache.e2 = range2.forward(nb.dist);
    cache.projection = -nb.eta.dot(goal_dir);
    nn::forward_into(a1, arr(nb.eta * cache.e1), cache.a1);
    nn::forward_into(a2, arr(nb.eta * (cache.projection * cache.e2)), cache.a2);
    std::array<double, 64> hidden{};
    const auto w = cache.a1.output.size();
    if (w > hidden.size()) throw UsageError("net3 hidden width above 64 is not supported");
    for (std::size_t k = 0; k < w; ++k) hidden[k] = cache.a1.output[k] + cache.a2.output[k];
    nn::forward_into(out, std::span<const double>(hidden.data(), w), cache.out);
    return vec(cache.out.output);
}

void Net3Instance::backward(const NeighborFeature& nb, const Cache& cache, const Vec2& upstream,
                            Net3Instance& sink) const {
    nn::Vector g;
    nn::Vector gx;
    nn::backward_into(out, cache.out, arr(upstream), sink.out, g);
    nn::backward_into(a1, cache.a1, g, sink.a1, gx);
    range1.backward_into(nb.dist, cache.e1, gx[0] * nb.eta.x + gx[1] * nb.eta.y, sink.range1);
    nn::backward_into(a2, cache.a2, g, sink.a2, gx);
    range2.backward_into(nb.dist, cache.e2, cache.projection * (gx[0] * nb.eta.x + gx[1] * nb.eta.y),
                         sink.range2);
}

Net3Instance Net3Instance::zeros_like() const {
    return {range1.zeros_like(), range2.zeros_like(), a1.zeros_like(), a2.zeros_like(), out.zeros_like()};
}

void Net3Instance::collect(nn::ParamList& out_list, const std::string& prefix) {
    out_list.emplace_back(prefix + ".W_sigma", &range1.scale);
    out_list.emplace_back(prefix + ".W_sigma2", &range2.scale);
    nn::collect(a1, prefix + ".W_A1", out_list);
    nn::collect(a2, prefix + ".W_A2", out_list);
    nn::collect(out, prefix + ".W_ab", out_list);
}

Net3 Net3::create(int width, int aggregator_width, std::mt19937_64& rng) {
    Net3 net;
    for (auto& inst : net.instances) inst = Net3Instance::create(width, rng);
    net.agg_hidden = Dense::create(2 * kNeighborSlots, aggregator_width, Activation::relu, true, rng);
    net.agg_out = Dense::create(aggregator_width, 2, Activation::identity, true, rng);
    return net;
}

Vec2 Net3::forward(const Net3Input& in, Cache& cache) const {
    std::array<double, 2 * kNeighborSlots> z{};
    for (int i = 0; i < kNeighborSlots; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const Vec2 y = instances[iu].forward(in.neighbors[iu], in.goal_dir, cache.instances[iu]);
        z[2 * iu] = y.x;
        z[2 * iu + 1] = y.y;
    }
    nn::forward_into(agg_hidden, z, cache.agg_hidden);
    nn::forward_into(agg_out, cache.agg_hidden.output, cache.agg_out);
    return vec(cache.agg_out.output);
}

Vec2 Net3::forward(const Net3Input& in) const {
    Cache cache;
    return forward(in, cache);
}

void Net3::backward(const Net3Input& in, const Cache& cache, const Vec2& upstream, Net3& sink) const {
    nn::Vector g;
    nn::Vector gz;
    nn::backward_into(agg_out, cache.agg_out, arr(upstream), sink.agg_out, g);
    nn::backward_into(agg_hidden, cache.agg_hidden, g, sink.agg_hidden, gz);
    for (int i = 0; i < kNeighborSlots; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const Vec2 gi{gz[2 * iu], gz[2 * iu + 1]};
        if (gi.x == 0.0 && gi.y == 0.0) continue;
        instances[iu].backward(in.neighbors[iu], cache.instances[iu], gi, sink.instances[iu]);
    }
}

Net3 Net3::zeros_like() const {
    Net3 z;
    for (std::size_t i = 0; i < instances.size(); ++i) z.instances[i] = instances[i].zeros_like();
    z.agg_hidden = agg_hidden.zeros_like();
    z.agg_out = agg_out.zeros_like();
    return z;
}

void Net3::collect(nn::ParamList& out, const std::string& prefix) {
    for (std::size_t i = 0; i < instances.size(); ++i) {
        instances[i].collect(out, prefix + "_" + std::to_string(i + 1));
    }
    nn::collect(agg_hidden, prefix + ".aggregator.hidden", out);
    nn::collect(agg_out, prefix + ".aggregator.out", out);
}

// ---- net4 ------------------------------------------------------------------

Net4 Net4::create(int width, std::mt19937_64& rng) {
    Net4 net;
    net.g1 = Dense::create(2, width, Activation::relu, true, rng);
    net.g2 = Dense::create(2, width, Activation::relu, true, rng);
    net.G = Dense::create(width, 2, Activation::identity, true, rng);
    return net;
}

Vec2 Net4::forward(const Net4Input& in, Cache& cache) const {
    nn::forward_into(g1, arr(in.theta_v), cache.g1);
    nn::forward_into(g2, arr(in.eta_centroid), cache.g2);
    std::array<double, 64> hidden{};
    const auto w = cache.g1.output.size();
    if (w > hidden.size()) throw UsageError("net4 hidden width above 64 is not supported");
    for (std::size_t k = 0; k < w; ++k) hidden[k] = cache.g1.output[k] + cache.g2.output[k];
    nn::forward_into(G, std::span<const double>(hidden.data(), w), cache.G);
    return vec(cache.G.output);
}

Vec2 Net4::forward(const Net4Input& in) const {
    Cache cache;
    return forward(in, cache);
}

void Net4::backward(const Net4Input&, const Cache& cache, const Vec2& upstream, Net4& sink) const {
    nn::Vector g;
    nn::Vector unused;
    nn::backward_into(G, cache.G, arr(upstream), sink.G, g);
    nn::backward_into(g1, cache.g1, g, sink.g1, unused);
    nn::backward_into(g2, cache.g2, g, sink.g2, unused);
}

Net4 Net4::zeros_like() const { return {g1.zeros_like(), g2.zeros_like(), G.zeros_like()}; }

void Net4::collect(nn::ParamList& out, const std::string& prefix) {
    nn::collect(g1, prefix + ".W_g1", out);
    nn::collect(g2, prefix + ".W_g2", out);
    nn::collect(G, prefix + ".W_G", out);
}

// ---- recombination -----------------------------------------------------------

Recombination Recombination::create(int width, std::mt19937_64& rng) {
    Recombination net;
    net.in_layer = Dense::create(2, width, Activation::relu, true, rng);
    net.out_layer = Dense::create(width, 2, Activation::identity, true, rng);
    return net;
}

Vec2 Recombination::forward(const Vec2& force_sum, Cache& cache) const {
    nn::forward_into(in_layer, arr(force_sum), cache.in_layer);
    nn::forward_into(out_layer, cache.in_layer.output, cache.out_layer);
    return vec(cache.out_layer.output);
}

Vec2 Recombination::forward(const Vec2& force_sum) const {
    Cache cache;
    return forward(force_sum, cache);
}

void Recombination::backward(const Cache& cache, const Vec2& upstream, Recombination& sink) const {
    nn::Vector g;
    nn::Vector unused;
    nn::backward_into(out_layer, cache.out_layer, arr(upstream), sink.out_layer, g);
    nn::backward_into(in_layer, cache.in_layer, g, sink.in_layer, unused);
}

Recombination Recombination::zeros_like() const { return {in_layer.zeros_like(), out_layer.zeros_like()}; }

void Recombination::collect(nn::ParamList& out, const std::string& prefix) {
    nn::collect(in_layer, prefix + ".W_IF", out);
    nn::collect(out_layer, prefix + ".W_FF", out);
}

// ---- model -------------------------------------------------------------------

void ModelConfig::validate() const {
    if (n < 2) throw UsageError("model window n must be at least 2");
    if (!(dt > 0.0)) throw UsageError("model dt must be positive");
    for (int w : {widths.net1, widths.net2, widths.net3, widths.net3_aggregator, widths.net4, widths.recombination}) {
        if (w < 1 || w > 64) throw UsageError("hidden widths must lie in [1, 64]");
    }
}

ModelParams ModelParams::create(const ModelConfig& config) {
    config.validate();
    ModelParams p;
    p.config = config;
    std::mt19937_64 rng(config.seed);
    p.net1 = Net1::create(config.n, config.widths.net1, rng);
    p.net2 = Net2::create(config.widths.net2, rng);
    p.net3 = Net3::create(config.widths.net3, config.widths.net3_aggregator, rng);
    p.net4 = Net4::create(config.widths.net4, rng);
    p.recombination = Recombination::create(config.widths.recombination, rng);
    return p;
}

Vec2 ModelParams::net1_force(const FeatureFrame& frame) const { return net1.forward(net1_input(frame)); }

Vec2 ModelParams::net2_force(const FeatureFrame& frame) const {
    return net2.forward(net2_input(frame)) - baseline_net2;
}

Vec2 ModelParams::net3_force(const FeatureFrame& frame) const {
    return net3.forward(net3_input(frame)) - baseline_net3;
}

Vec2 ModelParams::net4_force(const FeatureFrame& frame) const {
    return net4.forward(net4_input(frame)) - baseline_net4;
}

void ModelParams::update_baselines() {
    baseline_net2 = net2.forward(Net2Input{});
    baseline_net3 = net3.forward(Net3Input{});
    baseline_net4 = net4.forward(Net4Input{});
}

nn::ParamList ModelParams::params() {
    nn::ParamList out;
    net1.collect(out, "net1");
    net2.collect(out, "net2");
    net3.collect(out, "net3");
    net4.collect(out, "net4");
    recombination.collect(out, "recombination");
    return out;
}

nn::ConstParamList ModelParams::params() const {
    nn::ParamList mutable_list = const_cast<ModelParams*>(this)->params();
    nn::ConstParamList out;
    for (const auto& [name, m] : mutable_list) out.emplace_back(name, m);
    return out;
}

Vec2 masked_sum(const ForceBreakdown& modules, const AblationMask& mask) {
    Vec2 s = modules.acceleration;
    if (mask.obstacle) s += modules.obstacle;
    if (mask.pedestrians) s += modules.pedestrians;
    if (mask.group) s += modules.group;
    return s;
}

ForceBreakdown total_force_forward(const FeatureFrame& frame, const ModelParams& params) {
    const AblationMask mask = params.mask();
    ForceBreakdown f;
    f.acceleration = params.net1_force(frame);
    if (mask.obstacle) f.obstacle = params.net2_force(frame);
    if (mask.pedestrians) f.pedestrians = params.net3_force(frame);
    if (mask.group) f.group = params.net4_force(frame);
    f.total = params.recombination.forward(masked_sum(f, mask));
    return f;
}

// ---- checkpoints ---------------------------------------------------------------

namespace {

nlohmann::json vec_json(const Vec2& v) { return nlohmann::json::array({v.x, v.y}); }

Vec2 json_vec(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "weights.txt");
        if (!out) throw DataError("cannot write " + (dir / "weights.txt").string());
        nn::write_weights(out, params.params());
    }
    const auto& c = params.config;
    nlohmann::json m;
    m["format"] = "sfmgnet-checkpoint";
    m["version"] = 1;
    m["n"] = c.n;
    m["dt"] = c.dt;
    m["ablation"] = to_string(c.ablation);
    m["seed"] = c.seed;
    m["widths"] = {{"net1", c.widths.net1},
                   {"net2", c.widths.net2},
                   {"net3", c.widths.net3},
                   {"net3_aggregator", c.widths.net3_aggregator},
                   {"net4", c.widths.net4},
                   {"recombination", c.widths.recombination}};
    m["baselines"] = {{"net2", vec_json(params.baseline_net2)},
                      {"net3", vec_json(params.baseline_net3)},
                      {"net4", vec_json(params.baseline_net4)}};
    m["data_fingerprint"] = params.data_fingerprint;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
    out << m.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw DataError("missing checkpoint manifest " + (dir / "manifest.json").string());
    nlohmann::json m;
    try {
        mf >> m;
        if (m.at("format") != "sfmgnet-checkpoint") throw DataError("not an SFMGNet checkpoint: " + dir.string());
        if (m.at("version") != 1) throw DataError("unsupported checkpoint version in " + dir.string());
        ModelConfig c;
        c.n = m.at("n").get<int>();
        c.dt = m.at("dt").get<double>();
        c.ablation = parse_ablation(m.at("ablation").get<std::string>());
        c.seed = m.at("seed").get<std::uint64_t>();
        const auto& w = m.at("widths");
        c.widths = {w.at("net1").get<int>(), w.at("net2").get<int>(), w.at("net3").get<int>(),
                    w.at("net3_aggregator").get<int>(), w.at("net4").get<int>(), w.at("recombination").get<int>()};
        ModelParams p = ModelParams::create(c);
        std::ifstream wf(dir / "weights.txt");
        if (!wf) throw DataError("missing checkpoint weights " + (dir / "weights.txt").string());
        nn::assign_weights(nn::read_weights(wf), p.params());
        const auto& b = m.at("baselines");
        p.baseline_net2 = json_vec(b.at("net2"));
        p.baseline_net3 = json_vec(b.at("net3"));
        p.baseline_net4 = json_vec(b.at("net4"));
        p.data_fingerprint = m.value("data_fingerprint", "");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed checkpoint manifest " + dir.string() + ": " + e.what());
    }
}

}  // namespace sfmg
