#include "sfmg/tinynn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace sfmg::nn {

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), fill) {
    if (rows < 0 || cols < 0) throw UsageError("negative matrix dimension");
}

Matrix Matrix::uniform(int rows, int cols, double lo, double hi, std::mt19937_64& rng) {
    Matrix m(rows, cols);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : m.data_) v = dist(rng);
    return m;
}

void Matrix::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
    }
    return "?";
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

double activate(Activation a, double z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::sigmoid: return sigmoid(z);
        case Activation::tanh: return std::tanh(z);
        case Activation::relu: return z > 0.0 ? z : 0.0;
    }
    return z;
}

// Derivative expressed through the pre-activation z and output y.
double activate_grad(Activation a, double z, double y) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::tanh: return 1.0 - y * y;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

}  // namespace

Dense Dense::create(int in, int out, Activation act, bool with_bias, std::mt19937_64& rng,
                    double init_range) {
    Dense d;
    d.weights = Matrix::uniform(out, in, -init_range, init_range, rng);
    if (with_bias) d.bias = Matrix::uniform(1, out, -init_range, init_range, rng);
    d.activation = act;
    return d;
}

Dense Dense::zeros_like() const {
    Dense d;
    d.weights = Matrix(weights.rows(), weights.cols());
    if (has_bias()) d.bias = Matrix(1, bias.cols());
    d.activation = activation;
    return d;
}

void forward_into(const Dense& layer, std::span<const double> input, DenseCache& cache) {
    const int in = layer.in_dim();
    const int out = layer.out_dim();
    if (static_cast<int>(input.size()) != in) {
        throw UsageError("dense forward: expected input of size " + std::to_string(in) + ", got " +
                         std::to_string(input.size()));
    }
    cache.input.assign(input.begin(), input.end());
    cache.pre_activation.resize(static_cast<std::size_t>(out));
    cache.output.resize(static_cast<std::size_t>(out));
    const double* w = layer.weights.values().data();
    for (int r = 0; r < out; ++r) {
        double z = layer.has_bias() ? layer.bias[static_cast<std::size_t>(r)] : 0.0;
        const double* row = w + static_cast<std::ptrdiff_t>(r) * in;
        for (int c = 0; c < in; ++c) z += row[c] * cache.input[static_cast<std::size_t>(c)];
        cache.pre_activation[static_cast<std::size_t>(r)] = z;
        cache.output[static_cast<std::size_t>(r)] = activate(layer.activation, z);
    }
}

std::pair<Vector, DenseCache> forward(const Dense& layer, std::span<const double> input) {
    DenseCache cache;
    forward_into(layer, input, cache);
    Vector y = cache.output;
    return {std::move(y), std::move(cache)};
}

void backward_into(const Dense& layer, const DenseCache& cache, std::span<const double> upstream,
                   Dense& sink, Vector& input_grad) {
    const int in = layer.in_dim();
    const int out = layer.out_dim();
    if (static_cast<int>(upstream.size()) != out || static_cast<int>(cache.input.size()) != in) {
        throw UsageError("dense backward: shape mismatch");
    }
    input_grad.assign(static_cast<std::size_t>(in), 0.0);
    const double* w = layer.weights.values().data();
    double* gw = sink.weights.values().data();
    for (int r = 0; r < out; ++r) {
        const auto ru = static_cast<std::size_t>(r);
        const double dz = upstream[ru] * activate_grad(layer.activation, cache.pre_activation[ru], cache.output[ru]);
        if (dz == 0.0) continue;
        if (layer.has_bias()) sink.bias[ru] += dz;
        const double* row = w + static_cast<std::ptrdiff_t>(r) * in;
        double* grow = gw + static_cast<std::ptrdiff_t>(r) * in;
        for (int c = 0; c < in; ++c) {
            grow[c] += dz * cache.input[static_cast<std::size_t>(c)];
            input_grad[static_cast<std::size_t>(c)] += dz * row[c];
        }
    }
}

Vector backward_into(const Dense& layer, const DenseCache& cache, std::span<const double> upstream,
                     Dense& sink) {
    Vector input_grad;
    backward_into(layer, cache, upstream, sink, input_grad);
    return input_grad;
}

DenseGrads backward(const Dense& layer, const DenseCache& cache, std::span<const double> upstream) {
    Dense sink = layer.zeros_like();
    DenseGrads g;
    g.input_grad = backward_into(layer, cache, upstream, sink);
    g.weight_grad = std::move(sink.weights);
    g.bias_grad = std::move(sink.bias);
    return g;
}

double ExpUnit::forward(double d) const {
    const double w = scale[0];
    const double w_eff = std::abs(w) >= min_abs_scale ? w : std::copysign(min_abs_scale, w);
    return std::exp(std::min(sign * d / w_eff, max_exponent));
}

void ExpUnit::backward_into(double d, double output, double upstream, ExpUnit& sink) const {
    const double w = scale[0];
    if (std::abs(w) < min_abs_scale) return;  // clamped: flat in w
    if (sign * d / w > max_exponent) return;
    sink.scale[0] += upstream * output * (-sign * d / (w * w));
}

ExpUnit ExpUnit::zeros_like() const {
    ExpUnit e;
    e.scale = Matrix(1, 1, 0.0);
    e.sign = sign;
    return e;
}

void collect(Dense& layer, const std::string& name, ParamList& out) {
    out.emplace_back(name + ".weight", &layer.weights);
    if (layer.has_bias()) out.emplace_back(name + ".bias", &layer.bias);
}

void collect(const Dense& layer, const std::string& name, ConstParamList& out) {
    out.emplace_back(name + ".weight", &layer.weights);
    if (layer.has_bias()) out.emplace_back(name + ".bias", &layer.bias);
}

void adam_update(AdamState& state, std::span<Matrix* const> params,
                 std::span<const Matrix* const> grads) {
    if (params.size() != grads.size()) throw UsageError("adam: parameter/gradient count mismatch");
    if (state.m.empty()) {
        for (const Matrix* p : params) {
            state.m.emplace_back(p->rows(), p->cols());
            state.v.emplace_back(p->rows(), p->cols());
        }
    }
    if (state.m.size() != params.size()) throw UsageError("adam: state does not match parameters");
    ++state.t;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        const Matrix& g = *grads[k];
        if (!p.same_shape(g) || !p.same_shape(state.m[k])) throw UsageError("adam: shape mismatch");
        Matrix& m = state.m[k];
        Matrix& v = state.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

GradCheckResult grad_check(const ParamList& params, const std::function<double()>& loss,
                           const std::function<std::vector<Matrix>()>& analytic, double h) {
    const std::vector<Matrix> grads = analytic();
    if (grads.size() != params.size()) throw UsageError("grad_check: gradient count mismatch");
    GradCheckResult result;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k].second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + h;
            const double up = loss();
            p[i] = saved - h;
            const double down = loss();
            p[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = grads[k][i];
            const double scale = std::max({std::abs(a), std::abs(numeric), 1e-4});
            const double rel = std::abs(a - numeric) / scale;
            if (rel > result.max_relative_error) {
                result.max_relative_error = rel;
                result.worst_param = params[k].first + "[" + std::to_string(i) + "]";
            }
        }
    }
    return result;
}

void write_weights(std::ostream& out, const ConstParamList& params) {
    out << "sfmg-weights " << weight_format_version << '\n';
    char buf[64];
    for (const auto& [name, m] : params) {
        out << name << ' ' << m->rows() << ' ' << m->cols() << '\n';
        for (std::size_t i = 0; i < m->size(); ++i) {
            auto res = std::to_chars(buf, buf + sizeof buf, (*m)[i]);
            if (i) out << ' ';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

std::map<std::string, Matrix> read_weights(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "sfmg-weights") throw DataError("not a weight file");
    if (version != weight_format_version) {
        throw DataError("unsupported weight format version " + std::to_string(version));
    }
    std::map<std::string, Matrix> out;
    std::string name;
    while (in >> name) {
        int rows = 0;
        int cols = 0;
        if (!(in >> rows >> cols) || rows < 0 || cols < 0) throw DataError("bad record header for " + name);
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < m.size(); ++i) {
            std::string tok;
            if (!(in >> tok)) throw DataError("truncated values for " + name);
            double v = 0.0;
            auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
                throw DataError("malformed value '" + tok + "' in " + name);
            }
            m[i] = v;
        }
        if (!out.emplace(name, std::move(m)).second) throw DataError("duplicate weight record " + name);
    }
    return out;
}

void assign_weights(const std::map<std::string, Matrix>& weights, const ParamList& params) {
    for (const auto& [name, p] : params) {
        auto it = weights.find(name);
        if (it == weights.end()) throw DataError("weight file lacks " + name);
        if (!it->second.same_shape(*p)) throw DataError("shape mismatch for " + name);
        *p = it->second;
    }
}

}  // namespace sfmg::nn
