#pragma once

// Minimal dense-network engine: affine layers with sigmoid/tanh/relu,
// exponential distance units, analytic backprop, Adam, finite-difference
// gradient checking and a text weight format. Double precision throughout.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sfmg/core.hpp"

namespace sfmg::nn {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0);

    static Matrix uniform(int rows, int cols, double lo, double hi, std::mt19937_64& rng);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r * cols_ + c)]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r * cols_ + c)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    void set_zero();
    bool all_finite() const;
    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool operator==(const Matrix&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

enum class Activation { identity, sigmoid, tanh, relu };

const char* to_string(Activation a);

struct Dense {
    Matrix weights;  // out x in
    Matrix bias;     // 1 x out, or empty for a pure rescale
    Activation activation = Activation::identity;

    static Dense create(int in, int out, Activation act, bool with_bias, std::mt19937_64& rng,
                        double init_range = 0.1);

    int in_dim() const { return weights.cols(); }
    int out_dim() const { return weights.rows(); }
    bool has_bias() const { return !bias.empty(); }

    /// Same shapes, all values zero; used as a gradient accumulator.
    Dense zeros_like() const;
};

struct DenseCache {
    Vector input;
    Vector pre_activation;
    Vector output;
};

struct DenseGrads {
    Vector input_grad;
    Matrix weight_grad;
    Matrix bias_grad;
};

/// activation(W * input + b). Throws UsageError on a dimension mismatch.
std::pair<Vector, DenseCache> forward(const Dense& layer, std::span<const double> input);

/// Allocation-free variant: reuses the cache buffers; the output is
/// cache.output.
void forward_into(const Dense& layer, std::span<const double> input, DenseCache& cache);

/// Exact gradients of the layer map for an upstream gradient on its output.
DenseGrads backward(const Dense& layer, const DenseCache& cache, std::span<const double> upstream);

/// Like backward() but adds the parameter gradients into `sink` and returns
/// only the input gradient.
Vector backward_into(const Dense& layer, const DenseCache& cache, std::span<const double> upstream,
                     Dense& sink);
void backward_into(const Dense& layer, const DenseCache& cache, std::span<const double> upstream,
                   Dense& sink, Vector& input_grad);

/// exp(sign * d / w) with a learnable scalar w, |w| clamped to >= 1e-3 and
/// the exponent capped so the output stays finite.
struct ExpUnit {
    Matrix scale{1, 1, -1.0};
    double sign = 1.0;

    static constexpr double min_abs_scale = 1e-3;
    static constexpr double max_exponent = 40.0;

    double forward(double d) const;
    /// Adds d(out)/d(w) * upstream into sink.scale.
    void backward_into(double d, double output, double upstream, ExpUnit& sink) const;
    ExpUnit zeros_like() const;
};

using ParamList = std::vector<std::pair<std::string, Matrix*>>;
using ConstParamList = std::vector<std::pair<std::string, const Matrix*>>;

void collect(Dense& layer, const std::string& name, ParamList& out);
void collect(const Dense& layer, const std::string& name, ConstParamList& out);

struct AdamState {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

/// One bias-corrected Adam step. Moment buffers are created on first use.
void adam_update(AdamState& state, std::span<Matrix* const> params,
                 std::span<const Matrix* const> grads);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_param;
};

/// Central differences over every parameter entry, compared with the
/// analytic gradient. Relative error uses max(|a|, |n|, 1e-4) as the scale,
/// so near-zero entries are compared absolutely.
GradCheckResult grad_check(const ParamList& params, const std::function<double()>& loss,
                           const std::function<std::vector<Matrix>()>& analytic, double h = 1e-5);

inline constexpr int weight_format_version = 1;

void write_weights(std::ostream& out, const ConstParamList& params);
std::map<std::string, Matrix> read_weights(std::istream& in);
/// Copies named matrices into the parameter list; shapes must match.
void assign_weights(const std::map<std::string, Matrix>& weights, const ParamList& params);

double sigmoid(double x);

}  // namespace sfmg::nn
