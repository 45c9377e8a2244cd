// Minimal differentiable numerical core: dense tensors, forward/backward
// kernels, a named parameter registry, SGD with momentum and global-norm
// clipping, and a central-difference gradient checker.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kt {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major tensor of doubles. Rank 1 and 2 are all the models need.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept {
    return shape_.size() < 2 ? 1 : shape_[1];
  }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols(), cols()};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols(), cols()};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
      n *= d;
    }
    return n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Scalar activations

inline double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double softplus(double z) noexcept {
  return z > 30 ? z : std::log1p(std::exp(z));
}

enum class Activation { sigmoid, tanh };

namespace ops {

inline void require_finite(std::span<const double> z, const char* what) {
  for (double v : z) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite input");
  }
}

/// y = W^T x + b with W stored as [d_in x d_out].
inline void affine(std::span<const double> x, const Tensor& W, std::span<const double> b,
                   std::span<double> y) noexcept {
  const std::size_t d_out = W.cols();
  std::copy(b.begin(), b.end(), y.begin());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const auto w = W.row(i);
    for (std::size_t j = 0; j < d_out; ++j) y[j] += xi * w[j];
  }
}

/// Accumulates dW += x dy^T, db += dy and, when dx is non-empty, dx += W dy.
inline void affine_backward(std::span<const double> x, const Tensor& W, std::span<const double> dy,
                            std::span<double> dx, Tensor& dW, std::span<double> db) noexcept {
  const std::size_t d_out = W.cols();
  for (std::size_t j = 0; j < d_out; ++j) db[j] += dy[j];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto w = W.row(i);
    auto g = dW.row(i);
    const double xi = x[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < d_out; ++j) {
      g[j] += xi * dy[j];
      acc += w[j] * dy[j];
    }
    if (!dx.empty()) dx[i] += acc;
  }
}

/// Max-subtracted softmax.
inline void softmax(std::span<const double> z, std::span<double> out) noexcept {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
}

/// dz += J_softmax^T dy, given the forward output y.
inline void softmax_backward(std::span<const double> y, std::span<const double> dy,
                             std::span<double> dz) noexcept {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
  for (std::size_t i = 0; i < y.size(); ++i) dz[i] += y[i] * (dy[i] - dot);
}

inline double activate(Activation kind, double z) noexcept {
  return kind == Activation::sigmoid ? sigmoid(z) : std::tanh(z);
}

/// Derivative of the activation expressed through its output.
inline double activation_slope(Activation kind, double y) noexcept {
  return kind == Activation::sigmoid ? y * (1.0 - y) : 1.0 - y * y;
}

inline void activate(Activation kind, std::span<double> z) noexcept {
  for (auto& v : z) v = activate(kind, v);
}

inline constexpr double kProbabilityClamp = 1e-8;

inline void require_binary(int r) {
  if (r != 0 && r != 1) {
    throw std::invalid_argument("binary label must be 0 or 1, got " + std::to_string(r));
  }
}

inline double binary_cross_entropy(double p, int r) {
  require_binary(r);
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return r ? -std::log(q) : -std::log(1.0 - q);
}

/// d/dp of binary_cross_entropy; zero inside the clamp regions.
inline double binary_cross_entropy_grad(double p, int r) {
  require_binary(r);
  if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
  return r ? -1.0 / p : 1.0 / (1.0 - p);
}

/// Gradient of the loss w.r.t. the pre-sigmoid logit, given p = sigmoid(logit).
inline double bce_logit_grad(double p, int r) {
  return binary_cross_entropy_grad(p, r) * p * (1.0 - p);
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Tensor-level operations with shape checking

inline Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (x.rank() != 1 || W.rank() != 2 || b.rank() != 1 || W.rows() != x.size() ||
      W.cols() != b.size()) {
    throw ShapeError("affine: incompatible shapes x" + shape_string(x.shape()) + " W" +
                     shape_string(W.shape()) + " b" + shape_string(b.shape()));
  }
  Tensor y({W.cols()});
  ops::affine(x.values(), W, b.values(), y.values());
  return y;
}

inline Tensor softmax(const Tensor& z) {
  ops::require_finite(z.values(), "softmax");
  Tensor y(z.shape());
  ops::softmax(z.values(), y.values());
  return y;
}

inline Tensor activate(Activation kind, const Tensor& z) {
  ops::require_finite(z.values(), "activate");
  Tensor y = z;
  ops::activate(kind, y.values());
  return y;
}

using ops::binary_cross_entropy;

// ---------------------------------------------------------------------------
// Parameters

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Ordered registry of named trainable tensors and their gradient accumulators.
class ParamRegistry {
 public:
  std::size_t add(std::string name, Tensor value) {
    if (find(name) != npos) throw std::invalid_argument("duplicate parameter name: " + name);
    Tensor grad(value.shape());
    entries_.push_back({std::move(name), std::move(value), std::move(grad)});
    return entries_.size() - 1;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name == name) return i;
    }
    return npos;
  }

  Parameter& at(std::string_view name) {
    const auto i = find(name);
    if (i == npos) throw std::out_of_range("unknown parameter: " + std::string(name));
    return entries_[i];
  }

  Parameter& operator[](std::size_t i) noexcept { return entries_[i]; }
  const Parameter& operator[](std::size_t i) const noexcept { return entries_[i]; }
  std::size_t size() const noexcept { return entries_.size(); }
  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  void zero_grad() {
    for (auto& p : entries_) p.grad.fill(0.0);
  }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : entries_) n += p.value.size();
    return n;
  }

  double grad_norm() const noexcept {
    double s = 0.0;
    for (const auto& p : entries_) {
      for (double g : p.grad.values()) s += g * g;
    }
    return std::sqrt(s);
  }

  /// Adds another registry's gradients into this one (private accumulators
  /// from concurrent sequence evaluation are merged this way).
  void merge_gradients(const ParamRegistry& other) {
    if (other.size() != size()) throw std::invalid_argument("merge_gradients: registry mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
      auto dst = entries_[i].grad.values();
      auto src = other.entries_[i].grad.values();
      if (dst.size() != src.size()) throw ShapeError("merge_gradients: shape mismatch for " + entries_[i].name);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }

 private:
  std::vector<Parameter> entries_;
};

/// Scales all gradients jointly so their global L2 norm is at most threshold.
/// Returns the norm before clipping.
inline double clip_global_norm(ParamRegistry& registry, double threshold) {
  if (!(threshold > 0)) throw std::invalid_argument("clip threshold must be positive");
  const double norm = registry.grad_norm();
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (auto& p : registry) {
      for (auto& g : p.grad.values()) g *= scale;
    }
  }
  return norm;
}

struct OptimizerState {
  double momentum = 0.9;
  double clip_threshold = 50.0;
  std::vector<Tensor> velocity;

  OptimizerState() = default;
  OptimizerState(const ParamRegistry& registry, double momentum_coef, double clip)
      : momentum(momentum_coef), clip_threshold(clip) {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0,1)");
    if (!(clip_threshold > 0.0)) throw std::invalid_argument("clip threshold must be positive");
    velocity.reserve(registry.size());
    for (const auto& p : registry) velocity.emplace_back(p.value.shape());
  }
};

/// v <- mu v + g; theta <- theta - lr v; gradients zeroed afterwards.
inline void sgd_momentum_step(ParamRegistry& registry, OptimizerState& state, double lr) {
  if (lr < 0) throw std::invalid_argument("learning rate must be non-negative");
  if (state.velocity.size() != registry.size()) {
    throw std::invalid_argument("optimizer state does not match the registry");
  }
  for (std::size_t k = 0; k < registry.size(); ++k) {
    auto theta = registry[k].value.values();
    auto g = registry[k].grad.values();
    auto v = state.velocity[k].values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = state.momentum * v[i] + g[i];
      if (lr != 0.0) theta[i] -= lr * v[i];
    }
  }
  registry.zero_grad();
}

// ---------------------------------------------------------------------------
// Gradient verification

struct GradcheckOptions {
  double epsilon = 1e-4;
  /// Tensors larger than this are checked on a random subsample of coordinates.
  std::size_t max_coords_per_tensor = 256;
  std::uint64_t seed = 7;
};

struct GradcheckEntry {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0.0;

  bool passed(double tolerance) const noexcept { return max_rel_error < tolerance; }
};

inline double relative_error(double analytic, double numeric) noexcept {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// loss(true) must return the loss and accumulate analytic gradients into the
/// registry; loss(false) returns the loss only.
using LossFunction = std::function<double(bool with_gradient)>;

inline GradcheckReport finite_diff_gradcheck(ParamRegistry& registry, const LossFunction& loss,
                                             const GradcheckOptions& options = {}) {
  const double base = loss(false);
  if (loss(false) != base) {
    throw std::runtime_error("gradcheck: loss function is not deterministic");
  }
  registry.zero_grad();
  loss(true);

  std::mt19937_64 rng(options.seed);
  GradcheckReport report;
  for (auto& p : registry) {
    auto theta = p.value.values();
    std::vector<std::size_t> coords(theta.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    GradcheckEntry entry{p.name, coords.size(), 0.0};
    for (auto i : coords) {
      const double saved = theta[i];
      const double h = options.epsilon * std::max(1.0, std::abs(saved));
      theta[i] = saved + h;
      const double up = loss(false);
      theta[i] = saved - h;
      const double down = loss(false);
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(p.grad[i], numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  registry.zero_grad();
  return report;
}

/// Fills every tensor in the registry with N(0, sigma^2) draws.
inline void gaussian_init(ParamRegistry& registry, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& p : registry) {
    for (auto& v : p.value.values()) v = dist(rng);
  }
}

}  // namespace kt
