// Single-matrix memory-augmented baseline: joint (exercise, response)
// embedding as both read key and write content, cosine read attention,
// least-recently-used-access (LRUA) write attention, and a per-exercise
// output layer predicting the next interaction.
#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "kt/diffcore.hpp"
#include "kt/dkvmn.hpp"
#include "kt/model.hpp"

namespace kt {

struct MannConfig {
  int num_exercises = 0;  // Q
  int memory_slots = 5;   // N
  int slot_width = 10;    // M

  void validate() const {
    if (num_exercises < 1 || memory_slots < 1 || slot_width < 1) {
      throw std::invalid_argument("mann: all dimensions must be positive");
    }
  }
};

inline constexpr double kCosineGuard = 1e-8;
inline constexpr double kUsageDecay = 0.9;
inline constexpr double kKeyStrengthFloor = 1e-6;

/// (k . m) / max(|k| |m|, delta). The floor keeps zero rows finite without
/// perturbing the ratio elsewhere, so scaling k leaves the result unchanged.
inline double cosine_similarity(std::span<const double> k, std::span<const double> m) noexcept {
  double dot = 0.0, kk = 0.0, mm = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) {
    dot += k[j] * m[j];
    kk += k[j] * k[j];
    mm += m[j] * m[j];
  }
  return dot / std::max(std::sqrt(kk) * std::sqrt(mm), kCosineGuard);
}

/// w^r = softmax(beta * K(k, M(i))). Writes the similarities too when asked.
inline void cosine_read_weight(std::span<const double> key, const Tensor& memory, double beta,
                               std::span<double> weight, std::span<double> similarity = {}) {
  if (!(beta > 0)) throw std::invalid_argument("key strength must be positive");
  for (std::size_t i = 0; i < memory.rows(); ++i) {
    const double K = cosine_similarity(key, memory.row(i));
    if (!similarity.empty()) similarity[i] = K;
    weight[i] = beta * K;
  }
  ops::softmax(weight, weight);
}

inline Tensor cosine_read_weight(const Tensor& key, const Tensor& memory, double beta) {
  if (memory.rank() != 2 || memory.cols() != key.size()) {
    throw ShapeError("cosine_read_weight: key" + shape_string(key.shape()) + " vs memory" +
                     shape_string(memory.shape()));
  }
  Tensor w({memory.rows()});
  cosine_read_weight(key.values(), memory, beta, w.values());
  return w;
}

/// w^u_t = gamma w^u_{t-1} + w^r_t + w^w_t.
inline std::vector<double> update_usage(std::span<const double> usage, std::span<const double> read,
                                        std::span<const double> write, double decay = kUsageDecay) {
  std::vector<double> out(usage.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = decay * usage[i] + read[i] + write[i];
  return out;
}

/// Indicator of entries at or below the n-th smallest usage (n is 1-based).
inline std::vector<double> least_used_weight(std::span<const double> usage, std::size_t n) {
  if (n < 1 || n > usage.size()) {
    throw std::invalid_argument("least_used_weight: n=" + std::to_string(n) + " outside [1, " +
                                std::to_string(usage.size()) + "]");
  }
  std::vector<double> sorted(usage.begin(), usage.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n - 1), sorted.end());
  const double threshold = sorted[n - 1];
  std::vector<double> out(usage.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = usage[i] <= threshold ? 1.0 : 0.0;
  return out;
}

/// w^w_t = sigmoid(alpha) w^r_{t-1} + (1 - sigmoid(alpha)) w^lu_{t-1}.
inline std::vector<double> lrua_write_weight(std::span<const double> prev_read,
                                             std::span<const double> prev_least_used, double alpha) {
  const double g = sigmoid(alpha);
  std::vector<double> out(prev_read.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = g * prev_read[i] + (1.0 - g) * prev_least_used[i];
  return out;
}

struct MannState {
  Tensor memory;                  // N x M
  std::vector<double> read;       // w^r_{t-1}
  std::vector<double> usage;      // w^u_{t-1}
  std::vector<double> least_used; // w^lu_{t-1}
};

class MannModel final : public KnowledgeTracer {
 public:
  enum Param : std::size_t {
    kJointEmbedding,  // 2Q x M
    kKeyStrength,     // 1, softplus pre-activation
    kWriteGate,       // 1, alpha
    kEraseWeight,     // M x M
    kEraseBias,       // M
    kAddWeight,       // M x M
    kAddBias,         // M
    kOutputWeight,    // M x Q
    kOutputBias,      // Q
    kInitialMemory,   // N x M
  };

  MannModel(const MannConfig& config, double sigma, std::uint64_t seed) : cfg_(config) {
    cfg_.validate();
    const auto Q = static_cast<std::size_t>(cfg_.num_exercises);
    const auto N = static_cast<std::size_t>(cfg_.memory_slots);
    const auto M = static_cast<std::size_t>(cfg_.slot_width);
    params_.add("mann.embedding", Tensor({2 * Q, M}));
    params_.add("mann.key_strength", Tensor({1}));
    params_.add("mann.write_gate", Tensor({1}));
    params_.add("mann.E", Tensor({M, M}));
    params_.add("mann.b_e", Tensor({M}));
    params_.add("mann.D", Tensor({M, M}));
    params_.add("mann.b_a", Tensor({M}));
    params_.add("mann.W_out", Tensor({M, Q}));
    params_.add("mann.b_out", Tensor({Q}));
    params_.add("mann.memory0", Tensor({N, M}));
    gaussian_init(params_, sigma, seed);
  }

  ModelKind kind() const noexcept override { return ModelKind::mann; }
  int num_exercises() const noexcept override { return cfg_.num_exercises; }
  const MannConfig& mann_config() const noexcept { return cfg_; }

  ConfigMap config() const override {
    return {{"exercises", cfg_.num_exercises},
            {"memory_size", cfg_.memory_slots},
            {"slot_width", cfg_.slot_width}};
  }

  std::unique_ptr<KnowledgeTracer> clone() const override { return std::make_unique<MannModel>(*this); }

  Tensor& value(Param p) noexcept { return params_[p].value; }
  const Tensor& value(Param p) const noexcept { return params_[p].value; }

  double key_strength() const noexcept { return softplus(value(kKeyStrength)[0]) + kKeyStrengthFloor; }

  MannState initial_state() const {
    const auto N = static_cast<std::size_t>(cfg_.memory_slots);
    return {value(kInitialMemory), std::vector<double>(N, 0.0), std::vector<double>(N, 0.0),
            std::vector<double>(N, 0.0)};
  }

  /// One interaction: returns p_t over all Q exercises and advances the state.
  std::vector<double> step(MannState& state, int q, int r) const {
    StepCache cache;
    forward_step(state, encode_value_index(q, r, cfg_.num_exercises), true, cache);
    return cache.probs;
  }

  double forward(const PaddedRow& row, PredictionTrace* trace) const override {
    return const_cast<MannModel*>(this)->run(row, trace, false);
  }

  double accumulate_gradients(const PaddedRow& row, PredictionTrace* trace) override {
    return run(row, trace, true);
  }

 private:
  struct StepCache {
    std::size_t t = 0;
    std::size_t x = 0;
    std::vector<double> similarity, read_w, read, probs, write_w, prev_read, prev_lu, e, a;
    Tensor memory_before;
  };

  void forward_step(MannState& st, int value_index, bool all_probs, StepCache& c,
                    std::size_t scored = 0) const {
    const auto N = static_cast<std::size_t>(cfg_.memory_slots);
    const auto M = static_cast<std::size_t>(cfg_.slot_width);
    const auto Q = static_cast<std::size_t>(cfg_.num_exercises);
    c.x = static_cast<std::size_t>(value_index - 1);
    const auto v = value(kJointEmbedding).row(c.x);

    c.similarity.assign(N, 0.0);
    c.read_w.assign(N, 0.0);
    cosine_read_weight(v, st.memory, key_strength(), c.read_w, c.similarity);
    c.read.assign(M, 0.0);
    read_memory(st.memory, c.read_w, c.read);

    const Tensor& Wout = value(kOutputWeight);
    const auto bout = value(kOutputBias).values();
    if (all_probs) {
      c.probs.assign(Q, 0.0);
      ops::affine(c.read, Wout, bout, c.probs);
      for (auto& p : c.probs) p = sigmoid(p);
    } else if (scored > 0) {
      // Only the next exercise's column is needed for the loss.
      double z = bout[scored - 1];
      for (std::size_t j = 0; j < M; ++j) z += c.read[j] * Wout.at(j, scored - 1);
      c.probs.assign(1, sigmoid(z));
    } else {
      c.probs.clear();
    }

    c.prev_read = st.read;
    c.prev_lu = st.least_used;
    c.write_w = lrua_write_weight(st.read, st.least_used, value(kWriteGate)[0]);
    c.e.assign(M, 0.0);
    c.a.assign(M, 0.0);
    erase_add_vectors(v, value(kEraseWeight), value(kEraseBias).values(), value(kAddWeight),
                      value(kAddBias).values(), c.e, c.a);
    c.memory_before = st.memory;
    erase_add_write(st.memory, c.write_w, c.e, c.a);

    st.usage = update_usage(st.usage, c.read_w, c.write_w);
    st.least_used = least_used_weight(st.usage, 1);
    st.read = c.read_w;
  }

  double run(const PaddedRow& row, PredictionTrace* trace, bool backward) {
    require_row(row);
    const auto T = row.length();
    const auto N = static_cast<std::size_t>(cfg_.memory_slots);
    const auto M = static_cast<std::size_t>(cfg_.slot_width);
    if (trace) *trace = PredictionTrace(T);

    MannState st = initial_state();
    std::vector<StepCache> caches;
    double loss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      if (!row.valid(t)) continue;
      const bool has_next = row.valid(t + 1);
      StepCache c;
      c.t = t;
      forward_step(st, row.values[t], false, c,
                   has_next ? static_cast<std::size_t>(row.keys[t + 1]) : 0);
      if (has_next) {
        const int label = row.response(t + 1);
        loss += ops::binary_cross_entropy(c.probs[0], label);
        if (trace) {
          trace->probability[t] = c.probs[0];
          trace->label[t] = label;
          trace->valid[t] = 1;
        }
      }
      if (backward) caches.push_back(std::move(c));
    }
    if (!backward) return loss;

    auto& gEmb = params_[kJointEmbedding].grad;
    auto& gE = params_[kEraseWeight].grad;
    auto& gD = params_[kAddWeight].grad;
    auto& gOut = params_[kOutputWeight].grad;
    const Tensor& emb = value(kJointEmbedding);
    const Tensor& Wout = value(kOutputWeight);
    const double beta_raw = value(kKeyStrength)[0];
    const double beta = key_strength();
    const double gate = sigmoid(value(kWriteGate)[0]);

    Tensor dmem({N, M});
    std::vector<double> dread_w_next(N, 0.0);  // d loss / d w^r_t through w^w_{t+1}
    std::vector<double> dww(N), de(M), da(M), dv(M), dread(M), dw(N), ds(N);
    for (auto it = caches.rbegin(); it != caches.rend(); ++it) {
      const StepCache& c = *it;
      std::fill(dww.begin(), dww.end(), 0.0);
      std::fill(de.begin(), de.end(), 0.0);
      std::fill(da.begin(), da.end(), 0.0);
      std::fill(dv.begin(), dv.end(), 0.0);

      // Write.
      for (std::size_t i = 0; i < N; ++i) {
        const auto before = c.memory_before.row(i);
        auto g = dmem.row(i);
        const double wi = c.write_w[i];
        double acc = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
          acc += g[j] * (c.a[j] - before[j] * c.e[j]);
          de[j] -= g[j] * before[j] * wi;
          da[j] += g[j] * wi;
          g[j] *= 1.0 - wi * c.e[j];
        }
        dww[i] = acc;
      }
      for (std::size_t j = 0; j < M; ++j) {
        de[j] *= ops::activation_slope(Activation::sigmoid, c.e[j]);
        da[j] *= ops::activation_slope(Activation::tanh, c.a[j]);
      }
      const auto v = emb.row(c.x);
      ops::affine_backward(v, value(kEraseWeight), de, dv, gE, params_[kEraseBias].grad.values());
      ops::affine_backward(v, value(kAddWeight), da, dv, gD, params_[kAddBias].grad.values());

      // LRUA gate; the least-used indicator is piecewise constant.
      double dgate = 0.0;
      std::vector<double> dprev_read(N);
      for (std::size_t i = 0; i < N; ++i) {
        dgate += dww[i] * (c.prev_read[i] - c.prev_lu[i]);
        dprev_read[i] = gate * dww[i];
      }
      params_[kWriteGate].grad[0] += dgate * gate * (1.0 - gate);

      // Output for the next exercise.
      std::fill(dread.begin(), dread.end(), 0.0);
      if (row.valid(c.t + 1)) {
        const auto col = static_cast<std::size_t>(row.keys[c.t + 1] - 1);
        const double dz = ops::bce_logit_grad(c.probs[0], row.response(c.t + 1));
        for (std::size_t j = 0; j < M; ++j) {
          gOut.at(j, col) += c.read[j] * dz;
          dread[j] = Wout.at(j, col) * dz;
        }
        params_[kOutputBias].grad[col] += dz;
      }

      // Read.
      for (std::size_t i = 0; i < N; ++i) {
        const auto before = c.memory_before.row(i);
        auto g = dmem.row(i);
        double acc = dread_w_next[i];
        for (std::size_t j = 0; j < M; ++j) {
          acc += dread[j] * before[j];
          g[j] += c.read_w[i] * dread[j];
        }
        dw[i] = acc;
      }

      // Softmax over beta * K.
      std::fill(ds.begin(), ds.end(), 0.0);
      ops::softmax_backward(c.read_w, dw, ds);
      double dbeta = 0.0;
      double vv = 0.0;
      for (std::size_t j = 0; j < M; ++j) vv += v[j] * v[j];
      const double nv = std::sqrt(vv);
      for (std::size_t i = 0; i < N; ++i) {
        dbeta += ds[i] * c.similarity[i];
        const double dK = beta * ds[i];
        if (dK == 0.0) continue;
        const auto m = c.memory_before.row(i);
        double dot = 0.0, mm = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
          dot += v[j] * m[j];
          mm += m[j] * m[j];
        }
        const double nm = std::sqrt(mm);
        const bool floored = nv * nm < kCosineGuard;
        const double den = floored ? kCosineGuard : nv * nm;
        // Above the floor K = dot / (|v| |m|): dK/dv = m/den - K v/|v|^2.
        const double K = dot / den;
        auto g = dmem.row(i);
        for (std::size_t j = 0; j < M; ++j) {
          double dKdv = m[j] / den;
          double dKdm = v[j] / den;
          if (!floored) {
            dKdv -= K * v[j] / vv;
            dKdm -= K * m[j] / mm;
          }
          dv[j] += dK * dKdv;
          g[j] += dK * dKdm;
        }
      }
      params_[kKeyStrength].grad[0] += dbeta * sigmoid(beta_raw);

      auto grow = gEmb.row(c.x);
      for (std::size_t j = 0; j < M; ++j) grow[j] += dv[j];
      dread_w_next = std::move(dprev_read);
    }
    auto g0 = params_[kInitialMemory].grad.values();
    const auto dm = dmem.values();
    for (std::size_t j = 0; j < g0.size(); ++j) g0[j] += dm[j];
    return loss;
  }

  MannConfig cfg_;
};

}  // namespace kt
