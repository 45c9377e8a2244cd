// Dynamic Key-Value Memory Network.
//
// A static key matrix maps an exercise embedding to a correlation weight over
// N latent concepts; a per-student value matrix holds the concept states. Each
// timestep reads the value matrix, predicts the response to the current
// exercise, then writes the (exercise, response) embedding back with an
// erase-then-add update under the same correlation weight.
#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "kt/diffcore.hpp"
#include "kt/model.hpp"

namespace kt {

struct DkvmnConfig {
  int num_exercises = 0;  // Q
  int memory_size = 5;    // N
  int key_dim = 10;       // d_k
  int value_dim = 10;     // d_v
  int summary_dim = 10;   // d_f

  /// One width knob for d_k = d_v = d_f.
  static DkvmnConfig with_width(int num_exercises, int memory_size, int width) {
    return {num_exercises, memory_size, width, width, width};
  }

  void validate() const {
    if (num_exercises < 1 || memory_size < 1 || key_dim < 1 || value_dim < 1 || summary_dim < 1) {
      throw std::invalid_argument("dkvmn: all dimensions must be positive");
    }
  }
};

// ---------------------------------------------------------------------------
// Building blocks

/// w(i) = softmax_i(k . M^k(i)).
inline void correlation_weight(std::span<const double> key, const Tensor& key_memory,
                               std::span<double> weight) {
  for (std::size_t i = 0; i < key_memory.rows(); ++i) {
    const auto slot = key_memory.row(i);
    double z = 0.0;
    for (std::size_t j = 0; j < key.size(); ++j) z += key[j] * slot[j];
    weight[i] = z;
  }
  ops::softmax(weight, weight);
}

inline Tensor correlation_weight(const Tensor& key, const Tensor& key_memory) {
  if (key.rank() != 1 || key_memory.rank() != 2 || key_memory.cols() != key.size()) {
    throw ShapeError("correlation_weight: key" + shape_string(key.shape()) + " vs key memory" +
                     shape_string(key_memory.shape()));
  }
  Tensor w({key_memory.rows()});
  correlation_weight(key.values(), key_memory, w.values());
  return w;
}

/// r = sum_i w(i) M(i).
inline void read_memory(const Tensor& memory, std::span<const double> weight, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < memory.rows(); ++i) {
    const auto slot = memory.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += weight[i] * slot[j];
  }
}

inline Tensor read_memory(const Tensor& memory, const Tensor& weight) {
  if (memory.rank() != 2 || weight.size() != memory.rows()) {
    throw ShapeError("read: memory" + shape_string(memory.shape()) + " vs weight" +
                     shape_string(weight.shape()));
  }
  Tensor r({memory.cols()});
  read_memory(memory, weight.values(), r.values());
  return r;
}

/// M(i) <- M(i) o (1 - w(i) e) + w(i) a. Slots with zero weight are skipped,
/// so they stay bitwise identical.
inline void erase_add_write(Tensor& memory, std::span<const double> weight,
                            std::span<const double> erase, std::span<const double> add) {
  for (std::size_t i = 0; i < memory.rows(); ++i) {
    const double wi = weight[i];
    if (wi == 0.0) continue;
    auto slot = memory.row(i);
    for (std::size_t j = 0; j < slot.size(); ++j) {
      slot[j] = slot[j] * (1.0 - wi * erase[j]) + wi * add[j];
    }
  }
}

/// e = sigmoid(E^T v + b_e), a = tanh(D^T v + b_a).
inline void erase_add_vectors(std::span<const double> v, const Tensor& E, std::span<const double> be,
                              const Tensor& D, std::span<const double> ba, std::span<double> erase,
                              std::span<double> add) {
  ops::affine(v, E, be, erase);
  ops::activate(Activation::sigmoid, erase);
  ops::affine(v, D, ba, add);
  ops::activate(Activation::tanh, add);
}

struct SummaryOutput {
  Tensor summary;  // f_t
  double probability = 0.0;
};

/// f = tanh(W1^T [r, k] + b1); p = sigmoid(W2^T f + b2).
inline SummaryOutput predict_response(const Tensor& read, const Tensor& key, const Tensor& W1,
                                      const Tensor& b1, const Tensor& W2, const Tensor& b2) {
  if (W1.rank() != 2 || W1.rows() != read.size() + key.size() || b1.size() != W1.cols() ||
      W2.rows() != W1.cols() || W2.cols() != 1 || b2.size() != 1) {
    throw ShapeError("predict: W1" + shape_string(W1.shape()) + " W2" + shape_string(W2.shape()));
  }
  std::vector<double> joint(read.values().begin(), read.values().end());
  joint.insert(joint.end(), key.values().begin(), key.values().end());
  SummaryOutput out{Tensor({W1.cols()}), 0.0};
  ops::affine(joint, W1, b1.values(), out.summary.values());
  ops::activate(Activation::tanh, out.summary.values());
  double logit = 0.0;
  ops::affine(out.summary.values(), W2, b2.values(), std::span<double>(&logit, 1));
  out.probability = sigmoid(logit);
  return out;
}

// ---------------------------------------------------------------------------

class DkvmnModel final : public KnowledgeTracer {
 public:
  enum Param : std::size_t {
    kExerciseEmbedding,     // A: Q x d_k
    kInteractionEmbedding,  // B: 2Q x d_v
    kKeyMemory,             // M^k: N x d_k
    kInitialValueMemory,    // M^v_0: N x d_v
    kSummaryWeight,         // W1: (d_v + d_k) x d_f
    kSummaryBias,           // b1: d_f
    kOutputWeight,          // W2: d_f x 1
    kOutputBias,            // b2: 1
    kEraseWeight,           // E: d_v x d_v
    kEraseBias,             // b_e: d_v
    kAddWeight,             // D: d_v x d_v
    kAddBias,               // b_a: d_v
  };

  DkvmnModel(const DkvmnConfig& config, double sigma, std::uint64_t seed) : cfg_(config) {
    cfg_.validate();
    const auto Q = static_cast<std::size_t>(cfg_.num_exercises);
    const auto N = static_cast<std::size_t>(cfg_.memory_size);
    const auto dk = static_cast<std::size_t>(cfg_.key_dim);
    const auto dv = static_cast<std::size_t>(cfg_.value_dim);
    const auto df = static_cast<std::size_t>(cfg_.summary_dim);
    params_.add("dkvmn.A", Tensor({Q, dk}));
    params_.add("dkvmn.B", Tensor({2 * Q, dv}));
    params_.add("dkvmn.key_memory", Tensor({N, dk}));
    params_.add("dkvmn.value_memory0", Tensor({N, dv}));
    params_.add("dkvmn.W1", Tensor({dv + dk, df}));
    params_.add("dkvmn.b1", Tensor({df}));
    params_.add("dkvmn.W2", Tensor({df, 1}));
    params_.add("dkvmn.b2", Tensor({1}));
    params_.add("dkvmn.E", Tensor({dv, dv}));
    params_.add("dkvmn.b_e", Tensor({dv}));
    params_.add("dkvmn.D", Tensor({dv, dv}));
    params_.add("dkvmn.b_a", Tensor({dv}));
    gaussian_init(params_, sigma, seed);
  }

  ModelKind kind() const noexcept override { return ModelKind::dkvmn; }
  int num_exercises() const noexcept override { return cfg_.num_exercises; }
  const DkvmnConfig& dkvmn_config() const noexcept { return cfg_; }

  ConfigMap config() const override {
    return {{"exercises", cfg_.num_exercises}, {"memory_size", cfg_.memory_size},
            {"key_dim", cfg_.key_dim},         {"value_dim", cfg_.value_dim},
            {"summary_dim", cfg_.summary_dim}};
  }

  std::unique_ptr<KnowledgeTracer> clone() const override {
    return std::make_unique<DkvmnModel>(*this);
  }

  Tensor& value(Param p) noexcept { return params_[p].value; }
  const Tensor& value(Param p) const noexcept { return params_[p].value; }

  double forward(const PaddedRow& row, PredictionTrace* trace) const override {
    return const_cast<DkvmnModel*>(this)->run(row, trace, false);
  }

  double accumulate_gradients(const PaddedRow& row, PredictionTrace* trace) override {
    return run(row, trace, true);
  }

  Tensor initial_value_memory() const { return value(kInitialValueMemory); }

  /// Correlation weight of exercise q (1-based).
  Tensor exercise_weight(int q) const {
    Tensor w({static_cast<std::size_t>(cfg_.memory_size)});
    correlation_weight(value(kExerciseEmbedding).row(static_cast<std::size_t>(q - 1)),
                       value(kKeyMemory), w.values());
    return w;
  }

  /// Probability of answering exercise q correctly given the value memory.
  double predict(const Tensor& value_memory, int q) const {
    encode_key_index(q, cfg_.num_exercises);
    const Tensor w = exercise_weight(q);
    const Tensor r = read_memory(value_memory, w);
    Tensor k({static_cast<std::size_t>(cfg_.key_dim)});
    const auto src = value(kExerciseEmbedding).row(static_cast<std::size_t>(q - 1));
    std::copy(src.begin(), src.end(), k.values().begin());
    return predict_response(r, k, value(kSummaryWeight), value(kSummaryBias), value(kOutputWeight),
                            value(kOutputBias))
        .probability;
  }

  /// Applies the erase-then-add write of interaction (q, r).
  void write(Tensor& value_memory, int q, int r) const {
    const int x = encode_value_index(q, r, cfg_.num_exercises);
    const Tensor w = exercise_weight(q);
    const auto dv = static_cast<std::size_t>(cfg_.value_dim);
    std::vector<double> e(dv), a(dv);
    erase_add_vectors(value(kInteractionEmbedding).row(static_cast<std::size_t>(x - 1)),
                      value(kEraseWeight), value(kEraseBias).values(), value(kAddWeight),
                      value(kAddBias).values(), e, a);
    erase_add_write(value_memory, w.values(), e, a);
  }

  /// Per-concept mastery: one-hot read of each slot, exercise half of the
  /// summary layer masked out.
  std::vector<double> depict_knowledge_state(const Tensor& value_memory) const {
    const auto N = static_cast<std::size_t>(cfg_.memory_size);
    const auto dv = static_cast<std::size_t>(cfg_.value_dim);
    const auto dk = static_cast<std::size_t>(cfg_.key_dim);
    const auto df = static_cast<std::size_t>(cfg_.summary_dim);
    std::vector<double> joint(dv + dk, 0.0), f(df);
    std::vector<double> mastery(N);
    for (std::size_t i = 0; i < N; ++i) {
      const auto slot = value_memory.row(i);
      std::copy(slot.begin(), slot.end(), joint.begin());
      ops::affine(joint, value(kSummaryWeight), value(kSummaryBias).values(), f);
      ops::activate(Activation::tanh, f);
      double logit = 0.0;
      ops::affine(f, value(kOutputWeight), value(kOutputBias).values(), std::span<double>(&logit, 1));
      mastery[i] = sigmoid(logit);
    }
    return mastery;
  }

  /// Q x N matrix whose row q-1 is the correlation weight of exercise q.
  Tensor correlation_weight_matrix() const {
    const auto Q = static_cast<std::size_t>(cfg_.num_exercises);
    const auto N = static_cast<std::size_t>(cfg_.memory_size);
    Tensor out({Q, N});
    for (std::size_t q = 0; q < Q; ++q) {
      correlation_weight(value(kExerciseEmbedding).row(q), value(kKeyMemory), out.row(q));
    }
    return out;
  }

 private:
  double run(const PaddedRow& row, PredictionTrace* trace, bool backward) {
    require_row(row);
    const auto T = row.length();
    const auto N = static_cast<std::size_t>(cfg_.memory_size);
    const auto dk = static_cast<std::size_t>(cfg_.key_dim);
    const auto dv = static_cast<std::size_t>(cfg_.value_dim);
    const auto df = static_cast<std::size_t>(cfg_.summary_dim);
    if (trace) *trace = PredictionTrace(T);

    const Tensor& A = value(kExerciseEmbedding);
    const Tensor& B = value(kInteractionEmbedding);
    const Tensor& Mk = value(kKeyMemory);
    const Tensor& W1 = value(kSummaryWeight);
    const Tensor& W2 = value(kOutputWeight);
    const Tensor& E = value(kEraseWeight);
    const Tensor& D = value(kAddWeight);

    struct Step {
      std::size_t t;
      std::vector<double> w, joint, f, e, a;
      Tensor memory_before;
      double p;
    };
    std::vector<Step> steps;
    Tensor memory = value(kInitialValueMemory);
    double loss = 0.0;

    for (std::size_t t = 0; t < T; ++t) {
      if (!row.valid(t)) continue;
      const auto q = static_cast<std::size_t>(row.keys[t] - 1);
      const auto x = static_cast<std::size_t>(row.values[t] - 1);
      const int label = row.response(t);
      Step s{t, std::vector<double>(N), std::vector<double>(dv + dk), std::vector<double>(df),
             std::vector<double>(dv), std::vector<double>(dv), Tensor(), 0.0};
      const auto k = A.row(q);
      correlation_weight(k, Mk, s.w);
      read_memory(memory, s.w, std::span<double>(s.joint).first(dv));
      std::copy(k.begin(), k.end(), s.joint.begin() + static_cast<std::ptrdiff_t>(dv));
      ops::affine(s.joint, W1, value(kSummaryBias).values(), s.f);
      ops::activate(Activation::tanh, s.f);
      double logit = 0.0;
      ops::affine(s.f, W2, value(kOutputBias).values(), std::span<double>(&logit, 1));
      s.p = sigmoid(logit);
      loss += ops::binary_cross_entropy(s.p, label);
      if (trace) {
        trace->probability[t] = s.p;
        trace->label[t] = label;
        trace->valid[t] = 1;
      }
      erase_add_vectors(B.row(x), E, value(kEraseBias).values(), D, value(kAddBias).values(), s.e, s.a);
      if (backward) s.memory_before = memory;
      erase_add_write(memory, s.w, s.e, s.a);
      if (backward) steps.push_back(std::move(s));
    }
    if (!backward) return loss;

    Tensor& gA = params_[kExerciseEmbedding].grad;
    Tensor& gB = params_[kInteractionEmbedding].grad;
    Tensor& gMk = params_[kKeyMemory].grad;
    Tensor& gW1 = params_[kSummaryWeight].grad;
    Tensor& gW2 = params_[kOutputWeight].grad;
    Tensor& gE = params_[kEraseWeight].grad;
    Tensor& gD = params_[kAddWeight].grad;

    // dmem holds d(loss)/d(memory after the current step's write).
    Tensor dmem({N, dv});
    std::vector<double> dw(N), dz(N), de(dv), da(dv), dv_vec(dv), df_vec(df), djoint(dv + dk), dk_vec(dk);
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
      const Step& s = *it;
      const auto q = static_cast<std::size_t>(row.keys[s.t] - 1);
      const auto x = static_cast<std::size_t>(row.values[s.t] - 1);
      const int label = row.response(s.t);
      std::fill(dw.begin(), dw.end(), 0.0);
      std::fill(de.begin(), de.end(), 0.0);
      std::fill(da.begin(), da.end(), 0.0);

      // Write: M' = M o (1 - w e) + w a.
      for (std::size_t i = 0; i < N; ++i) {
        const auto before = s.memory_before.row(i);
        auto g = dmem.row(i);
        const double wi = s.w[i];
        double acc = 0.0;
        for (std::size_t j = 0; j < dv; ++j) {
          acc += g[j] * (s.a[j] - before[j] * s.e[j]);
          de[j] -= g[j] * before[j] * wi;
          da[j] += g[j] * wi;
          g[j] *= 1.0 - wi * s.e[j];
        }
        dw[i] += acc;
      }
      for (std::size_t j = 0; j < dv; ++j) {
        de[j] *= ops::activation_slope(Activation::sigmoid, s.e[j]);
        da[j] *= ops::activation_slope(Activation::tanh, s.a[j]);
      }
      std::fill(dv_vec.begin(), dv_vec.end(), 0.0);
      const auto v = B.row(x);
      ops::affine_backward(v, E, de, dv_vec, gE, params_[kEraseBias].grad.values());
      ops::affine_backward(v, D, da, dv_vec, gD, params_[kAddBias].grad.values());
      auto gBrow = gB.row(x);
      for (std::size_t j = 0; j < dv; ++j) gBrow[j] += dv_vec[j];

      // Prediction.
      const double dlogit = ops::bce_logit_grad(s.p, label);
      std::fill(df_vec.begin(), df_vec.end(), 0.0);
      ops::affine_backward(s.f, W2, std::span<const double>(&dlogit, 1), df_vec, gW2,
                           params_[kOutputBias].grad.values());
      for (std::size_t j = 0; j < df; ++j) df_vec[j] *= ops::activation_slope(Activation::tanh, s.f[j]);
      std::fill(djoint.begin(), djoint.end(), 0.0);
      ops::affine_backward(s.joint, W1, df_vec, djoint, gW1, params_[kSummaryBias].grad.values());

      // Read: r = sum_i w_i M_i.
      for (std::size_t i = 0; i < N; ++i) {
        const auto before = s.memory_before.row(i);
        auto g = dmem.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < dv; ++j) {
          acc += djoint[j] * before[j];
          g[j] += s.w[i] * djoint[j];
        }
        dw[i] += acc;
      }

      // Correlation weight: w = softmax(M^k k).
      std::fill(dz.begin(), dz.end(), 0.0);
      ops::softmax_backward(s.w, dw, dz);
      const auto k = A.row(q);
      for (std::size_t j = 0; j < dk; ++j) dk_vec[j] = djoint[dv + j];
      for (std::size_t i = 0; i < N; ++i) {
        const auto key_slot = Mk.row(i);
        auto gkey = gMk.row(i);
        for (std::size_t j = 0; j < dk; ++j) {
          dk_vec[j] += dz[i] * key_slot[j];
          gkey[j] += dz[i] * k[j];
        }
      }
      auto gArow = gA.row(q);
      for (std::size_t j = 0; j < dk; ++j) gArow[j] += dk_vec[j];
    }
    auto g0 = params_[kInitialValueMemory].grad.values();
    const auto dm = dmem.values();
    for (std::size_t j = 0; j < g0.size(); ++j) g0[j] += dm[j];
    return loss;
  }

  DkvmnConfig cfg_;
};

}  // namespace kt
