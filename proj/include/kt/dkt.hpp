// LSTM knowledge-tracing baseline. One-hot interaction inputs are realized as
// row lookups into the input weight matrix.
#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "kt/diffcore.hpp"
#include "kt/model.hpp"

namespace kt {

struct DktConfig {
  int num_exercises = 0;  // Q
  int hidden = 10;        // d_h

  void validate() const {
    if (num_exercises < 1 || hidden < 1) throw std::invalid_argument("dkt: all dimensions must be positive");
  }
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

/// Gate activations of one step, packed as [input | forget | output | candidate].
struct LstmGates {
  std::vector<double> input, forget, output, candidate;
};

class DktModel final : public KnowledgeTracer {
 public:
  enum Param : std::size_t {
    kInputWeight,   // 2Q x 4H
    kHiddenWeight,  // H x 4H
    kGateBias,      // 4H
    kOutputWeight,  // H x Q
    kOutputBias,    // Q
  };

  DktModel(const DktConfig& config, double sigma, std::uint64_t seed) : cfg_(config) {
    cfg_.validate();
    const auto Q = static_cast<std::size_t>(cfg_.num_exercises);
    const auto H = static_cast<std::size_t>(cfg_.hidden);
    params_.add("dkt.W_x", Tensor({2 * Q, 4 * H}));
    params_.add("dkt.W_h", Tensor({H, 4 * H}));
    params_.add("dkt.b", Tensor({4 * H}));
    params_.add("dkt.W_out", Tensor({H, Q}));
    params_.add("dkt.b_out", Tensor({Q}));
    gaussian_init(params_, sigma, seed);
    auto b = value(kGateBias).values();
    for (std::size_t j = H; j < 2 * H; ++j) b[j] = 1.0;
  }

  ModelKind kind() const noexcept override { return ModelKind::dkt; }
  int num_exercises() const noexcept override { return cfg_.num_exercises; }
  const DktConfig& dkt_config() const noexcept { return cfg_; }

  ConfigMap config() const override {
    return {{"exercises", cfg_.num_exercises}, {"hidden", cfg_.hidden}};
  }

  std::unique_ptr<KnowledgeTracer> clone() const override { return std::make_unique<DktModel>(*this); }

  Tensor& value(Param p) noexcept { return params_[p].value; }
  const Tensor& value(Param p) const noexcept { return params_[p].value; }

  LstmState initial_state() const {
    const auto H = static_cast<std::size_t>(cfg_.hidden);
    return {std::vector<double>(H, 0.0), std::vector<double>(H, 0.0)};
  }

  /// Advances the state with input index x in [1, 2Q]; returns y_t over all Q
  /// exercises. Gate values are written to gates when non-null.
  std::vector<double> lstm_step(LstmState& state, int x, LstmGates* gates = nullptr) const {
    if (x < 1 || x > 2 * cfg_.num_exercises) {
      throw std::out_of_range("lstm input index " + std::to_string(x) + " outside [1, 2Q]");
    }
    const auto H = static_cast<std::size_t>(cfg_.hidden);
    std::vector<double> z(4 * H);
    gate_preactivations(state.h, static_cast<std::size_t>(x - 1), z);
    LstmGates g = activate_gates(z);
    for (std::size_t j = 0; j < H; ++j) {
      state.c[j] = g.forget[j] * state.c[j] + g.input[j] * g.candidate[j];
      state.h[j] = g.output[j] * std::tanh(state.c[j]);
    }
    std::vector<double> y(static_cast<std::size_t>(cfg_.num_exercises));
    ops::affine(state.h, value(kOutputWeight), value(kOutputBias).values(), y);
    for (auto& v : y) v = sigmoid(v);
    if (gates) *gates = std::move(g);
    return y;
  }

  double forward(const PaddedRow& row, PredictionTrace* trace) const override {
    return const_cast<DktModel*>(this)->run(row, trace, false);
  }

  double accumulate_gradients(const PaddedRow& row, PredictionTrace* trace) override {
    return run(row, trace, true);
  }

 private:
  void gate_preactivations(std::span<const double> h, std::size_t x, std::span<double> z) const {
    const auto in = value(kInputWeight).row(x);
    const auto b = value(kGateBias).values();
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = in[j] + b[j];
    const Tensor& Wh = value(kHiddenWeight);
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (h[i] == 0.0) continue;
      const auto w = Wh.row(i);
      for (std::size_t j = 0; j < z.size(); ++j) z[j] += h[i] * w[j];
    }
  }

  LstmGates activate_gates(std::span<const double> z) const {
    const auto H = static_cast<std::size_t>(cfg_.hidden);
    LstmGates g{std::vector<double>(H), std::vector<double>(H), std::vector<double>(H), std::vector<double>(H)};
    for (std::size_t j = 0; j < H; ++j) {
      g.input[j] = sigmoid(z[j]);
      g.forget[j] = sigmoid(z[H + j]);
      g.output[j] = sigmoid(z[2 * H + j]);
      g.candidate[j] = std::tanh(z[3 * H + j]);
    }
    return g;
  }

  struct StepCache {
    std::size_t t = 0;
    std::size_t x = 0;
    LstmGates gates;
    std::vector<double> h_prev, c_prev, c, tanh_c, h;
    double p = 0.0;
  };

  double run(const PaddedRow& row, PredictionTrace* trace, bool backward) {
    require_row(row);
    const auto T = row.length();
    const auto H = static_cast<std::size_t>(cfg_.hidden);
    if (trace) *trace = PredictionTrace(T);
    const Tensor& Wout = value(kOutputWeight);
    const auto bout = value(kOutputBias).values();

    LstmState st = initial_state();
    std::vector<StepCache> caches;
    std::vector<double> z(4 * H);
    double loss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      if (!row.valid(t)) continue;
      StepCache c;
      c.t = t;
      c.x = static_cast<std::size_t>(row.values[t] - 1);
      c.h_prev = st.h;
      c.c_prev = st.c;
      gate_preactivations(st.h, c.x, z);
      c.gates = activate_gates(z);
      c.tanh_c.resize(H);
      for (std::size_t j = 0; j < H; ++j) {
        st.c[j] = c.gates.forget[j] * st.c[j] + c.gates.input[j] * c.gates.candidate[j];
        c.tanh_c[j] = std::tanh(st.c[j]);
        st.h[j] = c.gates.output[j] * c.tanh_c[j];
      }
      c.c = st.c;
      c.h = st.h;
      if (row.valid(t + 1)) {
        const auto col = static_cast<std::size_t>(row.keys[t + 1] - 1);
        double logit = bout[col];
        for (std::size_t j = 0; j < H; ++j) logit += st.h[j] * Wout.at(j, col);
        c.p = sigmoid(logit);
        const int label = row.response(t + 1);
        loss += ops::binary_cross_entropy(c.p, label);
        if (trace) {
          trace->probability[t] = c.p;
          trace->label[t] = label;
          trace->valid[t] = 1;
        }
      }
      if (backward) caches.push_back(std::move(c));
    }
    if (!backward) return loss;

    auto& gWx = params_[kInputWeight].grad;
    auto& gWh = params_[kHiddenWeight].grad;
    auto gb = params_[kGateBias].grad.values();
    auto& gOut = params_[kOutputWeight].grad;
    const Tensor& Wh = value(kHiddenWeight);

    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dh(H), dc(H), dz(4 * H);
    for (auto it = caches.rbegin(); it != caches.rend(); ++it) {
      const StepCache& c = *it;
      dh = dh_next;
      if (row.valid(c.t + 1)) {
        const auto col = static_cast<std::size_t>(row.keys[c.t + 1] - 1);
        const double dlogit = ops::bce_logit_grad(c.p, row.response(c.t + 1));
        params_[kOutputBias].grad[col] += dlogit;
        for (std::size_t j = 0; j < H; ++j) {
          gOut.at(j, col) += c.h[j] * dlogit;
          dh[j] += Wout.at(j, col) * dlogit;
        }
      }
      const auto& g = c.gates;
      for (std::size_t j = 0; j < H; ++j) {
        dc[j] = dc_next[j] + dh[j] * g.output[j] * (1.0 - c.tanh_c[j] * c.tanh_c[j]);
        dz[j] = dc[j] * g.candidate[j] * g.input[j] * (1.0 - g.input[j]);
        dz[H + j] = dc[j] * c.c_prev[j] * g.forget[j] * (1.0 - g.forget[j]);
        dz[2 * H + j] = dh[j] * c.tanh_c[j] * g.output[j] * (1.0 - g.output[j]);
        dz[3 * H + j] = dc[j] * g.input[j] * (1.0 - g.candidate[j] * g.candidate[j]);
        dc_next[j] = dc[j] * g.forget[j];
      }
      auto gx = gWx.row(c.x);
      for (std::size_t j = 0; j < 4 * H; ++j) {
        gx[j] += dz[j];
        gb[j] += dz[j];
      }
      for (std::size_t i = 0; i < H; ++i) {
        const auto w = Wh.row(i);
        auto gw = gWh.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < 4 * H; ++j) {
          gw[j] += c.h_prev[i] * dz[j];
          acc += w[j] * dz[j];
        }
        dh_next[i] = acc;
      }
    }
    return loss;
  }

  DktConfig cfg_;
};

}  // namespace kt
