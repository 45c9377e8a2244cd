// Common interface shared by the three knowledge-tracing models.
#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "kt/diffcore.hpp"
#include "kt/encoding.hpp"

namespace kt {

enum class ModelKind { dkvmn, mann, dkt };

inline std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::dkvmn: return "dkvmn";
    case ModelKind::mann: return "mann";
    case ModelKind::dkt: return "dkt";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "dkvmn") return ModelKind::dkvmn;
  if (s == "mann") return ModelKind::mann;
  if (s == "dkt") return ModelKind::dkt;
  throw std::invalid_argument("unknown model kind '" + s + "' (expected dkvmn, mann or dkt)");
}

/// Per-timestep prediction scores with a validity mask. A scored point at t
/// pairs probability[t] with label[t]; unscored points have valid[t] == 0.
struct PredictionTrace {
  std::vector<double> probability;
  std::vector<int> label;
  std::vector<std::uint8_t> valid;

  explicit PredictionTrace(std::size_t length = 0)
      : probability(length, 0.0), label(length, 0), valid(length, 0) {}

  std::size_t scored_points() const noexcept {
    std::size_t n = 0;
    for (auto v : valid) n += v;
    return n;
  }
};

using ConfigMap = std::map<std::string, long long>;

/// A sequence model trained by summed binary cross-entropy over scored points.
class KnowledgeTracer {
 public:
  virtual ~KnowledgeTracer() = default;

  virtual ModelKind kind() const noexcept = 0;
  virtual int num_exercises() const noexcept = 0;

  /// Integer configuration block used by checkpoints.
  virtual ConfigMap config() const = 0;

  /// Loss over the scored points of a row; fills trace when non-null.
  virtual double forward(const PaddedRow& row, PredictionTrace* trace) const = 0;

  /// Same as forward, and adds d(loss)/d(theta) into the registry gradients.
  virtual double accumulate_gradients(const PaddedRow& row, PredictionTrace* trace) = 0;

  virtual std::unique_ptr<KnowledgeTracer> clone() const = 0;

  ParamRegistry& params() noexcept { return params_; }
  const ParamRegistry& params() const noexcept { return params_; }

 protected:
  void require_row(const PaddedRow& row) const {
    if (row.num_exercises != num_exercises()) {
      throw std::invalid_argument("row vocabulary (" + std::to_string(row.num_exercises) +
                                  ") does not match model vocabulary (" +
                                  std::to_string(num_exercises()) + ")");
    }
  }

  ParamRegistry params_;
};

}  // namespace kt
