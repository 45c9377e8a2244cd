// Training orchestration: shuffled mini-batches, annealed SGD with momentum
// and global-norm clipping, per-epoch validation, best-checkpoint retention,
// early stopping, and repeated seeded runs.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kt/checkpoint.hpp"
#include "kt/diffcore.hpp"
#include "kt/encoding.hpp"
#include "kt/metrics.hpp"
#include "kt/model.hpp"

namespace kt {

struct TrainConfig {
  ModelKind kind = ModelKind::dkvmn;
  int width = 10;
  int memory_size = 5;
  int batch_size = 32;
  std::optional<double> learning_rate;  // per-kind default when unset
  int max_epochs = 100;
  int patience = 20;
  double sigma = 0.05;
  std::uint64_t seed = 1;
  double momentum = 0.9;
  double clip_threshold = 50.0;
  std::size_t max_len = 200;

  double initial_learning_rate() const {
    if (learning_rate) return *learning_rate;
    return kind == ModelKind::dkt ? 0.05 : 0.01;
  }

  void validate() const {
    if (width < 1 || memory_size < 1 || batch_size < 1 || max_epochs < 1 || patience < 1 || max_len < 1) {
      throw std::invalid_argument("train config: sizes and counts must be positive");
    }
    if (!(sigma > 0)) throw std::invalid_argument("train config: sigma must be positive");
    if (initial_learning_rate() < 0) throw std::invalid_argument("train config: learning rate must be non-negative");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean over scored points
  double train_auc = 0.0;
  double valid_auc = 0.0;
  double seconds = 0.0;
};

struct RunReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_valid_auc = 0.0;
  std::optional<double> test_auc;
  std::size_t parameter_count = 0;
  bool early_stopped = false;

  std::vector<double> valid_history() const {
    std::vector<double> out;
    for (const auto& e : epochs) out.push_back(e.valid_auc);
    return out;
  }
};

struct TrainResult {
  std::unique_ptr<KnowledgeTracer> best_model;
  RunReport report;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Evaluation {
  double auc = 0.0;
  double mean_loss = 0.0;
  std::vector<double> scores;
  std::vector<int> labels;
};

inline void collect_points(const PredictionTrace& trace, std::vector<double>& scores, std::vector<int>& labels) {
  for (std::size_t t = 0; t < trace.valid.size(); ++t) {
    if (!trace.valid[t]) continue;
    scores.push_back(trace.probability[t]);
    labels.push_back(trace.label[t]);
  }
}

/// Pooled AUC over every scored point of the dataset.
inline Evaluation evaluate(const KnowledgeTracer& model, const PaddedBatch& rows) {
  Evaluation ev;
  double loss = 0.0;
  PredictionTrace trace;
  for (const auto& row : rows) {
    loss += model.forward(row, &trace);
    collect_points(trace, ev.scores, ev.labels);
  }
  if (ev.scores.empty()) throw std::invalid_argument("evaluate: dataset has no scored points");
  ev.mean_loss = loss / static_cast<double>(ev.scores.size());
  ev.auc = auc(ev.scores, ev.labels);
  return ev;
}

inline TrainResult train(const TrainConfig& config, int num_exercises, const PaddedBatch& train_rows,
                         const PaddedBatch& valid_rows) {
  config.validate();
  if (train_rows.empty() || valid_rows.empty()) throw std::invalid_argument("train: empty train or validation set");
  auto model = make_model({config.kind, num_exercises, config.width, config.memory_size}, config.sigma, config.seed);
  auto& registry = model->params();
  OptimizerState opt(registry, config.momentum, config.clip_threshold);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x5851f42d4c957f2dULL);

  TrainResult result;
  result.report.parameter_count = registry.parameter_count();
  result.best_model = model->clone();
  double best_valid = -1.0;

  std::vector<std::size_t> order(train_rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  PredictionTrace trace;
  std::vector<double> scores;
  std::vector<int> labels;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = config.initial_learning_rate() > 0 ? lr_schedule(config.initial_learning_rate(), epoch) : 0.0;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    scores.clear();
    labels.clear();
    double epoch_loss = 0.0;

    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      registry.zero_grad();
      double batch_loss = 0.0;
      const std::size_t stop = std::min(order.size(), start + batch);
      for (std::size_t i = start; i < stop; ++i) {
        batch_loss += model->accumulate_gradients(train_rows[order[i]], &trace);
        collect_points(trace, scores, labels);
      }
      if (!std::isfinite(batch_loss) || !std::isfinite(registry.grad_norm())) {
        throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      epoch_loss += batch_loss;
      clip_global_norm(registry, config.clip_threshold);
      sgd_momentum_step(registry, opt, lr);
      for (const auto& p : registry) {
        if (!p.value.all_finite()) {
          throw DivergenceError("non-finite parameter " + p.name + " in epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(b));
        }
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = scores.empty() ? 0.0 : epoch_loss / static_cast<double>(scores.size());
    rec.train_auc = auc(scores, labels);
    rec.valid_auc = evaluate(*model, valid_rows).auc;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.report.epochs.push_back(rec);

    if (rec.valid_auc > best_valid) {
      best_valid = rec.valid_auc;
      result.report.best_epoch = static_cast<std::size_t>(epoch);
      result.best_model = model->clone();
    }
    if (epoch - static_cast<int>(result.report.best_epoch) >= config.patience) {
      result.report.early_stopped = true;
      break;
    }
  }
  result.report.best_valid_auc = best_valid;
  return result;
}

/// Comma-separated training curve: epoch, train loss, train AUC, valid AUC.
inline std::string curve_csv(const RunReport& report) {
  std::ostringstream os;
  os << "epoch,train_loss,train_auc,valid_auc\n";
  char buf[128];
  for (const auto& e : report.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.10f,%.10f,%.10f\n", e.epoch, e.train_loss, e.train_auc, e.valid_auc);
    os << buf;
  }
  return os.str();
}

struct RunOutcome {
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string error;
  RunReport report;
};

struct RepeatedRuns {
  std::vector<RunOutcome> runs;
  MeanStd test_auc;  // over runs that completed

  std::size_t diverged() const {
    std::size_t n = 0;
    for (const auto& r : runs) n += r.diverged;
    return n;
  }
};

/// Independent train + evaluate cycles, one per seed.
inline RepeatedRuns repeated_runs(const TrainConfig& config, std::span<const std::uint64_t> seeds, int num_exercises,
                                  const PaddedBatch& train_rows, const PaddedBatch& valid_rows,
                                  const PaddedBatch& test_rows) {
  if (seeds.size() < 2) throw std::invalid_argument("repeated_runs: need at least 2 runs");
  RepeatedRuns out;
  std::vector<double> aucs;
  for (auto seed : seeds) {
    RunOutcome run;
    run.seed = seed;
    TrainConfig cfg = config;
    cfg.seed = seed;
    try {
      auto result = train(cfg, num_exercises, train_rows, valid_rows);
      result.report.test_auc = evaluate(*result.best_model, test_rows).auc;
      aucs.push_back(*result.report.test_auc);
      run.report = std::move(result.report);
    } catch (const DivergenceError& e) {
      run.diverged = true;
      run.error = e.what();
    }
    out.runs.push_back(std::move(run));
  }
  if (!aucs.empty()) out.test_auc = mean_std(aucs);
  return out;
}

inline std::vector<std::uint64_t> consecutive_seeds(std::uint64_t first, std::size_t k) {
  std::vector<std::uint64_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = first + i;
  return out;
}

}  // namespace kt
