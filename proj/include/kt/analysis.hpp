// Concept discovery from correlation weights and per-concept knowledge-state
// traces for a trained DKVMN.
#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kt/dkvmn.hpp"
#include "kt/encoding.hpp"
#include "kt/metrics.hpp"
#include "kt/model.hpp"

namespace kt {

struct ConceptDiscoveryReport {
  Tensor weights;                  // Q x N
  std::vector<int> cluster;        // per exercise, in [1, N]
  std::vector<double> max_weight;  // per exercise
  std::size_t nonempty_clusters = 0;
  std::optional<double> ami;
};

inline const DkvmnModel& require_dkvmn(const KnowledgeTracer& model) {
  const auto* dkvmn = dynamic_cast<const DkvmnModel*>(&model);
  if (!dkvmn) {
    throw std::invalid_argument("concept analysis requires a dkvmn model, got " + to_string(model.kind()));
  }
  return *dkvmn;
}

/// Row-wise argmax (lowest concept on ties) of a weight matrix.
inline ConceptDiscoveryReport cluster_by_argmax(Tensor weights, const std::vector<int>* truth) {
  ConceptDiscoveryReport rep;
  rep.weights = std::move(weights);
  std::set<int> used;
  for (std::size_t q = 0; q < rep.weights.rows(); ++q) {
    const auto row = rep.weights.row(q);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    rep.cluster.push_back(static_cast<int>(best) + 1);
    rep.max_weight.push_back(row[best]);
    used.insert(static_cast<int>(best) + 1);
  }
  rep.nonempty_clusters = used.size();
  if (truth) {
    if (truth->size() != rep.cluster.size()) {
      throw std::invalid_argument("ground truth covers " + std::to_string(truth->size()) + " exercises, model has " +
                                  std::to_string(rep.cluster.size()));
    }
    rep.ami = adjusted_mutual_information(rep.cluster, *truth);
  }
  return rep;
}

/// truth, when given, holds the concept of each dense exercise id (index q-1).
inline ConceptDiscoveryReport discover_concepts(const KnowledgeTracer& model,
                                                const std::vector<int>* truth = nullptr) {
  return cluster_by_argmax(require_dkvmn(model).correlation_weight_matrix(), truth);
}

struct KnowledgeStateTrace {
  std::vector<Interaction> interactions;
  /// states[0] is the initial state; states[t+1] follows the t-th write.
  std::vector<std::vector<double>> states;
};

inline KnowledgeStateTrace trace_knowledge_state(const KnowledgeTracer& model,
                                                 const std::vector<Interaction>& interactions) {
  const auto& dkvmn = require_dkvmn(model);
  KnowledgeStateTrace out;
  out.interactions = interactions;
  Tensor memory = dkvmn.initial_value_memory();
  out.states.push_back(dkvmn.depict_knowledge_state(memory));
  for (const auto& x : interactions) {
    dkvmn.write(memory, x.exercise, x.response);
    out.states.push_back(dkvmn.depict_knowledge_state(memory));
  }
  return out;
}

struct TraceSummary {
  std::size_t correct_steps = 0;
  std::size_t raised = 0;  // correct answers that raised the answered exercise's concept state
};

/// For each correct answer, checks whether the state of the exercise's
/// argmax concept went up.
inline TraceSummary summarize_trace(const KnowledgeStateTrace& trace, const ConceptDiscoveryReport& concepts) {
  TraceSummary s;
  for (std::size_t t = 0; t < trace.interactions.size(); ++t) {
    const auto& x = trace.interactions[t];
    if (!x.response) continue;
    const auto c = static_cast<std::size_t>(concepts.cluster[static_cast<std::size_t>(x.exercise - 1)] - 1);
    ++s.correct_steps;
    if (trace.states[t + 1][c] > trace.states[t][c]) ++s.raised;
  }
  return s;
}

namespace detail {
inline void append_value(std::ostringstream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8f", v);
  os << buf;
}
}  // namespace detail

/// Header: exercise,concept_1..concept_N; rows are exercises (original tags).
inline std::string weight_matrix_csv(const ConceptDiscoveryReport& rep, const Vocabulary* vocab = nullptr) {
  std::ostringstream os;
  os << "exercise";
  for (std::size_t c = 0; c < rep.weights.cols(); ++c) os << ",concept_" << (c + 1);
  os << '\n';
  for (std::size_t q = 0; q < rep.weights.rows(); ++q) {
    os << (vocab ? vocab->original_tag(static_cast<int>(q + 1)) : static_cast<long long>(q + 1));
    for (double w : rep.weights.row(q)) {
      os << ',';
      detail::append_value(os, w);
    }
    os << '\n';
  }
  return os.str();
}

inline std::string cluster_csv(const ConceptDiscoveryReport& rep, const Vocabulary* vocab = nullptr) {
  std::ostringstream os;
  os << "exercise,concept,max_weight\n";
  for (std::size_t q = 0; q < rep.cluster.size(); ++q) {
    os << (vocab ? vocab->original_tag(static_cast<int>(q + 1)) : static_cast<long long>(q + 1)) << ','
       << rep.cluster[q] << ',';
    detail::append_value(os, rep.max_weight[q]);
    os << '\n';
  }
  return os.str();
}

/// Rows are timesteps; step 0 is the initial state with empty exercise fields.
inline std::string trace_csv(const KnowledgeStateTrace& trace, const Vocabulary* vocab = nullptr) {
  std::ostringstream os;
  const std::size_t n = trace.states.empty() ? 0 : trace.states.front().size();
  os << "step,exercise,response";
  for (std::size_t c = 0; c < n; ++c) os << ",concept_" << (c + 1);
  os << '\n';
  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    os << t << ',';
    if (t > 0) {
      const auto& x = trace.interactions[t - 1];
      os << (vocab ? vocab->original_tag(x.exercise) : static_cast<long long>(x.exercise)) << ',' << x.response;
    } else {
      os << ',';
    }
    for (double v : trace.states[t]) {
      os << ',';
      detail::append_value(os, v);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace kt
