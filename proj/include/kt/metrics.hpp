// Evaluation and schedule primitives: ROC AUC, adjusted mutual information,
// learning-rate annealing, best-epoch selection, run statistics.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kt {

class SingleClassError : public std::invalid_argument {
 public:
  SingleClassError() : std::invalid_argument("AUC is undefined: labels contain a single class") {}
};

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Mann-Whitney statistic over midranks.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: scores and labels differ in length");
  std::size_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  const std::size_t n = labels.size();
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw SingleClassError();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    // 1-based midrank of the tie block [i, j].
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) positive_rank_sum += midrank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace detail {

struct Contingency {
  std::vector<double> row_sums, col_sums;
  std::vector<std::vector<double>> cells;
  double n = 0;
};

inline Contingency contingency(std::span<const int> a, std::span<const int> b) {
  std::map<int, std::size_t> ia, ib;
  for (int x : a) ia.emplace(x, ia.size());
  for (int x : b) ib.emplace(x, ib.size());
  // Re-index in sorted label order for deterministic layout.
  std::size_t k = 0;
  for (auto& [_, idx] : ia) idx = k++;
  k = 0;
  for (auto& [_, idx] : ib) idx = k++;
  Contingency c;
  c.row_sums.assign(ia.size(), 0.0);
  c.col_sums.assign(ib.size(), 0.0);
  c.cells.assign(ia.size(), std::vector<double>(ib.size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto r = ia[a[i]];
    const auto s = ib[b[i]];
    c.cells[r][s] += 1;
    c.row_sums[r] += 1;
    c.col_sums[s] += 1;
  }
  c.n = static_cast<double>(a.size());
  return c;
}

inline double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

/// Canonical relabeling by first occurrence.
inline std::vector<int> canonical_labels(std::span<const int> a) {
  std::map<int, int> seen;
  std::vector<int> out;
  out.reserve(a.size());
  for (int x : a) out.push_back(seen.emplace(x, static_cast<int>(seen.size())).first->second);
  return out;
}

}  // namespace detail

/// Mutual information (natural log) between two labelings.
inline double mutual_information(std::span<const int> a, std::span<const int> b) {
  const auto c = detail::contingency(a, b);
  double mi = 0.0;
  for (std::size_t i = 0; i < c.row_sums.size(); ++i) {
    for (std::size_t j = 0; j < c.col_sums.size(); ++j) {
      const double nij = c.cells[i][j];
      if (nij > 0) mi += (nij / c.n) * std::log(c.n * nij / (c.row_sums[i] * c.col_sums[j]));
    }
  }
  return mi;
}

/// Expected mutual information under the hypergeometric (fixed-marginals) model.
inline double expected_mutual_information(std::span<const int> a, std::span<const int> b) {
  const auto c = detail::contingency(a, b);
  const double n = c.n;
  double emi = 0.0;
  for (double ai : c.row_sums) {
    for (double bj : c.col_sums) {
      const double lo = std::max(1.0, ai + bj - n);
      const double hi = std::min(ai, bj);
      for (double nij = lo; nij <= hi; nij += 1.0) {
        const double log_p = std::lgamma(ai + 1) + std::lgamma(bj + 1) + std::lgamma(n - ai + 1) +
                             std::lgamma(n - bj + 1) - std::lgamma(n + 1) - std::lgamma(nij + 1) -
                             std::lgamma(ai - nij + 1) - std::lgamma(bj - nij + 1) -
                             std::lgamma(n - ai - bj + nij + 1);
        emi += (nij / n) * std::log(n * nij / (ai * bj)) * std::exp(log_p);
      }
    }
  }
  return emi;
}

/// AMI = (MI - E[MI]) / (max(H(a), H(b)) - E[MI]). Identical partitions (up to
/// relabeling) give exactly 1; a vanishing denominator otherwise gives 0.
inline double adjusted_mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("AMI: clusterings cover different element sets");
  if (a.empty()) throw std::invalid_argument("AMI: empty clustering");
  if (detail::canonical_labels(a) == detail::canonical_labels(b)) return 1.0;
  const auto c = detail::contingency(a, b);
  const double ha = detail::entropy(c.row_sums, c.n);
  const double hb = detail::entropy(c.col_sums, c.n);
  const double mi = mutual_information(a, b);
  const double emi = expected_mutual_information(a, b);
  const double denom = std::max(ha, hb) - emi;
  if (std::abs(denom) < 1e-15) return 0.0;
  return (mi - emi) / denom;
}

/// gamma / 1.5^floor(epoch / 20), frozen from epoch 100 on.
inline double lr_schedule(double initial, int epoch) {
  if (!(initial > 0)) throw std::invalid_argument("initial learning rate must be positive");
  const int capped = std::clamp(epoch, 0, 99);
  return initial / std::pow(1.5, capped / 20);
}

/// Argmax, earliest epoch on ties.
inline std::size_t select_best_epoch(std::span<const double> history) {
  if (history.empty()) throw std::invalid_argument("select_best_epoch: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] > history[best]) best = i;
  }
  return best;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
};

inline MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean_std: empty sample");
  MeanStd out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

/// Percent style used in result tables, e.g. "82.7±0.1".
inline std::string format_percent(const MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f±%.1f", 100.0 * m.mean, 100.0 * m.stddev);
  return buf;
}

}  // namespace kt
