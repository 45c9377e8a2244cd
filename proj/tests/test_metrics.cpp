#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "kt/metrics.hpp"

namespace kt {
namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1;
      if (s[i] > s[j]) wins += 1;
      if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{0, 1, 1}), 0.5);
}

TEST(Auc, SingleClassRejected) {
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), SingleClassError);
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}), SingleClassError);
  EXPECT_THROW(auc(std::vector<double>{0.1}, std::vector<int>{2}), std::invalid_argument);
}

TEST(Auc, MatchesPairwiseOracleWithTies) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<double> s(n);
    std::vector<int> y(n);
    const int levels = 1 + static_cast<int>(rng() % 20);  // few levels force ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % static_cast<unsigned>(levels)) / levels;
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(auc(s, y), pairwise_auc(s, y), 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(80), t(80);
  std::vector<int> y(80);
  for (std::size_t i = 0; i < 80; ++i) {
    s[i] = u(rng);
    t[i] = std::exp(3 * s[i]) - 7;
    y[i] = u(rng) < s[i];
  }
  EXPECT_EQ(auc(s, y), auc(t, y));
}

// Expected MI by enumerating every permutation of b: the fixed-marginals model
// is the uniform distribution over these.
double brute_force_ami(std::vector<int> a, std::vector<int> b) {
  auto entropy = [](const std::vector<int>& x) {
    std::map<int, double> c;
    for (int v : x) c[v] += 1;
    double h = 0;
    for (auto& [_, k] : c) h -= k / x.size() * std::log(k / x.size());
    return h;
  };
  auto mi = [](const std::vector<int>& x, const std::vector<int>& y) {
    std::map<int, double> cx, cy;
    std::map<std::pair<int, int>, double> cxy;
    for (std::size_t i = 0; i < x.size(); ++i) {
      cx[x[i]] += 1;
      cy[y[i]] += 1;
      cxy[{x[i], y[i]}] += 1;
    }
    const double n = static_cast<double>(x.size());
    double m = 0;
    for (auto& [k, v] : cxy) m += v / n * std::log(n * v / (cx[k.first] * cy[k.second]));
    return m;
  };
  std::vector<std::size_t> perm(b.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  double total = 0, count = 0;
  do {
    std::vector<int> pb(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) pb[i] = b[perm[i]];
    total += mi(a, pb);
    count += 1;
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double emi = total / count;
  return (mi(a, b) - emi) / (std::max(entropy(a), entropy(b)) - emi);
}

TEST(Ami, IdenticalPartitionsUpToRelabeling) {
  const std::vector<int> a{1, 1, 2, 2, 3}, b{7, 7, 4, 4, 9};
  EXPECT_EQ(adjusted_mutual_information(a, b), 1.0);
  EXPECT_EQ(adjusted_mutual_information(a, a), 1.0);
}

TEST(Ami, CrossedPartitionsOfFour) {
  const std::vector<int> a{1, 1, 2, 2}, b{1, 2, 1, 2};
  EXPECT_NEAR(mutual_information(a, b), 0.0, 1e-15);
  EXPECT_NEAR(expected_mutual_information(a, b), std::log(2.0) / 3, 1e-12);
  EXPECT_NEAR(adjusted_mutual_information(a, b), -0.5, 1e-12);
  EXPECT_NEAR(adjusted_mutual_information(a, b), brute_force_ami(a, b), 1e-12);
}

TEST(Ami, MatchesBruteForceOnSmallRandomInstances) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 4 + rng() % 4;
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = static_cast<int>(rng() % 3);
    for (auto& v : b) v = static_cast<int>(rng() % 3);
    a[0] = 0;
    a[1] = 1;
    b[0] = 0;
    b[1] = 1;
    if (detail::canonical_labels(a) == detail::canonical_labels(b)) continue;
    EXPECT_NEAR(adjusted_mutual_information(a, b), brute_force_ami(a, b), 1e-10);
  }
}

TEST(Ami, SymmetricAndRelabelInvariant) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> a(50), b(50);
    for (auto& v : a) v = 1 + static_cast<int>(rng() % 5);
    for (auto& v : b) v = 1 + static_cast<int>(rng() % 5);
    std::vector<int> relabeled(b);
    for (auto& v : relabeled) v = 10 - v;
    const double x = adjusted_mutual_information(a, b);
    EXPECT_NEAR(x, adjusted_mutual_information(b, a), 1e-12);
    EXPECT_NEAR(x, adjusted_mutual_information(a, relabeled), 1e-12);
    EXPECT_LT(x, 1.0);
  }
}

TEST(Ami, RejectsMismatchedSizes) {
  EXPECT_THROW(adjusted_mutual_information(std::vector<int>{1, 2}, std::vector<int>{1}), std::invalid_argument);
}

TEST(Schedule, SpotValues) {
  EXPECT_EQ(lr_schedule(0.3, 0), 0.3);
  EXPECT_EQ(lr_schedule(0.3, 19), 0.3);
  EXPECT_EQ(lr_schedule(0.3, 20), 0.3 / 1.5);
  EXPECT_NEAR(lr_schedule(0.03, 25), 0.02, 1e-17);
  EXPECT_EQ(lr_schedule(0.3, 45), 0.3 / (1.5 * 1.5));
  EXPECT_EQ(lr_schedule(0.3, 99), lr_schedule(0.3, 119));
  EXPECT_EQ(lr_schedule(0.3, 99), 0.3 / std::pow(1.5, 4));
  EXPECT_THROW(lr_schedule(0.0, 1), std::invalid_argument);
}

TEST(BestEpoch, Examples) {
  EXPECT_EQ(select_best_epoch(std::vector<double>{0.6, 0.7, 0.7, 0.65}), 1u);
  EXPECT_EQ(select_best_epoch(std::vector<double>{0.5}), 0u);
  EXPECT_EQ(select_best_epoch(std::vector<double>{0.5, 0.6, 0.55, 0.61}), 3u);
  EXPECT_THROW(select_best_epoch(std::vector<double>{}), std::invalid_argument);
}

TEST(MeanStd, Examples) {
  const auto m = mean_std(std::vector<double>{0.80, 0.82});
  EXPECT_NEAR(m.mean, 0.81, 1e-15);
  EXPECT_NEAR(m.stddev, 0.014142135623730963, 1e-15);
  EXPECT_EQ(format_percent({0.8271, 0.0012}), "82.7±0.1");
  EXPECT_EQ(mean_std(std::vector<double>{0.5, 0.5, 0.5}).stddev, 0.0);
}

}  // namespace
}  // namespace kt
