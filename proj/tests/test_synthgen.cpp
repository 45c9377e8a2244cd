#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "kt/encoding.hpp"
#include "kt/synthgen.hpp"

namespace kt {
namespace {

TEST(ResponseProb, Examples) {
  EXPECT_EQ(response_prob(0.3, 0.3, 0.0), 0.5);
  EXPECT_EQ(response_prob(1.0, 1.0, 0.25), 0.625);
  EXPECT_EQ(response_prob(1e4, 0.0, 0.25), 1.0);
  EXPECT_THROW(response_prob(0, 0, 1.5), std::invalid_argument);
}

TEST(ResponseProb, MonotoneInAbility) {
  for (double g : {0.0, 0.25, 0.6}) {
    double prev = -1;
    for (double a = -6; a <= 6; a += 0.25) {
      const double p = response_prob(a, 0.4, g);
      EXPECT_GT(p, prev);
      prev = p;
    }
  }
}

TEST(Generate, PaperScaleShape) {
  SynthConfig c;
  c.train_students = 2000;
  c.test_students = 2000;
  const auto ds = generate(c);
  EXPECT_EQ(ds.train.size() + ds.test.size(), 4000u);
  EXPECT_EQ(count_records(ds.train) + count_records(ds.test), 200000u);
  std::set<int> tags;
  for (const auto& s : ds.train)
    for (const auto& x : s.interactions) tags.insert(x.exercise);
  EXPECT_EQ(tags.size(), 50u);
}

TEST(Generate, EveryStudentAnswersEveryExerciseOnceInSharedOrder) {
  const auto ds = generate(SynthConfig{});
  ASSERT_EQ(ds.train.size(), 400u);
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const auto& s : *split) {
      ASSERT_EQ(s.size(), 50u);
      for (std::size_t t = 0; t < 50; ++t) EXPECT_EQ(s.interactions[t].exercise, ds.order[t]);
    }
  }
  std::vector<int> sorted = ds.order;
  std::sort(sorted.begin(), sorted.end());
  for (int e = 1; e <= 50; ++e) EXPECT_EQ(sorted[static_cast<std::size_t>(e - 1)], e);
}

TEST(Generate, GroundTruthUsesEveryConcept) {
  const auto ds = generate(SynthConfig{});
  std::vector<int> count(6, 0);
  for (int c : ds.truth.concept_of) {
    ASSERT_GE(c, 1);
    ASSERT_LE(c, 5);
    ++count[static_cast<std::size_t>(c)];
  }
  for (int c = 1; c <= 5; ++c) EXPECT_EQ(count[static_cast<std::size_t>(c)], 10);
}

TEST(Generate, DeterministicUnderSeed) {
  SynthConfig c;
  c.seed = 17;
  const auto a = generate(c), b = generate(c);
  EXPECT_EQ(write_triplet_format(a.train), write_triplet_format(b.train));
  EXPECT_EQ(write_triplet_format(a.test), write_triplet_format(b.test));
  EXPECT_EQ(ground_truth_csv(a.truth), ground_truth_csv(b.truth));
  c.seed = 18;
  EXPECT_NE(write_triplet_format(generate(c).train), write_triplet_format(a.train));
}

TEST(Generate, GuessOneMeansAllCorrect) {
  SynthConfig c;
  c.guess = 1.0;
  c.train_students = c.test_students = 20;
  for (const auto& s : generate(c).train)
    for (const auto& x : s.interactions) EXPECT_EQ(x.response, 1);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  return 1 - 6 * d2 / (n * (n * n - 1));
}

TEST(Generate, CorrectnessFallsWithDifficulty) {
  SynthConfig c;
  c.train_students = 1000;
  c.test_students = 1;
  const auto ds = generate(c);
  std::vector<double> correct(50, 0.0);
  for (const auto& s : ds.train)
    for (const auto& x : s.interactions) correct[static_cast<std::size_t>(x.exercise - 1)] += x.response;
  EXPECT_LT(spearman(correct, ds.truth.difficulty), -0.5);
}

TEST(Generate, RejectsInvalidConfig) {
  SynthConfig c;
  c.concepts = 60;
  EXPECT_THROW(generate(c), std::invalid_argument);
  c = SynthConfig{};
  c.guess = -0.1;
  EXPECT_THROW(generate(c), std::invalid_argument);
}

TEST(GroundTruthCsv, RoundTrip) {
  const auto ds = generate(SynthConfig{});
  const auto parsed = parse_ground_truth_csv(ground_truth_csv(ds.truth));
  ASSERT_EQ(parsed.size(), 50u);
  for (std::size_t e = 0; e < 50; ++e) {
    EXPECT_EQ(parsed[e].first, static_cast<long long>(e + 1));
    EXPECT_EQ(parsed[e].second, ds.truth.concept_of[e]);
  }
}

}  // namespace
}  // namespace kt
