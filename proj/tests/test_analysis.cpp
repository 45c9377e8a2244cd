#include <gtest/gtest.h>

#include "kt/analysis.hpp"
#include "kt/checkpoint.hpp"
#include "test_util.hpp"

namespace kt {
namespace {

DkvmnModel model(int Q = 6, int N = 4, std::uint64_t seed = 2) {
  return DkvmnModel(DkvmnConfig::with_width(Q, N, 3), 0.8, seed);
}

TEST(Discover, IdenticalKeysPutEverythingInFirstConcept) {
  auto m = model();
  auto& keys = m.value(DkvmnModel::kKeyMemory);
  for (std::size_t i = 1; i < keys.rows(); ++i)
    for (std::size_t j = 0; j < keys.cols(); ++j) keys.at(i, j) = keys.at(0, j);
  const auto rep = discover_concepts(m);
  for (int c : rep.cluster) EXPECT_EQ(c, 1);
  EXPECT_EQ(rep.nonempty_clusters, 1u);
  EXPECT_FALSE(rep.ami.has_value());
}

TEST(Discover, ClustersFollowRowArgmax) {
  const Tensor w = Tensor::matrix({{0.1, 0.7, 0.2}, {0.5, 0.3, 0.2}, {0.2, 0.2, 0.6}, {0.4, 0.4, 0.2}});
  const std::vector<int> truth{2, 1, 3, 1};
  const auto rep = cluster_by_argmax(w, &truth);
  EXPECT_EQ(rep.cluster, (std::vector<int>{2, 1, 3, 1}));
  EXPECT_EQ(rep.max_weight, (std::vector<double>{0.7, 0.5, 0.6, 0.4}));
  EXPECT_EQ(rep.nonempty_clusters, 3u);
  EXPECT_EQ(*rep.ami, 1.0);
}

TEST(Discover, PermutingExercisesPermutesClusters) {
  auto m = model(6, 4, 5);
  auto perm = m;
  // Reverse exercise embedding rows.
  auto& A = perm.value(DkvmnModel::kExerciseEmbedding);
  const Tensor orig = m.value(DkvmnModel::kExerciseEmbedding);
  for (std::size_t q = 0; q < 6; ++q)
    for (std::size_t j = 0; j < A.cols(); ++j) A.at(q, j) = orig.at(5 - q, j);
  const auto a = discover_concepts(m), b = discover_concepts(perm);
  for (std::size_t q = 0; q < 6; ++q) EXPECT_EQ(a.cluster[q], b.cluster[5 - q]);
}

TEST(Discover, RejectsOtherModels) {
  auto mann = make_model({ModelKind::mann, 5, 4, 3}, 0.1, 1);
  EXPECT_THROW(discover_concepts(*mann), std::invalid_argument);
  auto m = model();
  const std::vector<int> short_truth{1, 2};
  EXPECT_THROW(discover_concepts(m, &short_truth), std::invalid_argument);
}

TEST(Trace, LengthAndRange) {
  const auto m = model();
  std::vector<Interaction> xs;
  for (int t = 0; t < 50; ++t) xs.push_back({1 + t % 6, t % 3 == 0});
  const auto tr = trace_knowledge_state(m, xs);
  ASSERT_EQ(tr.states.size(), 51u);
  for (const auto& s : tr.states) {
    ASSERT_EQ(s.size(), 4u);
    for (double v : s) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Trace, MatchesDirectWriteAndDepict) {
  const auto m = model();
  const std::vector<Interaction> xs{{2, 1}, {5, 0}, {2, 1}};
  const auto tr = trace_knowledge_state(m, xs);
  Tensor memory = m.initial_value_memory();
  EXPECT_EQ(tr.states[0], m.depict_knowledge_state(memory));
  for (std::size_t t = 0; t < xs.size(); ++t) {
    m.write(memory, xs[t].exercise, xs[t].response);
    EXPECT_EQ(tr.states[t + 1], m.depict_knowledge_state(memory));
  }
}

TEST(Trace, CsvLayout) {
  const auto m = model(3, 2);
  const Vocabulary vocab(std::vector<long long>{10, 20, 30});
  const auto tr = trace_knowledge_state(m, {{3, 1}});
  const auto csv = trace_csv(tr, &vocab);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,exercise,response,concept_1,concept_2");
  EXPECT_NE(csv.find("\n0,,,"), std::string::npos);
  EXPECT_NE(csv.find("\n1,30,1,"), std::string::npos);
}

TEST(Summary, CountsRaisedStates) {
  KnowledgeStateTrace tr;
  tr.interactions = {{1, 1}, {2, 0}, {2, 1}};
  tr.states = {{0.5, 0.5}, {0.6, 0.5}, {0.6, 0.4}, {0.6, 0.3}};
  ConceptDiscoveryReport rep;
  rep.cluster = {1, 2};
  const auto s = summarize_trace(tr, rep);
  EXPECT_EQ(s.correct_steps, 2u);
  EXPECT_EQ(s.raised, 1u);
}

}  // namespace
}  // namespace kt
