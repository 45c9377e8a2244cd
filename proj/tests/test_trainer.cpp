#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "kt/checkpoint.hpp"
#include "kt/synthgen.hpp"
#include "kt/trainer.hpp"
#include "test_util.hpp"

namespace kt {
namespace {

struct SmallData {
  PaddedBatch train, valid, test;
  Vocabulary vocab;
  int Q = 0;
};

SmallData small_data(std::uint64_t seed = 3) {
  SynthConfig c;
  c.train_students = 60;
  c.test_students = 30;
  c.exercises = 10;
  c.concepts = 2;
  c.sequence_length = 20;
  c.guess = 0.0;
  c.seed = seed;
  const auto ds = generate(c);
  SmallData d;
  d.Q = 10;
  d.vocab = Vocabulary::build(ds.train);
  auto [tr, va] = split_train_valid(ds.train, 0.2, seed);
  d.train = pad_dataset(tr, d.Q, 20);
  d.valid = pad_dataset(va, d.Q, 20);
  d.test = pad_dataset(ds.test, d.Q, 20);
  return d;
}

TrainConfig small_config(ModelKind kind) {
  TrainConfig c;
  c.kind = kind;
  c.width = 4;
  c.memory_size = 3;
  c.batch_size = 8;
  c.max_epochs = 4;
  c.sigma = 0.3;
  c.learning_rate = 0.01;
  return c;
}

bool same_parameters(const KnowledgeTracer& a, const KnowledgeTracer& b) {
  const auto& pa = a.params();
  const auto& pb = b.params();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!(pa[i].value == pb[i].value)) return false;
  }
  return true;
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  const auto d = small_data();
  for (auto kind : {ModelKind::dkvmn, ModelKind::mann, ModelKind::dkt}) {
    auto c = small_config(kind);
    c.learning_rate = 0.0;
    c.max_epochs = 2;
    const auto res = train(c, d.Q, d.train, d.valid);
    const auto init = make_model({kind, d.Q, c.width, c.memory_size}, c.sigma, c.seed);
    EXPECT_TRUE(same_parameters(*res.best_model, *init)) << to_string(kind);
  }
}

TEST(Train, DeterministicUnderSeed) {
  const auto d = small_data();
  for (auto kind : {ModelKind::dkvmn, ModelKind::mann, ModelKind::dkt}) {
    const auto c = small_config(kind);
    const auto a = train(c, d.Q, d.train, d.valid);
    const auto b = train(c, d.Q, d.train, d.valid);
    EXPECT_EQ(curve_csv(a.report), curve_csv(b.report));
    EXPECT_EQ(a.report.best_epoch, b.report.best_epoch);
    EXPECT_TRUE(same_parameters(*a.best_model, *b.best_model));
  }
}

TEST(Train, BestModelMatchesBestEpochValidation) {
  const auto d = small_data();
  const auto res = train(small_config(ModelKind::dkvmn), d.Q, d.train, d.valid);
  const auto hist = res.report.valid_history();
  EXPECT_EQ(res.report.best_epoch, select_best_epoch(hist));
  EXPECT_EQ(evaluate(*res.best_model, d.valid).auc, res.report.best_valid_auc);
}

TEST(Train, TrainingLossFalls) {
  const auto d = small_data();
  auto c = small_config(ModelKind::dkvmn);
  c.max_epochs = 6;
  c.learning_rate = 0.02;
  const auto res = train(c, d.Q, d.train, d.valid);
  ASSERT_EQ(res.report.epochs.size(), 6u);
  EXPECT_LT(res.report.epochs[5].train_loss, res.report.epochs[0].train_loss);
}

TEST(Train, EarlyStopsAfterPatience) {
  const auto d = small_data();
  auto c = small_config(ModelKind::dkvmn);
  c.learning_rate = 0.0;  // validation AUC never improves after epoch 0
  c.max_epochs = 10;
  c.patience = 2;
  const auto res = train(c, d.Q, d.train, d.valid);
  EXPECT_TRUE(res.report.early_stopped);
  EXPECT_EQ(res.report.epochs.size(), 3u);
  EXPECT_EQ(res.report.best_epoch, 0u);
}

TEST(Train, DivergenceIsReported) {
  const auto d = small_data();
  auto c = small_config(ModelKind::dkt);
  c.learning_rate = 1e308;  // first step overflows the parameters
  try {
    train(c, d.Q, d.train, d.valid);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Train, ParameterCount) {
  // A 50x10, B 100x10, key and value memory 5x10 each, W1 20x10 + 10,
  // W2 10 + 1, E and D 10x10 + 10 each.
  const std::size_t expected = 500 + 1000 + 50 + 50 + 200 + 10 + 10 + 1 + 110 + 110;
  auto m = make_model({ModelKind::dkvmn, 50, 10, 5}, 0.05, 1);
  EXPECT_EQ(m->params().parameter_count(), expected);
  // LSTM: W_x 100x40, W_h 10x40, b 40, W_out 10x50, b_out 50.
  auto dkt = make_model({ModelKind::dkt, 50, 10, 5}, 0.05, 1);
  EXPECT_EQ(dkt->params().parameter_count(), 4000u + 400 + 40 + 500 + 50);
}

TEST(Evaluate, ConstantModelScoresHalf) {
  const auto d = small_data();
  DkvmnModel m(DkvmnConfig::with_width(d.Q, 3, 4), 0.3, 1);
  m.value(DkvmnModel::kOutputWeight).fill(0.0);
  m.value(DkvmnModel::kOutputBias).fill(0.0);
  const auto ev = evaluate(m, d.test);
  EXPECT_EQ(ev.auc, 0.5);
  EXPECT_NEAR(ev.mean_loss, std::log(2.0), 1e-12);
}

TEST(RepeatedRuns, IdenticalSeedsGiveZeroSpread) {
  const auto d = small_data();
  auto c = small_config(ModelKind::dkvmn);
  c.max_epochs = 2;
  const std::vector<std::uint64_t> same{5, 5};
  const auto runs = repeated_runs(c, same, d.Q, d.train, d.valid, d.test);
  EXPECT_EQ(runs.test_auc.stddev, 0.0);
  EXPECT_EQ(runs.diverged(), 0u);
  const std::vector<std::uint64_t> one{5};
  EXPECT_THROW(repeated_runs(c, one, d.Q, d.train, d.valid, d.test), std::invalid_argument);
  EXPECT_EQ(consecutive_seeds(3, 3), (std::vector<std::uint64_t>{3, 4, 5}));
}

TEST(CurveCsv, Format) {
  RunReport r;
  r.epochs.push_back({0, 0.5, 0.6, 0.7, 1.0});
  EXPECT_EQ(curve_csv(r), "epoch,train_loss,train_auc,valid_auc\n0,0.5000000000,0.6000000000,0.7000000000\n");
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Vocabulary vocab(std::vector<long long>{3, 9, 11, 40, 41});
  for (auto kind : {ModelKind::dkvmn, ModelKind::mann, ModelKind::dkt}) {
    auto m = make_model({kind, 5, 4, 3}, 0.7, 11);
    const auto text = save_checkpoint(*m, vocab);
    const auto loaded = load_checkpoint(text);
    EXPECT_EQ(loaded.model->kind(), kind);
    EXPECT_EQ(loaded.vocabulary.tags(), vocab.tags());
    EXPECT_EQ(loaded.model->config(), m->config());
    ASSERT_EQ(loaded.model->params().size(), m->params().size());
    for (std::size_t i = 0; i < m->params().size(); ++i) {
      const auto a = m->params()[i].value.values();
      const auto b = loaded.model->params()[i].value.values();
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(test::bits(a[j]), test::bits(b[j]));
    }
    EXPECT_EQ(save_checkpoint(*loaded.model, loaded.vocabulary), text);
  }
}

TEST(Checkpoint, RejectsMalformedInput) {
  EXPECT_THROW(load_checkpoint("hello"), CheckpointError);
  EXPECT_THROW(load_checkpoint("kt-checkpoint 2\n"), CheckpointError);
  auto m = make_model({ModelKind::dkt, 5, 4, 3}, 0.7, 11);
  auto text = save_checkpoint(*m, Vocabulary(std::vector<long long>{1, 2, 3, 4, 5}));
  EXPECT_THROW(load_checkpoint(text.substr(0, text.size() / 2)), CheckpointError);
  auto bad = text;
  bad.replace(bad.find("vocab 5"), 7, "vocab 4");
  EXPECT_THROW(load_checkpoint(bad), CheckpointError);
}

}  // namespace
}  // namespace kt
