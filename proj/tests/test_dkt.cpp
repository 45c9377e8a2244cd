#include <gtest/gtest.h>

#include <cmath>

#include "kt/dkt.hpp"
#include "test_util.hpp"

namespace kt {
namespace {

DktModel tiny_dkt(int Q, int H, std::uint64_t seed, double sigma = 0.5) {
  return DktModel(DktConfig{Q, H}, sigma, seed);
}

TEST(Dkt, ZeroOutputLayerGivesHalf) {
  auto m = tiny_dkt(4, 3, 1);
  m.value(DktModel::kOutputWeight).fill(0.0);
  m.value(DktModel::kOutputBias).fill(0.0);
  auto st = m.initial_state();
  for (double p : m.lstm_step(st, 2)) EXPECT_EQ(p, 0.5);
  EXPECT_NEAR(m.forward(test::random_row(4, 5, 5, 1), nullptr), 4 * std::log(2.0), 1e-12);
}

TEST(Dkt, ZeroWeightsKeepStateAtZero) {
  auto m = tiny_dkt(4, 3, 1);
  for (auto& p : m.params()) p.value.fill(0.0);
  auto st = m.initial_state();
  m.lstm_step(st, 5);
  for (double v : st.h) EXPECT_EQ(v, 0.0);
  for (double v : st.c) EXPECT_EQ(v, 0.0);
}

TEST(Dkt, ForgetBiasStartsAtOne) {
  auto m = tiny_dkt(4, 3, 1);
  const auto b = m.value(DktModel::kGateBias).values();
  for (std::size_t j = 3; j < 6; ++j) EXPECT_EQ(b[j], 1.0);
}

TEST(Dkt, GatesBounded) {
  auto m = tiny_dkt(6, 5, 3, 3.0);
  auto st = m.initial_state();
  for (int x = 1; x <= 12; ++x) {
    LstmGates g;
    m.lstm_step(st, x, &g);
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_GT(g.input[j], 0.0);
      EXPECT_LT(g.input[j], 1.0);
      EXPECT_GT(g.forget[j], 0.0);
      EXPECT_LT(g.forget[j], 1.0);
      EXPECT_GT(g.output[j], 0.0);
      EXPECT_LT(g.output[j], 1.0);
      EXPECT_GT(g.candidate[j], -1.0);
      EXPECT_LT(g.candidate[j], 1.0);
    }
  }
  EXPECT_THROW(m.lstm_step(st, 0), std::out_of_range);
  EXPECT_THROW(m.lstm_step(st, 13), std::out_of_range);
}

TEST(Dkt, PaddedTailDoesNotChangeLoss) {
  auto m = tiny_dkt(5, 4, 2);
  const auto short_row = test::random_row(5, 6, 6, 9);
  const auto long_row = test::random_row(5, 6, 15, 9);
  EXPECT_EQ(test::bits(m.forward(short_row, nullptr)), test::bits(m.forward(long_row, nullptr)));
}

double oracle_dkt_loss(const DktModel& m, const PaddedRow& row) {
  const int Q = m.dkt_config().num_exercises, H = m.dkt_config().hidden;
  const Tensor& Wx = m.value(DktModel::kInputWeight);
  const Tensor& Wh = m.value(DktModel::kHiddenWeight);
  const Tensor& b = m.value(DktModel::kGateBias);
  const Tensor& Wo = m.value(DktModel::kOutputWeight);
  auto sig = [](double z) { return 1 / (1 + std::exp(-z)); };
  std::vector<double> h(H, 0.0), c(H, 0.0);
  double loss = 0;
  std::size_t T = 0;
  while (T < row.length() && row.mask[T]) ++T;
  for (std::size_t t = 0; t < T; ++t) {
    // one-hot input times the full input matrix
    std::vector<double> onehot(2 * Q, 0.0);
    onehot[row.values[t] - 1] = 1.0;
    std::vector<double> z(4 * H);
    for (int o = 0; o < 4 * H; ++o) {
      z[o] = b[o];
      for (int k = 0; k < 2 * Q; ++k) z[o] += onehot[k] * Wx.at(k, o);
      for (int k = 0; k < H; ++k) z[o] += h[k] * Wh.at(k, o);
    }
    for (int j = 0; j < H; ++j) {
      c[j] = sig(z[H + j]) * c[j] + sig(z[j]) * std::tanh(z[3 * H + j]);
      h[j] = sig(z[2 * H + j]) * std::tanh(c[j]);
    }
    if (t + 1 < T) {
      const int qn = row.keys[t + 1];
      const int rn = row.values[t + 1] > Q ? 1 : 0;
      double zz = m.value(DktModel::kOutputBias)[static_cast<std::size_t>(qn - 1)];
      for (int j = 0; j < H; ++j) zz += h[j] * Wo.at(j, qn - 1);
      const double p = sig(zz);
      loss += -(rn * std::log(p) + (1 - rn) * std::log(1 - p));
    }
  }
  return loss;
}

TEST(Dkt, LossMatchesStraightLineOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto m = tiny_dkt(3, 2, seed);
    const auto row = test::random_row(3, 5, 5, seed + 7);
    EXPECT_NEAR(m.forward(row, nullptr), oracle_dkt_loss(m, row), 1e-10);
  }
  auto m = tiny_dkt(8, 6, 4);
  const auto row = test::random_row(8, 18, 20, 2);
  EXPECT_NEAR(m.forward(row, nullptr), oracle_dkt_loss(m, row), 1e-10);
}

TEST(Dkt, GradientMatchesCentralDifferences) {
  auto m = tiny_dkt(5, 4, 41);
  const auto row = test::random_row(5, 6, 6, 17);
  auto rep = finite_diff_gradcheck(m.params(), test::loss_fn(m, row));
  EXPECT_LT(rep.max_rel_error, 1e-4);
}

}  // namespace
}  // namespace kt
