#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fsprune/models.hpp"
#include "fsprune/trainer.hpp"

namespace fsprune {
namespace {

const LabeledDataset& train_blobs() {
  static const LabeledDataset d = synthetic_blobs(10, 20, {1, 28, 28}, 42);
  return d;
}

const LabeledDataset& test_blobs() {
  static const LabeledDataset d = synthetic_blobs(10, 6, {1, 28, 28}, 42);
  return d;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.seed = 3;
  c.reg = {RegMode::ratio, 0.5};
  c.prune.threshold = 0.01;
  return c;
}

TEST(TrainConfig, ValidateRejectsBadSettings) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epochs = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.reg.lambda = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.model = "resnet";
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Training, AblationNoneEqualsRatioWithZeroLambda) {
  TrainConfig none = small_config();
  none.reg = {RegMode::none, 0.0};
  TrainConfig zero = small_config();
  zero.reg = {RegMode::ratio, 0.0};
  const TrainState a = run_training(none, train_blobs(), test_blobs());
  const TrainState b = run_training(zero, train_blobs(), test_blobs());
  ASSERT_EQ(a.history.size(), 3u);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.mask.flags(), b.mask.flags());
  const auto pa = a.network.parameters();
  const auto pb = b.network.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]) << i;
}

TEST(Training, DeterministicForFixedSeed) {
  const TrainState a = run_training(small_config(), train_blobs(), test_blobs());
  const TrainState b = run_training(small_config(), train_blobs(), test_blobs());
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(*a.network.parameters()[2], *b.network.parameters()[2]);
  TrainConfig other = small_config();
  other.seed = 4;
  EXPECT_NE(run_training(other, train_blobs(), test_blobs()).history, a.history);
}

TEST(Training, LearnsSyntheticBlobs) {
  TrainConfig c = small_config();
  c.reg = {RegMode::none, 0.0};
  c.prune_enabled = false;
  const TrainState s = run_training(c, train_blobs(), test_blobs());
  EXPECT_LT(s.history.back().loss_task, s.history.front().loss_task);
  EXPECT_LE(evaluate(s.network, train_blobs()), 5.0);
}

TEST(Training, HistoryBookkeeping) {
  const TrainConfig c = small_config();
  const TrainState s = run_training(c, train_blobs(), test_blobs());
  ASSERT_EQ(s.history.size(), 3u);
  ASSERT_EQ(s.events.size(), 3u);
  for (std::size_t e = 0; e < s.history.size(); ++e) {
    const EpochMetrics& m = s.history[e];
    EXPECT_EQ(m.epoch, static_cast<int>(e + 1));
    EXPECT_EQ(m.loss_all, m.loss_task + 0.5 * m.loss_reg);
    EXPECT_EQ(m.active_counts, s.events[e].active_counts_after);
    if (e > 0) {
      for (std::size_t l = 0; l < m.active_counts.size(); ++l) {
        EXPECT_LE(m.active_counts[l], s.history[e - 1].active_counts[l]);
      }
    }
  }
  EXPECT_EQ(s.history.back().test_error_pct, evaluate(s.network, test_blobs()));
}

TEST(Training, ChecksPrunedKernelsStayZero) {
  TrainConfig c = small_config();
  c.prune.threshold = 0.1;
  c.epochs = 1;
  TrainState s = run_training(c, train_blobs(), test_blobs());
  const KernelMask after_first = s.mask;
  ASSERT_LT(after_first.active_count(), 70u);
  c.epochs = 6;
  c.prune_enabled = false;
  run_training(s, c, train_blobs(), test_blobs());
  EXPECT_EQ(s.history.size(), 6u);
  EXPECT_EQ(s.mask.flags(), after_first.flags());
  for (std::size_t l = 0; l < s.network.conv_count(); ++l) {
    const ConvLayer& conv = s.network.conv(l);
    const std::size_t vol = conv.kernel_volume();
    for (std::size_t k = 0; k < conv.kernel_count(); ++k) {
      if (after_first.is_active(l, k)) continue;
      for (std::size_t i = 0; i < vol; ++i) ASSERT_EQ(conv.weights[k * vol + i], 0.0);
      EXPECT_EQ(conv.bias[k], 0.0);
    }
  }
}

TEST(Training, ResumeMatchesUninterruptedRun) {
  TrainConfig c = small_config();
  c.epochs = 4;
  const TrainState full = run_training(c, train_blobs(), test_blobs());
  c.epochs = 2;
  TrainState part = run_training(c, train_blobs(), test_blobs());
  c.epochs = 4;
  run_training(part, c, train_blobs(), test_blobs());
  EXPECT_EQ(part.history, full.history);
  EXPECT_EQ(*part.network.parameters()[0], *full.network.parameters()[0]);
}

TEST(Training, EpochCallbackFiresPerEpoch) {
  int calls = 0;
  run_training(small_config(), train_blobs(), test_blobs(), [&](const TrainState& s) {
    ++calls;
    EXPECT_EQ(s.history.size(), static_cast<std::size_t>(calls));
  });
  EXPECT_EQ(calls, 3);
}

TEST(Evaluate, UniformNetworkIsChanceOnBalancedData) {
  const Network zero(lenet_spec({1, 28, 28}));
  EXPECT_DOUBLE_EQ(evaluate(zero, test_blobs()), 90.0);
}

TEST(Evaluate, MatchesConfusionMatrix) {
  TrainConfig c = small_config();
  c.epochs = 1;
  const TrainState s = run_training(c, train_blobs(), test_blobs());
  const auto pred = predict(s.network, test_blobs(), 7);
  std::vector<std::vector<int>> confusion(10, std::vector<int>(10, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++confusion[test_blobs().labels[i]][pred[i]];
  int diag = 0, total = 0;
  for (int a = 0; a < 10; ++a) {
    diag += confusion[a][a];
    for (int b = 0; b < 10; ++b) total += confusion[a][b];
  }
  EXPECT_NEAR(evaluate(s.network, test_blobs()), 100.0 * (1.0 - double(diag) / total), 1e-12);
}

TEST(Evaluate, PerfectPredictionsGiveZero) {
  // A linear head reading the one-hot label image back out.
  ArchitectureSpec spec{"probe", {1, 1, 10}, {{LayerKind::flatten, 0, 0}, {LayerKind::linear, 10, 0}}};
  Network net(spec);
  auto& fc = std::get<LinearLayer>(net.layers()[1]);
  for (std::size_t i = 0; i < 10; ++i) fc.weights.at({i, i}) = 1.0;
  LabeledDataset d;
  d.images = Tensor({10, 1, 1, 10});
  for (std::size_t i = 0; i < 10; ++i) {
    d.images[i * 10 + i] = 1.0;
    d.labels.push_back(static_cast<int>(i));
  }
  EXPECT_EQ(evaluate(net, d), 0.0);
}

EpochMetrics metric(double err, double sparsity) {
  EpochMetrics m;
  m.test_error_pct = err;
  m.total_sparsity_pct = sparsity;
  return m;
}

TEST(SelectBestTradeoff, Examples) {
  const std::vector<EpochMetrics> h{metric(1.0, 0), metric(0.9, 50), metric(2.5, 80)};
  EXPECT_EQ(select_best_tradeoff(h, 1.0, 0.5), 1u);
  EXPECT_EQ(select_best_tradeoff(h, 1.0), 2u);
  const std::vector<EpochMetrics> only_first{metric(1.0, 0), metric(1.2, 10)};
  EXPECT_EQ(select_best_tradeoff(only_first, 1.0, 0.0), 0u);
  const std::vector<EpochMetrics> ties{metric(1.0, 10), metric(1.0, 30), metric(0.5, 30)};
  EXPECT_EQ(select_best_tradeoff(ties, 1.0, 0.0), 1u);
  EXPECT_THROW(select_best_tradeoff(only_first, 0.1, 0.5), NoQualifyingModel);
  EXPECT_THROW(select_best_tradeoff({}, 1.0), std::invalid_argument);
}

TEST(LayerSweep, EndpointsAndLength) {
  TrainConfig c = small_config();
  c.epochs = 2;
  c.reg = {RegMode::none, 0.0};
  c.prune_enabled = false;
  const TrainState s = run_training(c, train_blobs(), test_blobs());
  const auto sweep = layer_sweep(s.network, s.mask, 0, test_blobs());
  ASSERT_EQ(sweep.size(), 21u);
  for (std::size_t i = 0; i < sweep.size(); ++i) EXPECT_EQ(sweep[i].removed, i);
  EXPECT_EQ(sweep.front().error_pct, evaluate(s.network, test_blobs()));
  Network dead = s.network;
  for (double& w : dead.conv(0).weights.values()) w = 0.0;
  for (double& b : dead.conv(0).bias.values()) b = 0.0;
  EXPECT_EQ(sweep.back().error_pct, evaluate(dead, test_blobs()));
  EXPECT_THROW(layer_sweep(s.network, s.mask, 2, test_blobs()), std::out_of_range);
}

}  // namespace
}  // namespace fsprune
