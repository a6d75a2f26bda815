#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ssc/error.hpp"
#include "ssc/random.hpp"
#include "ssc/trainer.hpp"

namespace ssc {
namespace {

NetworkSpec small_mlp_spec() {
  return NetworkSpec{{100},
                     {LayerSpec::dense("hidden", 20), LayerSpec::relu("relu"),
                      LayerSpec::dense("out", 3)}};
}

TEST(Initialize, DeterministicForSameSchemeAndSeed) {
  const auto spec = cnn_spec({1, 28, 28}, 10);
  EXPECT_TRUE(initialize(spec, {InitKind::UniformFan, 5}) == initialize(spec, {InitKind::UniformFan, 5}));
  EXPECT_TRUE(initialize(spec, {InitKind::NormalTruncated, 5}) ==
              initialize(spec, {InitKind::NormalTruncated, 5}));
}

TEST(Initialize, DifferentSeedsDiffer) {
  const auto spec = small_mlp_spec();
  const Network a = initialize(spec, {InitKind::UniformFan, 1});
  const Network b = initialize(spec, {InitKind::UniformFan, 2});
  EXPECT_NE(a.params(0).weights, b.params(0).weights);
}

TEST(Initialize, UniformFanBound) {
  // fan-in 100 -> limit sqrt(6/100)
  const Network net = initialize(small_mlp_spec(), {InitKind::UniformFan, 9});
  const double limit = std::sqrt(6.0 / 100.0);
  for (double w : net.params(0).weights.data()) {
    EXPECT_LE(std::abs(w), limit);
  }
  for (double b : net.params(0).bias.data()) EXPECT_EQ(b, 0.0);
  EXPECT_GT(max_value(net.params(0).weights), 0.8 * limit);
}

TEST(Initialize, NormalTruncatedBound) {
  const Network net = initialize(small_mlp_spec(), {InitKind::NormalTruncated, 9});
  const double stddev = std::sqrt(2.0 / 100.0);
  double sq = 0.0;
  for (double w : net.params(0).weights.data()) {
    EXPECT_LE(std::abs(w), 2.0 * stddev);
    sq += w * w;
  }
  // Truncation at 2 sigma shrinks the variance to ~0.774 sigma^2.
  const double rms = std::sqrt(sq / static_cast<double>(net.params(0).weights.size()));
  EXPECT_NEAR(rms / stddev, std::sqrt(0.774), 0.05);
}

TEST(Initialize, DependsOnlyOnSeedNameAndShape) {
  // Same layer name and shape in two different architectures.
  NetworkSpec a{{100}, {LayerSpec::dense("hidden", 20), LayerSpec::relu("relu"), LayerSpec::dense("out", 3)}};
  NetworkSpec b{{100}, {LayerSpec::dense("hidden", 20), LayerSpec::dense("other", 7)}};
  const Network na = initialize(a, {InitKind::UniformFan, 3});
  const Network nb = initialize(b, {InitKind::UniformFan, 3});
  EXPECT_EQ(na.params(0).weights, nb.params(0).weights);
  NetworkSpec c{{100}, {LayerSpec::dense("renamed", 20), LayerSpec::dense("out", 3)}};
  EXPECT_NE(initialize(c, {InitKind::UniformFan, 3}).params(0).weights, na.params(0).weights);
}

TEST(Initialize, SchemeNames) {
  EXPECT_EQ(parse_init_kind("uniform_fan"), InitKind::UniformFan);
  EXPECT_EQ(parse_init_kind(to_string(InitKind::NormalTruncated)), InitKind::NormalTruncated);
  EXPECT_THROW(parse_init_kind("xavier"), Error);
}

TEST(Architectures, MatchFixedLayout) {
  const Network mlp(mlp_spec({1, 28, 28}, 10));
  std::vector<std::size_t> widths;
  for (auto i : mlp.parameterized_layers()) widths.push_back(mlp.layer(i).units);
  EXPECT_EQ(widths, (std::vector<std::size_t>{256, 128, 64, 10}));

  const Network cnn(cnn_spec({1, 28, 28}, 10));
  std::size_t convs = 0, pools = 0;
  for (const auto& l : cnn.layers()) {
    convs += l.kind == LayerKind::Conv2d;
    pools += l.kind == LayerKind::MaxPool2d;
  }
  EXPECT_EQ(convs, 3u);
  EXPECT_EQ(pools, 3u);
  EXPECT_EQ(cnn.num_classes(), 10u);
}

// Two Gaussian clouds separated along the diagonal.
Dataset separable_2d(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> px;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double shift = label ? 0.75 : 0.25;
    px.push_back(std::clamp(shift + 0.05 * rng.normal(), 0.0, 1.0));
    px.push_back(std::clamp(shift + 0.05 * rng.normal(), 0.0, 1.0));
    labels.push_back(label);
  }
  Dataset ds;
  ds.images = Tensor({n, 1, 1, 2}, std::move(px));
  ds.labels = std::move(labels);
  ds.num_classes = 2;
  ds.validate();
  return ds;
}

NetworkSpec tiny_mlp() {
  return NetworkSpec{{1, 1, 2},
                     {LayerSpec::flatten("f"), LayerSpec::dense("h", 8), LayerSpec::relu("r"),
                      LayerSpec::dense("out", 2)}};
}

TEST(Train, LearnsSeparableData) {
  const Dataset ds = separable_2d(400, 1);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 16;
  const auto result = train(initialize(tiny_mlp(), {InitKind::UniformFan, 4}), ds, cfg);
  ASSERT_EQ(result.history.size(), 10u);
  for (const auto& e : result.history) EXPECT_TRUE(std::isfinite(e.loss));
  EXPECT_GE(evaluate_accuracy(result.network, ds), 0.99);
  EXPECT_LT(result.history.back().loss, result.history.front().loss);
}

TEST(Train, IsDeterministic) {
  const Dataset ds = separable_2d(100, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  const Network init = initialize(tiny_mlp(), {InitKind::UniformFan, 4});
  EXPECT_TRUE(train(init, ds, cfg).network == train(init, ds, cfg).network);
  cfg.seed = 99;
  EXPECT_FALSE(train(init, ds, cfg).network == train(init, ds, TrainConfig{.epochs = 2}).network);
}

TEST(Train, RejectsInvalidConfig) {
  const Dataset ds = separable_2d(10, 3);
  const Network net = initialize(tiny_mlp(), {InitKind::UniformFan, 4});
  EXPECT_THROW(train(net, ds, TrainConfig{.epochs = 0}), Error);
  EXPECT_THROW(train(net, ds, TrainConfig{.learning_rate = 0.0}), Error);
  EXPECT_THROW(train(net, ds, TrainConfig{.momentum = 1.0}), Error);
  Dataset bad = ds;
  bad.labels[0] = 5;
  EXPECT_THROW(train(net, bad, TrainConfig{}), Error);
}

TEST(Train, AbortsOnNonFiniteLoss) {
  const Dataset ds = separable_2d(64, 4);
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.epochs = 3;
  try {
    train(initialize(tiny_mlp(), {InitKind::UniformFan, 4}), ds, cfg);
    FAIL() << "expected non-finite loss";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
}

TEST(Train, CrossEntropy) {
  EXPECT_NEAR(softmax_cross_entropy(Tensor::vector({0, 0}), 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(softmax_cross_entropy(Tensor::vector({1000, 0}), 0), 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(softmax_cross_entropy(Tensor::vector({1000, -1000}), 1)));
}

}  // namespace
}  // namespace ssc
