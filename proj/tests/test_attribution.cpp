#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ssc/attribution.hpp"
#include "ssc/error.hpp"
#include "test_util.hpp"

namespace ssc {
namespace {

using test::random_cnn;
using test::random_mlp;
using test::random_tensor;

// f(x) = W x + b with no nonlinearity.
Network linear_net(const Tensor& w, const Tensor& b) {
  Network net(NetworkSpec{{w.extent(1)}, {LayerSpec::dense("out", w.extent(0))}});
  net.params(0) = {w, b};
  return net;
}

Tensor row(const Tensor& m, std::size_t r) {
  std::vector<double> v(m.extent(1));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = m[r * m.extent(1) + i];
  return Tensor::vector(v);
}

void expect_near(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

TEST(Linear, ClosedForms) {
  const Tensor w = Tensor::matrix({{1, -2, 3}, {0.5, 4, -1}});
  const Network net = linear_net(w, Tensor::vector({0.3, -0.7}));
  const Tensor x = Tensor::vector({2, -1, 0.5});
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(gradient(net, x, c).values, row(w, c));
    EXPECT_EQ(guided_backprop(net, x, c).values, row(w, c));
    for (std::size_t m : {1, 7, 50}) {
      expect_near(integrated_gradients(net, x, c, {std::nullopt, m}).values, mul(x, row(w, c)), 1e-14);
    }
    const NoiseConfig noise{10, 0.3, 4};
    expect_near(smooth_grad(Method::Gradient, net, x, c, noise).values, row(w, c), 1e-14);
    expect_near(var_grad(Method::Gradient, net, x, c, noise).values, Tensor({3}), 1e-28);
  }
}

TEST(IntegratedGradients, CustomBaselineAndZeroPath) {
  const Tensor w = Tensor::matrix({{1, -2, 3}});
  const Network net = linear_net(w, Tensor::vector({0}));
  const Tensor x = Tensor::vector({2, -1, 0.5});
  const Tensor base = Tensor::vector({1, 1, 1});
  expect_near(integrated_gradients(net, x, 0, {base, 5}).values, mul(sub(x, base), row(w, 0)), 1e-14);
  std::mt19937_64 gen(3);
  const Network mlp = random_mlp(gen);
  const Tensor y = random_tensor({mlp.spec().input_shape}, gen);
  const auto ig = integrated_gradients(mlp, y, 0, {y, 20});
  EXPECT_EQ(max_value(ig.values), 0.0);
  EXPECT_EQ(min_value(ig.values), 0.0);
  EXPECT_THROW(integrated_gradients(mlp, y, 0, {std::nullopt, 0}), Error);
  EXPECT_THROW(integrated_gradients(mlp, y, 0, {Tensor::vector({1}), 5}), Error);
}

TEST(IntegratedGradients, HomogeneousNetworkIsExact) {
  // With zero biases a ReLU network is positively homogeneous, so the gradient
  // is constant along the straight path from zero.
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 10; ++trial) {
    Network net = random_mlp(gen);
    for (auto i : net.parameterized_layers()) net.params(i).bias = Tensor(net.params(i).bias.shape());
    const Tensor x = random_tensor(net.spec().input_shape, gen);
    const Tensor expected = mul(x, gradient(net, x, 0).values);
    for (std::size_t m : {1, 7, 50}) expect_near(integrated_gradients(net, x, 0, {std::nullopt, m}).values, expected, 1e-12);
  }
}

TEST(IntegratedGradients, CompletenessImprovesWithSteps) {
  std::mt19937_64 gen(5);
  int improved = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = random_mlp(gen);
    const Tensor x = random_tensor(net.spec().input_shape, gen, -2.0, 2.0);
    const double target = predict_logits(net, x)[0] - predict_logits(net, Tensor(x.shape()))[0];
    const double coarse = std::abs(sum(integrated_gradients(net, x, 0, {std::nullopt, 2}).values) - target);
    const double fine = std::abs(sum(integrated_gradients(net, x, 0, {std::nullopt, 4000}).values) - target);
    EXPECT_LT(fine, 1e-3 * (1.0 + std::abs(target)));
    if (fine <= coarse) ++improved;
  }
  EXPECT_GE(improved, 8);
}

TEST(GradCam, WeightedCamExample) {
  const Tensor features({1, 2, 2}, std::vector<double>{1, -1, 2, 0});
  EXPECT_EQ(weighted_cam(features, {1.0}), Tensor({2, 2}, std::vector<double>{1, 0, 2, 0}));
  EXPECT_EQ(weighted_cam(features, {-1.0}), Tensor({2, 2}, std::vector<double>{0, 1, 0, 0}));
  const Tensor positive({1, 2, 2}, std::vector<double>{1, 3, 2, 4});
  EXPECT_EQ(weighted_cam(positive, {-0.5}), Tensor({2, 2}));
  EXPECT_THROW(weighted_cam(features, {1.0, 2.0}), Error);
}

TEST(GradCam, BilinearHalfPixel) {
  const Tensor m({2, 2}, std::vector<double>{0, 1, 2, 3});
  const Tensor up = resize_bilinear(m, 4, 4);
  // Source coordinates of the four output centers: 0, 0.25, 0.75, 1 after clamping.
  const std::vector<double> s{0, 0.25, 0.75, 1};
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(up[r * 4 + c], 2 * s[r] + s[c], 1e-15);
  }
  EXPECT_EQ(resize_bilinear(m, 2, 2), m);
  const Tensor constant = resize_bilinear(Tensor({3, 3}, 0.7), 7, 5);
  for (double v : constant.values()) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(GradCam, MatchesHandComputedOneByOneConv) {
  // conv 1x1 with two channels, ReLU, flatten, dense: the feature gradient is
  // just the dense row reshaped, so the channel weights are its plane means.
  NetworkSpec spec{{1, 3, 3},
                   {LayerSpec::conv2d("conv", 2, 1, 1, 0), LayerSpec::relu("relu"),
                    LayerSpec::flatten("flat"), LayerSpec::dense("out", 2)}};
  Network net(spec);
  net.params(0).weights = Tensor({2, 1, 1, 1}, std::vector<double>{1.0, -0.5});
  net.params(0).bias = Tensor::vector({0.1, 0.2});
  std::mt19937_64 gen(2);
  net.params(3).weights = random_tensor({2, 18}, gen);
  const Tensor x = random_tensor({1, 3, 3}, gen);
  const std::size_t c = 1;

  std::vector<double> alpha(2, 0.0);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < 9; ++i) alpha[k] += net.params(3).weights[c * 18 + k * 9 + i] / 9.0;
  }
  const double w[2] = {1.0, -0.5}, b[2] = {0.1, 0.2};
  Tensor expected({3, 3});
  for (std::size_t i = 0; i < 9; ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < 2; ++k) v += alpha[k] * std::max(0.0, w[k] * x[i] + b[k]);
    expected[i] = std::max(0.0, v);
  }
  const auto result = grad_cam(net, x, c);
  EXPECT_EQ(result.layer, "conv");
  expect_near(result.cam, expected, 1e-14);
  expect_near(result.upsampled.reshaped({3, 3}), expected, 1e-14);
}

TEST(GradCam, RequiresConvLayer) {
  std::mt19937_64 gen(1);
  const Network mlp = random_mlp(gen);
  const Tensor x = random_tensor(mlp.spec().input_shape, gen);
  try {
    guided_grad_cam(mlp, x, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    EXPECT_NE(std::string(e.what()).find("GradCAM requires a convolutional layer"), std::string::npos);
  }
}

TEST(GuidedGradCam, IsProductOfParts) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Network net = random_cnn(gen);
    const Tensor x = random_tensor(net.spec().input_shape, gen, 0.0, 1.0);
    const auto cam = grad_cam(net, x, 2);
    EXPECT_EQ(cam.cam.shape(), (Shape{2, 2}));
    EXPECT_GE(min_value(cam.cam), 0.0);
    for (std::size_t ch = 1; ch < x.extent(0); ++ch) {
      for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(cam.upsampled[ch * 64 + i], cam.upsampled[i]);
    }
    EXPECT_EQ(guided_grad_cam(net, x, 2).values, mul(guided_backprop(net, x, 2).values, cam.upsampled));
  }
}

TEST(GuidedGradCam, ZeroCamGivesZeroMap) {
  NetworkSpec spec{{1, 4, 4},
                   {LayerSpec::conv2d("conv", 1, 1, 1, 0), LayerSpec::relu("relu"),
                    LayerSpec::flatten("flat"), LayerSpec::dense("out", 2)}};
  Network net(spec);
  net.params(0).weights = Tensor({1, 1, 1, 1}, 1.0);
  net.params(3).weights = Tensor({2, 16}, -1.0);  // negative channel weight
  const Tensor x({1, 4, 4}, 0.5);
  EXPECT_EQ(max_value(grad_cam(net, x, 0).cam), 0.0);
  const auto ggc = guided_grad_cam(net, x, 0);
  EXPECT_EQ(max_value(ggc.values), 0.0);
  EXPECT_EQ(min_value(ggc.values), 0.0);
}

TEST(Noise, SingleTinySampleApproachesGradient) {
  std::mt19937_64 gen(4);
  const Network net = random_cnn(gen);
  const Tensor x = random_tensor(net.spec().input_shape, gen, 0.0, 1.0);
  const auto sg = smooth_grad(Method::Gradient, net, x, 1, {1, 1e-12, 9});
  expect_near(sg.values, gradient(net, x, 1).values, 1e-9);
}

TEST(Noise, DeterministicPerSeedAndPrefixStable) {
  std::mt19937_64 gen(6);
  const Network net = random_cnn(gen);
  const Tensor x = random_tensor(net.spec().input_shape, gen, 0.0, 1.0);
  const NoiseConfig cfg{8, 0.2, 77};
  EXPECT_EQ(smooth_grad(Method::Gradient, net, x, 0, cfg).values,
            smooth_grad(Method::Gradient, net, x, 0, cfg).values);
  EXPECT_NE(smooth_grad(Method::Gradient, net, x, 0, cfg).values,
            smooth_grad(Method::Gradient, net, x, 0, {8, 0.2, 78}).values);
  const auto eight = noisy_explanations(Method::Gradient, net, x, 0, cfg);
  const auto three = noisy_explanations(Method::Gradient, net, x, 0, {3, 0.2, 77});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(eight[i], three[i]);
}

TEST(Noise, VarGradProperties) {
  std::mt19937_64 gen(12);
  const Network net = random_cnn(gen);
  const Tensor x = random_tensor(net.spec().input_shape, gen, 0.0, 1.0);
  const auto zero = var_grad(Method::Gradient, net, x, 0, {5, 0.0, 1});
  EXPECT_EQ(max_value(zero.values), 0.0);
  const auto vg = var_grad(Method::GuidedBackprop, net, x, 0, {6, 0.3, 1});
  EXPECT_GE(min_value(vg.values), 0.0);
  EXPECT_GT(max_value(vg.values), 0.0);

  const auto samples = noisy_explanations(Method::GuidedBackprop, net, x, 0, {6, 0.3, 1});
  // Oracle: E[s^2] - E[s]^2.
  for (std::size_t i = 0; i < x.size(); ++i) {
    double m = 0, m2 = 0;
    for (const auto& s : samples) {
      m += s[i] / 6.0;
      m2 += s[i] * s[i] / 6.0;
    }
    EXPECT_NEAR(vg.values[i], m2 - m * m, 1e-12);
  }
}

TEST(Noise, SampleCountLimits) {
  std::mt19937_64 gen(1);
  const Network net = random_mlp(gen);
  const Tensor x = random_tensor(net.spec().input_shape, gen);
  EXPECT_NO_THROW(smooth_grad(Method::Gradient, net, x, 0, {1, 0.1, 0}));
  EXPECT_THROW(smooth_grad(Method::Gradient, net, x, 0, {0, 0.1, 0}), Error);
  EXPECT_THROW(var_grad(Method::Gradient, net, x, 0, {1, 0.1, 0}), Error);
  EXPECT_THROW(var_grad(Method::Gradient, net, x, 0, {5, -0.1, 0}), Error);
  EXPECT_THROW(smooth_grad(Method::SmoothGrad, net, x, 0, {5, 0.1, 0}), Error);
}

TEST(Explain, ShapesMatchInputForEveryMethod) {
  std::mt19937_64 gen(21);
  const Network net = random_cnn(gen);
  const Tensor x = random_tensor(net.spec().input_shape, gen, 0.0, 1.0);
  AttributionOptions opts;
  opts.noise.samples = 3;
  opts.ig.steps = 5;
  for (auto m : kAllMethods) {
    const auto map = explain(m, net, x, 4, opts);
    EXPECT_EQ(map.values.shape(), x.shape()) << to_string(m);
    EXPECT_EQ(map.method, m);
    EXPECT_EQ(map.class_index, 4u);
  }
  EXPECT_THROW(explain(Method::Gradient, net, x, 5, opts), Error);
}

TEST(Explain, MethodNames) {
  for (auto m : kAllMethods) EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_EQ(parse_method("ig"), Method::IntegratedGradients);
  EXPECT_EQ(parse_method("gbp"), Method::GuidedBackprop);
  EXPECT_THROW(parse_method("lime"), Error);
  EXPECT_TRUE(requires_conv(Method::GuidedGradCam));
  EXPECT_FALSE(is_deterministic(Method::VarGrad));
}

TEST(Explain, SidecarRoundTrip) {
  std::mt19937_64 gen(2);
  const Network net = random_cnn(gen);
  const Tensor x = random_tensor(net.spec().input_shape, gen, 0.0, 1.0);
  const auto map = integrated_gradients(net, x, 3, {std::nullopt, 9});
  const auto dir = std::filesystem::temp_directory_path() / "ssc_attr_test";
  save_explanation(map, dir, "ig_img0");
  const auto back = load_explanation(dir / "ig_img0.json");
  EXPECT_EQ(back.values, map.values);
  EXPECT_EQ(back.method, Method::IntegratedGradients);
  EXPECT_EQ(back.class_index, 3u);
  EXPECT_EQ(back.metadata.at("steps").get<int>(), 9);
}

TEST(Explain, SoftmaxScoreDiffersFromLogit) {
  std::mt19937_64 gen(14);
  const Network net = random_cnn(gen);
  const Tensor x = random_tensor(net.spec().input_shape, gen, 0.0, 1.0);
  const auto logit = gradient(net, x, 0, ScoreKind::Logit).values;
  const auto prob = gradient(net, x, 0, ScoreKind::Softmax).values;
  EXPECT_NE(logit, prob);
  // d softmax_c = p_c * (dz_c - sum_j p_j dz_j)
  const Tensor z = predict_logits(net, x);
  double zmax = max_value(z), denom = 0;
  for (double v : z.values()) denom += std::exp(v - zmax);
  std::vector<double> p(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) p[j] = std::exp(z[j] - zmax) / denom;
  Tensor expected = scale(logit, p[0]);
  for (std::size_t j = 0; j < z.size(); ++j) {
    expected = sub(expected, scale(gradient(net, x, j).values, p[0] * p[j]));
  }
  expect_near(prob, expected, 1e-12);
}

}  // namespace
}  // namespace ssc
