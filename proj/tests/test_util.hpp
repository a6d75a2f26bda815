#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ssc/network.hpp"
#include "ssc/trainer.hpp"

namespace ssc::test {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& gen, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (auto& v : t.data()) v = dist(gen);
  return t;
}

// Random small biases too, so ReLU kinks are not aligned with zero inputs.
inline void randomize_biases(Network& net, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (auto i : net.parameterized_layers()) {
    for (auto& b : net.params(i).bias.data()) b = dist(gen);
  }
}

inline Network random_mlp(std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> width(2, 12);
  const std::size_t in = width(gen), h1 = width(gen), h2 = width(gen), out = width(gen);
  NetworkSpec spec{{in},
                   {LayerSpec::dense("d1", h1), LayerSpec::relu("r1"), LayerSpec::dense("d2", h2),
                    LayerSpec::relu("r2"), LayerSpec::dense("out", out)}};
  Network net = initialize(spec, {InitKind::UniformFan, gen()});
  randomize_biases(net, gen);
  return net;
}

inline Network random_cnn(std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> ch(1, 3);
  const std::size_t c = ch(gen);
  NetworkSpec spec{{c, 8, 8},
                   {LayerSpec::conv2d("c1", 3, 3, 1, 1), LayerSpec::relu("r1"),
                    LayerSpec::maxpool2d("p1", 2, 2), LayerSpec::conv2d("c2", 4, 3, 1, 0),
                    LayerSpec::relu("r2"), LayerSpec::flatten("f"), LayerSpec::dense("out", 5)}};
  Network net = initialize(spec, {InitKind::NormalTruncated, gen()});
  randomize_biases(net, gen);
  return net;
}

/// Central finite differences of logit `c` with respect to every input
/// component; evaluates the network only through forward().
inline Tensor finite_difference_gradient(const Network& net, const Tensor& x, std::size_t c,
                                         double h = 1e-5) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = predict_logits(net, probe)[c];
    probe[i] = x[i] - h;
    const double down = predict_logits(net, probe)[c];
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline bool gradient_close(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  return diff <= 1e-6 || diff <= 1e-4 * std::max(std::abs(analytic), std::abs(numeric));
}

}  // namespace ssc::test
