#include "ssc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssc/error.hpp"
#include "ssc/parallel.hpp"
#include "ssc/random.hpp"

namespace ssc {

const char* to_string(InitKind kind) {
  return kind == InitKind::UniformFan ? "uniform_fan" : "normal_truncated";
}

InitKind parse_init_kind(const std::string& name) {
  if (name == "uniform_fan") return InitKind::UniformFan;
  if (name == "normal_truncated") return InitKind::NormalTruncated;
  throw Error(ErrorCode::InvalidArgument, "unknown init scheme '" + name + "'");
}

std::size_t fan_in(const LayerParams& params) {
  const auto& s = params.weights.shape();
  std::size_t f = 1;
  for (std::size_t i = 1; i < s.size(); ++i) f *= s[i];
  return f;
}

void initialize_layer(Network& net, std::size_t layer, InitKind kind, std::uint64_t seed) {
  auto& p = net.params(layer);
  std::uint64_t key = mix_seed(seed, net.layer(layer).name);
  for (auto e : p.weights.shape()) key = mix_seed(key, static_cast<std::uint64_t>(e));
  Rng rng(key);
  const double fan = static_cast<double>(fan_in(p));
  if (kind == InitKind::UniformFan) {
    const double limit = std::sqrt(6.0 / fan);
    for (auto& w : p.weights.data()) w = rng.uniform(-limit, limit);
  } else {
    const double stddev = std::sqrt(2.0 / fan);
    for (auto& w : p.weights.data()) {
      double z = rng.normal();
      while (std::abs(z) > 2.0) z = rng.normal();
      w = stddev * z;
    }
  }
  for (auto& b : p.bias.data()) b = 0.0;
}

Network initialize(const NetworkSpec& spec, const InitScheme& scheme) {
  Network net(spec);
  for (auto i : net.parameterized_layers()) initialize_layer(net, i, scheme.kind, scheme.seed);
  return net;
}

NetworkSpec mlp_spec(const Shape& input_shape, std::size_t num_classes) {
  return NetworkSpec{input_shape,
                     {LayerSpec::flatten("flatten"), LayerSpec::dense("dense1", 256),
                      LayerSpec::relu("relu1"), LayerSpec::dense("dense2", 128),
                      LayerSpec::relu("relu2"), LayerSpec::dense("dense3", 64),
                      LayerSpec::relu("relu3"), LayerSpec::dense("logits", num_classes)}};
}

NetworkSpec cnn_spec(const Shape& input_shape, std::size_t num_classes) {
  return NetworkSpec{input_shape,
                     {LayerSpec::conv2d("conv1", 16, 3, 1, 1), LayerSpec::relu("relu1"),
                      LayerSpec::maxpool2d("pool1", 2, 2), LayerSpec::conv2d("conv2", 32, 3, 1, 1),
                      LayerSpec::relu("relu2"), LayerSpec::maxpool2d("pool2", 2, 2),
                      LayerSpec::conv2d("conv3", 64, 3, 1, 1), LayerSpec::relu("relu3"),
                      LayerSpec::maxpool2d("pool3", 2, 2), LayerSpec::flatten("flatten"),
                      LayerSpec::dense("logits", num_classes)}};
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "momentum must lie in [0, 1)");
  }
}

double softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  const double m = max_value(logits);
  double z = 0.0;
  for (double v : logits.data()) z += std::exp(v - m);
  return std::log(z) + m - logits[label];
}

TrainResult train(Network net, const Dataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.size() == 0) throw Error(ErrorCode::InvalidArgument, "cannot train on an empty dataset");
  if (data.image_shape() != net.input_shape()) {
    throw Error(ErrorCode::ShapeMismatch, "dataset images " + shape_to_string(data.image_shape()) +
                                              " do not match network input " +
                                              shape_to_string(net.input_shape()));
  }
  for (int l : data.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= net.num_classes()) {
      throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(l) +
                                                  " outside the network's " +
                                                  std::to_string(net.num_classes()) + " classes");
    }
  }

  TrainResult result{std::move(net), {}};
  Network& model = result.network;
  ParamGrads velocity = zero_param_grads(model);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg.seed, "train-shuffle"));

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      ParamGrads grads = zero_param_grads(model);
      BackwardOptions opts;
      opts.param_grads = &grads;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const auto label = static_cast<std::size_t>(data.labels[idx]);
        const Tensor x = data.image(idx);
        const ForwardResult fwd = forward(model, x);
        const Tensor& logits = fwd.logits();
        const double loss = softmax_cross_entropy(logits, label);
        if (!std::isfinite(loss)) {
          throw Error(ErrorCode::NonFinite, "non-finite training loss at epoch " +
                                                std::to_string(epoch + 1) + ", sample " +
                                                std::to_string(idx));
        }
        loss_sum += loss;
        const auto v = logits.values();
        if (static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin()) == label) {
          ++correct;
        }
        // d loss / d logits = softmax - onehot
        Tensor seed(logits.shape());
        const double m = max_value(logits);
        double z = 0.0;
        for (std::size_t j = 0; j < seed.size(); ++j) z += (seed[j] = std::exp(logits[j] - m));
        for (std::size_t j = 0; j < seed.size(); ++j) seed[j] /= z;
        seed[label] -= 1.0;
        backward(model, x, fwd, seed, opts);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto i : model.parameterized_layers()) {
        auto& p = model.params(i);
        auto& g = *grads[i];
        auto& vel = *velocity[i];
        auto step = [&](Tensor& w, const Tensor& gw, Tensor& vw) {
          auto wd = w.data();
          auto gd = gw.data();
          auto vd = vw.data();
          for (std::size_t k = 0; k < wd.size(); ++k) {
            vd[k] = cfg.momentum * vd[k] + gd[k] * inv;
            wd[k] -= cfg.learning_rate * vd[k];
          }
        };
        step(p.weights, g.weights, vel.weights);
        step(p.bias, g.bias, vel.bias);
      }
    }
    EpochStats stats{loss_sum / static_cast<double>(data.size()),
                     static_cast<double>(correct) / static_cast<double>(data.size())};
    result.history.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);
  }
  return result;
}

double evaluate_accuracy(const Network& net, const Dataset& data, std::size_t workers) {
  if (data.size() == 0) return 0.0;
  std::vector<char> hit(data.size(), 0);
  parallel_for(data.size(), workers, [&](std::size_t i) {
    hit[i] = predict_class(net, data.image(i)) == static_cast<std::size_t>(data.labels[i]);
  });
  const auto correct = std::count(hit.begin(), hit.end(), 1);
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace ssc
