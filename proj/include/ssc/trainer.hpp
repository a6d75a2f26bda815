#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ssc/datasets.hpp"
#include "ssc/network.hpp"

namespace ssc {

enum class InitKind {
  UniformFan,       ///< U(-sqrt(6/fan_in), +sqrt(6/fan_in))
  NormalTruncated,  ///< N(0, 2/fan_in) truncated at two standard deviations
};

const char* to_string(InitKind kind);
InitKind parse_init_kind(const std::string& name);

struct InitScheme {
  InitKind kind = InitKind::UniformFan;
  std::uint64_t seed = 0;
};

/// Fan-in of a dense (in) or conv2d (in_channels * k * k) layer.
std::size_t fan_in(const LayerParams& params);

/// Fills the weights of one parameterized layer and zeroes its bias. The
/// values depend only on (seed, layer name, weight shape).
void initialize_layer(Network& net, std::size_t layer, InitKind kind, std::uint64_t seed);

Network initialize(const NetworkSpec& spec, const InitScheme& scheme);

/// Dense 256-128-64 with ReLU, then a dense output layer.
NetworkSpec mlp_spec(const Shape& input_shape, std::size_t num_classes);
/// Three conv3x3(pad 1) -> ReLU -> maxpool2x2 blocks, flatten, dense output.
NetworkSpec cnn_spec(const Shape& input_shape, std::size_t num_classes);

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 7;

  void validate() const;
};

struct EpochStats {
  double loss = 0.0;      ///< mean softmax cross-entropy over the epoch
  double accuracy = 0.0;  ///< training accuracy measured during the epoch
};

struct TrainResult {
  Network network;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

/// Mini-batch SGD with momentum on softmax cross-entropy. Data order per epoch
/// comes from a seeded shuffle, so the result is a pure function of the inputs.
/// Throws Error(NonFinite) if the loss stops being finite.
TrainResult train(Network net, const Dataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

double softmax_cross_entropy(const Tensor& logits, std::size_t label);
double evaluate_accuracy(const Network& net, const Dataset& data, std::size_t workers = 1);

}  // namespace ssc
