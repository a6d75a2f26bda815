#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssc/tensor.hpp"

namespace ssc {

enum class LayerKind : std::uint8_t {
  Dense = 0,
  Conv2d = 1,
  Relu = 2,
  MaxPool2d = 3,
  Flatten = 4,
};

const char* to_string(LayerKind kind);

/// One layer of a feedforward network. Which hyperparameters are meaningful
/// depends on `kind`: dense uses `units`; conv2d uses `out_channels`,
/// `kernel`, `stride`, `padding`; maxpool2d uses `window` and `stride`.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::string name;
  std::size_t units = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t window = 0;

  static LayerSpec dense(std::string name, std::size_t units);
  static LayerSpec conv2d(std::string name, std::size_t out_channels, std::size_t kernel,
                          std::size_t stride = 1, std::size_t padding = 0);
  static LayerSpec relu(std::string name);
  static LayerSpec maxpool2d(std::string name, std::size_t window, std::size_t stride);
  static LayerSpec flatten(std::string name);

  bool parameterized() const noexcept {
    return kind == LayerKind::Dense || kind == LayerKind::Conv2d;
  }

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;
};

/// Weights and bias of a dense ([out, in], [out]) or conv2d
/// ([out, in, k, k], [out]) layer.
struct LayerParams {
  Tensor weights;
  Tensor bias;

  bool operator==(const LayerParams&) const = default;
};

/// Feedforward network S: R^d -> R^C. Construction validates the whole shape
/// chain; parameters start at zero (see trainer.hpp for initialization).
class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const Shape& input_shape() const noexcept { return spec_.input_shape; }
  const std::vector<LayerSpec>& layers() const noexcept { return spec_.layers; }
  std::size_t layer_count() const noexcept { return spec_.layers.size(); }
  const LayerSpec& layer(std::size_t i) const { return spec_.layers.at(i); }
  const Shape& output_shape(std::size_t layer) const { return out_shapes_.at(layer); }
  std::size_t num_classes() const noexcept { return out_shapes_.back()[0]; }

  std::optional<std::size_t> find_layer(std::string_view name) const;
  std::size_t layer_index(std::string_view name) const;
  /// Indices of dense/conv2d layers in forward order.
  std::vector<std::size_t> parameterized_layers() const;
  std::size_t parameter_count() const;

  bool has_params(std::size_t layer) const { return params_.at(layer).has_value(); }
  LayerParams& params(std::size_t layer);
  const LayerParams& params(std::size_t layer) const;

  /// Same architecture and bit-identical parameters.
  bool operator==(const Network& other) const;

 private:
  NetworkSpec spec_;
  std::vector<Shape> out_shapes_;
  std::vector<std::optional<LayerParams>> params_;
};

/// Output of every layer, in layer order. The last entry is the logits.
struct ForwardResult {
  std::vector<Tensor> activations;

  const Tensor& logits() const { return activations.back(); }
  const Tensor& activation(const Network& net, std::string_view layer_name) const;
};

ForwardResult forward(const Network& net, const Tensor& x);
Tensor predict_logits(const Network& net, const Tensor& x);
std::size_t predict_class(const Network& net, const Tensor& x);

enum class ReluRule {
  Standard,  ///< pass where the ReLU input was > 0
  Guided,    ///< pass where the ReLU input was > 0 and the upstream signal is > 0
};

/// Which class score gets differentiated.
enum class ScoreKind { Logit, Softmax };

using ParamGrads = std::vector<std::optional<LayerParams>>;

struct BackwardOptions {
  ReluRule rule = ReluRule::Standard;
  /// When set, parameter gradients are accumulated (+=) into this buffer,
  /// which must come from zero_param_grads().
  ParamGrads* param_grads = nullptr;
  /// When true, BackwardResult::layer_grads holds d(score)/d(layer output).
  bool keep_layer_grads = false;
};

struct BackwardResult {
  Tensor input_grad;
  std::vector<Tensor> layer_grads;
};

/// Reverse-mode pass from `output_grad` (same shape as the logits) back to the
/// input. `fwd` must be forward(net, x).
BackwardResult backward(const Network& net, const Tensor& x, const ForwardResult& fwd,
                        const Tensor& output_grad, const BackwardOptions& opts = {});

ParamGrads zero_param_grads(const Network& net);

/// Gradient of the chosen class score with respect to the logits.
Tensor score_seed(const Tensor& logits, std::size_t class_index, ScoreKind score);

/// d S_c / d x (or the guided backprop signal when rule == Guided).
Tensor input_gradient(const Network& net, const Tensor& x, std::size_t class_index,
                      ReluRule rule = ReluRule::Standard, ScoreKind score = ScoreKind::Logit);

Tensor relu_backward(const Tensor& relu_input, const Tensor& upstream, ReluRule rule);

}  // namespace ssc
