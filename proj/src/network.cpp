#include "ssc/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ssc/error.hpp"

namespace ssc {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool2d: return "maxpool2d";
    case LayerKind::Flatten: return "flatten";
  }
  return "unknown";
}

LayerSpec LayerSpec::dense(std::string name, std::size_t units) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.name = std::move(name);
  s.units = units;
  return s;
}

LayerSpec LayerSpec::conv2d(std::string name, std::size_t out_channels, std::size_t kernel,
                            std::size_t stride, std::size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::Conv2d;
  s.name = std::move(name);
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::relu(std::string name) {
  LayerSpec s;
  s.kind = LayerKind::Relu;
  s.name = std::move(name);
  return s;
}

LayerSpec LayerSpec::maxpool2d(std::string name, std::size_t window, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool2d;
  s.name = std::move(name);
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::flatten(std::string name) {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  s.name = std::move(name);
  return s;
}

namespace {

[[noreturn]] void bad_layer(const LayerSpec& layer, const Shape& in, const std::string& why) {
  throw Error(ErrorCode::ShapeMismatch, "layer '" + layer.name + "' (" + to_string(layer.kind) +
                                            ") on input " + shape_to_string(in) + ": " + why);
}

Shape infer_output_shape(const LayerSpec& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::Dense:
      if (in.size() != 1) bad_layer(layer, in, "dense expects a rank-1 input (add a flatten)");
      if (layer.units == 0) bad_layer(layer, in, "units must be >= 1");
      return {layer.units};
    case LayerKind::Conv2d: {
      if (in.size() != 3) bad_layer(layer, in, "conv2d expects [C,H,W]");
      if (layer.out_channels == 0 || layer.kernel == 0 || layer.stride == 0) {
        bad_layer(layer, in, "out_channels, kernel and stride must be >= 1");
      }
      const auto h = conv_output_extent(in[1], layer.kernel, layer.stride, layer.padding);
      const auto w = conv_output_extent(in[2], layer.kernel, layer.stride, layer.padding);
      if (h == 0 || w == 0) bad_layer(layer, in, "kernel larger than padded input");
      return {layer.out_channels, h, w};
    }
    case LayerKind::Relu:
      return in;
    case LayerKind::MaxPool2d: {
      if (in.size() != 3) bad_layer(layer, in, "maxpool2d expects [C,H,W]");
      if (layer.window == 0 || layer.stride == 0) {
        bad_layer(layer, in, "window and stride must be >= 1");
      }
      const auto h = conv_output_extent(in[1], layer.window, layer.stride, 0);
      const auto w = conv_output_extent(in[2], layer.window, layer.stride, 0);
      if (h == 0 || w == 0) bad_layer(layer, in, "window larger than input");
      return {in[0], h, w};
    }
    case LayerKind::Flatten:
      return {shape_size(in)};
  }
  bad_layer(layer, in, "unknown layer kind");
}

Tensor dense_forward(const LayerParams& p, const Tensor& x) {
  const std::size_t out = p.weights.extent(0), in = p.weights.extent(1);
  Tensor y = p.bias;
  auto w = p.weights.data();
  auto xv = x.data();
  auto yv = y.data();
  for (std::size_t o = 0; o < out; ++o) {
    const double* row = &w[o * in];
    double acc = 0.0;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * xv[i];
    yv[o] += acc;
  }
  return y;
}

Tensor conv_forward(const LayerParams& p, const LayerSpec& layer, const Tensor& x) {
  Tensor y = conv2d(x, p.weights, layer.stride, layer.padding);
  const std::size_t plane = y.extent(1) * y.extent(2);
  auto yv = y.data();
  for (std::size_t o = 0; o < y.extent(0); ++o) {
    const double b = p.bias[o];
    for (std::size_t i = 0; i < plane; ++i) yv[o * plane + i] += b;
  }
  return y;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor dense_backward(const LayerParams& p, const Tensor& x, const Tensor& dy,
                      LayerParams* grads) {
  const std::size_t out = p.weights.extent(0), in = p.weights.extent(1);
  Tensor dx({in});
  auto w = p.weights.data();
  auto dyv = dy.data();
  auto dxv = dx.data();
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dyv[o];
    if (g == 0.0) continue;
    const double* row = &w[o * in];
    for (std::size_t i = 0; i < in; ++i) dxv[i] += row[i] * g;
  }
  if (grads) {
    auto gw = grads->weights.data();
    auto gb = grads->bias.data();
    auto xv = x.data();
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyv[o];
      gb[o] += g;
      if (g == 0.0) continue;
      double* row = &gw[o * in];
      for (std::size_t i = 0; i < in; ++i) row[i] += g * xv[i];
    }
  }
  return dx;
}

Tensor conv_backward(const LayerParams& p, const LayerSpec& layer, const Tensor& x,
                     const Tensor& dy, LayerParams* grads) {
  const std::size_t ic = x.extent(0), ih = x.extent(1), iw = x.extent(2);
  const std::size_t oc = dy.extent(0), oh = dy.extent(1), ow = dy.extent(2);
  const std::size_t k = layer.kernel, stride = layer.stride;
  const std::size_t pad = layer.padding;
  Tensor dx(x.shape());
  auto xv = x.data();
  auto wv = p.weights.data();
  auto dyv = dy.data();
  auto dxv = dx.data();
  double* gw = grads ? grads->weights.data().data() : nullptr;

  for (std::size_t o = 0; o < oc; ++o) {
    const double* g = &dyv[o * oh * ow];
    if (grads) {
      double s = 0.0;
      for (std::size_t i = 0; i < oh * ow; ++i) s += g[i];
      grads->bias[o] += s;
    }
    for (std::size_t c = 0; c < ic; ++c) {
      const double* src = &xv[c * ih * iw];
      double* dsrc = &dxv[c * ih * iw];
      for (std::size_t i = 0; i < k; ++i) {
        const TapRange rows = conv_tap_range(ih, oh, i, stride, pad);
        for (std::size_t j = 0; j < k; ++j) {
          const TapRange cols = conv_tap_range(iw, ow, j, stride, pad);
          const std::size_t widx = ((o * ic + c) * k + i) * k + j;
          const double w = wv[widx];
          double gacc = 0.0;
          for (std::size_t r = rows.first; r < rows.last; ++r) {
            const double* grow = g + r * ow;
            const std::size_t row = (r * stride + i - pad) * iw;
            double* drow = dsrc + row;
            for (std::size_t s = cols.first; s < cols.last; ++s) {
              drow[s * stride + j - pad] += w * grow[s];
            }
            if (gw) {
              const double* srow = src + row;
              for (std::size_t s = cols.first; s < cols.last; ++s) {
                gacc += srow[s * stride + j - pad] * grow[s];
              }
            }
          }
          if (gw) gw[widx] += gacc;
        }
      }
    }
  }
  return dx;
}

Tensor maxpool_backward(const LayerSpec& layer, const Tensor& x, const Tensor& dy) {
  const std::size_t ch = x.extent(0), ih = x.extent(1), iw = x.extent(2);
  const std::size_t oh = dy.extent(1), ow = dy.extent(2);
  Tensor dx(x.shape());
  auto xv = x.data();
  auto dyv = dy.data();
  auto dxv = dx.data();
  for (std::size_t c = 0; c < ch; ++c) {
    const double* src = &xv[c * ih * iw];
    double* dst = &dxv[c * ih * iw];
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t s = 0; s < ow; ++s) {
        // First row-major maximum wins ties.
        std::size_t best = (r * layer.stride) * iw + s * layer.stride;
        for (std::size_t i = 0; i < layer.window; ++i) {
          for (std::size_t j = 0; j < layer.window; ++j) {
            const std::size_t idx = (r * layer.stride + i) * iw + s * layer.stride + j;
            if (src[idx] > src[best]) best = idx;
          }
        }
        dst[best] += dyv[(c * oh + r) * ow + s];
      }
    }
  }
  return dx;
}

}  // namespace

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  if (spec_.layers.empty()) throw Error(ErrorCode::InvalidArgument, "network has no layers");
  Shape in = spec_.input_shape;
  if (in.empty() || shape_size(in) == 0) {
    throw Error(ErrorCode::ShapeMismatch, "invalid network input shape " + shape_to_string(in));
  }
  std::set<std::string> names;
  for (const auto& layer : spec_.layers) {
    if (layer.name.empty()) throw Error(ErrorCode::InvalidArgument, "layer name must be nonempty");
    if (!names.insert(layer.name).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate layer name '" + layer.name + "'");
    }
    Shape out = infer_output_shape(layer, in);
    if (layer.kind == LayerKind::Dense) {
      params_.push_back(LayerParams{Tensor({layer.units, in[0]}), Tensor({layer.units})});
    } else if (layer.kind == LayerKind::Conv2d) {
      params_.push_back(LayerParams{Tensor({layer.out_channels, in[0], layer.kernel, layer.kernel}),
                                    Tensor({layer.out_channels})});
    } else {
      params_.emplace_back(std::nullopt);
    }
    out_shapes_.push_back(out);
    in = std::move(out);
  }
  if (in.size() != 1) {
    throw Error(ErrorCode::ShapeMismatch,
                "network output must be rank-1 logits, got " + shape_to_string(in));
  }
}

std::optional<std::size_t> Network::find_layer(std::string_view name) const {
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (spec_.layers[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Network::layer_index(std::string_view name) const {
  auto idx = find_layer(name);
  if (!idx) throw Error(ErrorCode::InvalidArgument, "no layer named '" + std::string(name) + "'");
  return *idx;
}

std::vector<std::size_t> Network::parameterized_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (spec_.layers[i].parameterized()) out.push_back(i);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p) n += p->weights.size() + p->bias.size();
  }
  return n;
}

LayerParams& Network::params(std::size_t layer) {
  auto& p = params_.at(layer);
  if (!p) throw Error(ErrorCode::InvalidArgument, "layer '" + spec_.layers[layer].name + "' has no parameters");
  return *p;
}

const LayerParams& Network::params(std::size_t layer) const {
  const auto& p = params_.at(layer);
  if (!p) throw Error(ErrorCode::InvalidArgument, "layer '" + spec_.layers[layer].name + "' has no parameters");
  return *p;
}

bool Network::operator==(const Network& other) const {
  return spec_.input_shape == other.spec_.input_shape && spec_.layers == other.spec_.layers &&
         params_ == other.params_;
}

const Tensor& ForwardResult::activation(const Network& net, std::string_view layer_name) const {
  return activations.at(net.layer_index(layer_name));
}

ForwardResult forward(const Network& net, const Tensor& x) {
  if (x.shape() != net.input_shape()) {
    throw Error(ErrorCode::ShapeMismatch, "forward: input shape " + shape_to_string(x.shape()) +
                                              " does not match network input " +
                                              shape_to_string(net.input_shape()));
  }
  ForwardResult result;
  result.activations.reserve(net.layer_count());
  const Tensor* in = &x;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const auto& layer = net.layer(i);
    switch (layer.kind) {
      case LayerKind::Dense:
        result.activations.push_back(dense_forward(net.params(i), *in));
        break;
      case LayerKind::Conv2d:
        result.activations.push_back(conv_forward(net.params(i), layer, *in));
        break;
      case LayerKind::Relu:
        result.activations.push_back(relu_forward(*in));
        break;
      case LayerKind::MaxPool2d:
        result.activations.push_back(maxpool2d(*in, layer.window, layer.stride));
        break;
      case LayerKind::Flatten:
        result.activations.push_back(in->reshaped({in->size()}));
        break;
    }
    in = &result.activations.back();
  }
  return result;
}

Tensor predict_logits(const Network& net, const Tensor& x) {
  return forward(net, x).logits();
}

std::size_t predict_class(const Network& net, const Tensor& x) {
  const Tensor logits = predict_logits(net, x);
  auto v = logits.values();
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Tensor relu_backward(const Tensor& relu_input, const Tensor& upstream, ReluRule rule) {
  if (relu_input.shape() != upstream.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "relu_backward: shapes " +
                                              shape_to_string(relu_input.shape()) + " and " +
                                              shape_to_string(upstream.shape()) + " differ");
  }
  Tensor out(upstream.shape());
  auto in = relu_input.data();
  auto up = upstream.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    bool pass = in[i] > 0.0;
    if (rule == ReluRule::Guided) pass = pass && up[i] > 0.0;
    o[i] = pass ? up[i] : 0.0;
  }
  return out;
}

ParamGrads zero_param_grads(const Network& net) {
  ParamGrads grads(net.layer_count());
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    if (net.has_params(i)) {
      const auto& p = net.params(i);
      grads[i] = LayerParams{Tensor(p.weights.shape()), Tensor(p.bias.shape())};
    }
  }
  return grads;
}

BackwardResult backward(const Network& net, const Tensor& x, const ForwardResult& fwd,
                        const Tensor& output_grad, const BackwardOptions& opts) {
  if (fwd.activations.size() != net.layer_count()) {
    throw Error(ErrorCode::InvalidArgument, "backward: forward result does not match network");
  }
  if (output_grad.shape() != fwd.logits().shape()) {
    throw Error(ErrorCode::ShapeMismatch, "backward: output gradient shape " +
                                              shape_to_string(output_grad.shape()) +
                                              " does not match logits " +
                                              shape_to_string(fwd.logits().shape()));
  }
  if (opts.param_grads && opts.param_grads->size() != net.layer_count()) {
    throw Error(ErrorCode::InvalidArgument, "backward: parameter gradient buffer has wrong size");
  }

  BackwardResult result;
  if (opts.keep_layer_grads) result.layer_grads.resize(net.layer_count());
  Tensor grad = output_grad;
  for (std::size_t i = net.layer_count(); i-- > 0;) {
    if (opts.keep_layer_grads) result.layer_grads[i] = grad;
    const Tensor& in = i == 0 ? x : fwd.activations[i - 1];
    const auto& layer = net.layer(i);
    LayerParams* pg = nullptr;
    if (opts.param_grads && (*opts.param_grads)[i]) pg = &*(*opts.param_grads)[i];
    switch (layer.kind) {
      case LayerKind::Dense:
        grad = dense_backward(net.params(i), in, grad, pg);
        break;
      case LayerKind::Conv2d:
        grad = conv_backward(net.params(i), layer, in, grad, pg);
        break;
      case LayerKind::Relu:
        grad = relu_backward(in, grad, opts.rule);
        break;
      case LayerKind::MaxPool2d:
        grad = maxpool_backward(layer, in, grad);
        break;
      case LayerKind::Flatten:
        grad = grad.reshaped(in.shape());
        break;
    }
  }
  result.input_grad = std::move(grad);
  return result;
}

Tensor score_seed(const Tensor& logits, std::size_t class_index, ScoreKind score) {
  if (logits.rank() != 1 || class_index >= logits.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "class index " + std::to_string(class_index) + " out of range for " +
                    std::to_string(logits.size()) + " classes");
  }
  Tensor seed(logits.shape());
  if (score == ScoreKind::Logit) {
    seed[class_index] = 1.0;
    return seed;
  }
  // d softmax_c / d z_j = p_c (delta_cj - p_j)
  const double m = max_value(logits);
  double z = 0.0;
  std::vector<double> p(logits.size());
  for (std::size_t j = 0; j < p.size(); ++j) z += (p[j] = std::exp(logits[j] - m));
  for (auto& v : p) v /= z;
  for (std::size_t j = 0; j < p.size(); ++j) {
    seed[j] = p[class_index] * ((j == class_index ? 1.0 : 0.0) - p[j]);
  }
  return seed;
}

Tensor input_gradient(const Network& net, const Tensor& x, std::size_t class_index, ReluRule rule,
                      ScoreKind score) {
  if (class_index >= net.num_classes()) {
    throw Error(ErrorCode::InvalidArgument,
                "class index " + std::to_string(class_index) + " out of range for " +
                    std::to_string(net.num_classes()) + " classes");
  }
  const ForwardResult fwd = forward(net, x);
  BackwardOptions opts;
  opts.rule = rule;
  return backward(net, x, fwd, score_seed(fwd.logits(), class_index, score), opts).input_grad;
}

}  // namespace ssc
