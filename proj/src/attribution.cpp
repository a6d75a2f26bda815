#include "ssc/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include "ssc/checkpoint.hpp"
#include "ssc/error.hpp"
#include "ssc/random.hpp"

namespace ssc {

const char* to_string(Method method) {
  switch (method) {
    case Method::Gradient: return "gradient";
    case Method::IntegratedGradients: return "integrated_gradients";
    case Method::GuidedBackprop: return "guided_backprop";
    case Method::GuidedGradCam: return "guided_gradcam";
    case Method::SmoothGrad: return "smoothgrad";
    case Method::VarGrad: return "vargrad";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (auto m : kAllMethods) {
    if (name == to_string(m)) return m;
  }
  if (name == "ig") return Method::IntegratedGradients;
  if (name == "gbp") return Method::GuidedBackprop;
  throw Error(ErrorCode::InvalidArgument, "unknown attribution method '" + name + "'");
}

bool is_deterministic(Method method) {
  return method != Method::SmoothGrad && method != Method::VarGrad;
}

bool requires_conv(Method method) { return method == Method::GuidedGradCam; }

namespace {

ExplanationMap finish(Tensor values, Method method, std::size_t class_index, nlohmann::json meta) {
  if (!all_finite(values)) {
    throw Error(ErrorCode::NonFinite, std::string(to_string(method)) + " produced non-finite values");
  }
  return ExplanationMap{std::move(values), method, class_index, std::move(meta)};
}

const char* score_name(ScoreKind s) { return s == ScoreKind::Logit ? "logit" : "softmax"; }

}  // namespace

ExplanationMap gradient(const Network& net, const Tensor& x, std::size_t class_index,
                        ScoreKind score) {
  return finish(input_gradient(net, x, class_index, ReluRule::Standard, score), Method::Gradient,
                class_index, {{"score", score_name(score)}});
}

ExplanationMap integrated_gradients(const Network& net, const Tensor& x, std::size_t class_index,
                                    const IGConfig& cfg, ScoreKind score) {
  if (cfg.steps < 1) throw Error(ErrorCode::InvalidArgument, "integrated gradients needs steps >= 1");
  const Tensor baseline = cfg.baseline.value_or(Tensor(x.shape()));
  if (baseline.shape() != x.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "IG baseline shape " + shape_to_string(baseline.shape()) +
                                              " does not match input " + shape_to_string(x.shape()));
  }
  const Tensor delta = sub(x, baseline);
  Tensor accum(x.shape());
  Tensor point(x.shape());
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const double alpha = (static_cast<double>(k) + 0.5) / static_cast<double>(cfg.steps);
    for (std::size_t i = 0; i < point.size(); ++i) point[i] = baseline[i] + alpha * delta[i];
    const Tensor g = input_gradient(net, point, class_index, ReluRule::Standard, score);
    for (std::size_t i = 0; i < accum.size(); ++i) accum[i] += g[i];
  }
  Tensor values = mul(delta, scale(accum, 1.0 / static_cast<double>(cfg.steps)));
  return finish(std::move(values), Method::IntegratedGradients, class_index,
                {{"steps", cfg.steps},
                 {"baseline", cfg.baseline ? "custom" : "zeros"},
                 {"score", score_name(score)}});
}

ExplanationMap guided_backprop(const Network& net, const Tensor& x, std::size_t class_index,
                               ScoreKind score) {
  return finish(input_gradient(net, x, class_index, ReluRule::Guided, score),
                Method::GuidedBackprop, class_index, {{"score", score_name(score)}});
}

Tensor weighted_cam(const Tensor& features, const std::vector<double>& weights) {
  if (features.rank() != 3 || features.extent(0) != weights.size()) {
    throw Error(ErrorCode::ShapeMismatch, "weighted_cam: features " +
                                              shape_to_string(features.shape()) + " need " +
                                              std::to_string(weights.size()) + " channels");
  }
  const std::size_t h = features.extent(1), w = features.extent(2), plane = h * w;
  Tensor cam({h, w});
  for (std::size_t k = 0; k < weights.size(); ++k) {
    for (std::size_t i = 0; i < plane; ++i) cam[i] += weights[k] * features[k * plane + i];
  }
  for (auto& v : cam.data()) v = v > 0.0 ? v : 0.0;
  return cam;
}

Tensor resize_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w) {
  if (map.rank() != 2 || out_h == 0 || out_w == 0) {
    throw Error(ErrorCode::ShapeMismatch, "resize_bilinear expects a [H,W] map");
  }
  const std::size_t in_h = map.extent(0), in_w = map.extent(1);
  auto coord = [](std::size_t dst, std::size_t in, std::size_t out) {
    double src = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    return std::tuple{lo, hi, src - static_cast<double>(lo)};
  };
  Tensor out({out_h, out_w});
  for (std::size_t r = 0; r < out_h; ++r) {
    const auto [r0, r1, fr] = coord(r, in_h, out_h);
    for (std::size_t c = 0; c < out_w; ++c) {
      const auto [c0, c1, fc] = coord(c, in_w, out_w);
      const double top = map[r0 * in_w + c0] * (1.0 - fc) + map[r0 * in_w + c1] * fc;
      const double bottom = map[r1 * in_w + c0] * (1.0 - fc) + map[r1 * in_w + c1] * fc;
      out[r * out_w + c] = top * (1.0 - fr) + bottom * fr;
    }
  }
  return out;
}

GradCamResult grad_cam(const Network& net, const Tensor& x, std::size_t class_index,
                       ScoreKind score) {
  std::optional<std::size_t> last_conv;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    if (net.layer(i).kind == LayerKind::Conv2d) last_conv = i;
  }
  if (!last_conv) throw Error(ErrorCode::InvalidArgument, "GradCAM requires a convolutional layer");
  if (x.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "GradCAM expects a [C,H,W] input");
  if (class_index >= net.num_classes()) {
    throw Error(ErrorCode::InvalidArgument, "class index " + std::to_string(class_index) +
                                                " out of range for " +
                                                std::to_string(net.num_classes()) + " classes");
  }
  std::size_t feature_layer = *last_conv;
  if (feature_layer + 1 < net.layer_count() &&
      net.layer(feature_layer + 1).kind == LayerKind::Relu) {
    ++feature_layer;
  }

  const ForwardResult fwd = forward(net, x);
  BackwardOptions opts;
  opts.keep_layer_grads = true;
  const auto back = backward(net, x, fwd, score_seed(fwd.logits(), class_index, score), opts);
  const Tensor& features = fwd.activations[feature_layer];
  const Tensor& grads = back.layer_grads[feature_layer];

  const std::size_t channels = features.extent(0);
  const std::size_t plane = features.extent(1) * features.extent(2);
  std::vector<double> weights(channels, 0.0);
  for (std::size_t k = 0; k < channels; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += grads[k * plane + i];
    weights[k] = s / static_cast<double>(plane);
  }

  GradCamResult result;
  result.layer = net.layer(*last_conv).name;
  result.cam = weighted_cam(features, weights);
  const Tensor up = resize_bilinear(result.cam, x.extent(1), x.extent(2));
  result.upsampled = Tensor(x.shape());
  for (std::size_t c = 0; c < x.extent(0); ++c) {
    std::copy(up.values().begin(), up.values().end(),
              result.upsampled.data().begin() + static_cast<std::ptrdiff_t>(c * up.size()));
  }
  return result;
}

ExplanationMap guided_grad_cam(const Network& net, const Tensor& x, std::size_t class_index,
                               ScoreKind score) {
  const GradCamResult cam = grad_cam(net, x, class_index, score);
  const Tensor gbp = input_gradient(net, x, class_index, ReluRule::Guided, score);
  return finish(mul(gbp, cam.upsampled), Method::GuidedGradCam, class_index,
                {{"cam_layer", cam.layer}, {"upsampling", "bilinear"}, {"score", score_name(score)}});
}

std::vector<Tensor> noisy_explanations(Method base, const Network& net, const Tensor& x,
                                       std::size_t class_index, const NoiseConfig& cfg,
                                       const AttributionOptions& opts) {
  if (!is_deterministic(base)) {
    throw Error(ErrorCode::InvalidArgument, std::string("noise base must be a deterministic method, got ") +
                                                to_string(base));
  }
  if (cfg.samples < 1) throw Error(ErrorCode::InvalidArgument, "noise samples must be >= 1");
  if (!(cfg.sigma_fraction >= 0.0) || !std::isfinite(cfg.sigma_fraction)) {
    throw Error(ErrorCode::InvalidArgument, "sigma fraction must be finite and >= 0");
  }
  const double sigma = cfg.sigma_fraction * (max_value(x) - min_value(x));
  std::vector<Tensor> out;
  out.reserve(cfg.samples);
  Tensor noisy(x.shape());
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    for (std::size_t j = 0; j < noisy.size(); ++j) noisy[j] = x[j] + sigma * rng.normal();
    out.push_back(explain(base, net, noisy, class_index, opts).values);
  }
  return out;
}

Tensor mean_of(const std::vector<Tensor>& samples) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "mean of zero samples");
  Tensor acc(samples.front().shape());
  for (const auto& s : samples) acc = add(acc, s);
  return scale(acc, 1.0 / static_cast<double>(samples.size()));
}

Tensor variance_of(const std::vector<Tensor>& samples) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "variance of zero samples");
  // Two-pass over values shifted by the first sample, so identical samples
  // give exactly zero.
  const Tensor& pivot = samples.front();
  std::vector<Tensor> shifted;
  shifted.reserve(samples.size());
  for (const auto& s : samples) shifted.push_back(sub(s, pivot));
  const Tensor mean = mean_of(shifted);
  Tensor acc(mean.shape());
  for (const auto& s : shifted) {
    for (std::size_t i = 0; i < acc.size(); ++i) {
      const double d = s[i] - mean[i];
      acc[i] += d * d;
    }
  }
  return scale(acc, 1.0 / static_cast<double>(samples.size()));
}

namespace {

nlohmann::json noise_meta(Method base, const NoiseConfig& cfg) {
  return {{"base", to_string(base)},
          {"samples", cfg.samples},
          {"sigma_fraction", cfg.sigma_fraction},
          {"seed", cfg.seed}};
}

}  // namespace

ExplanationMap smooth_grad(Method base, const Network& net, const Tensor& x,
                           std::size_t class_index, const NoiseConfig& cfg,
                           const AttributionOptions& opts) {
  if (cfg.samples < 1) throw Error(ErrorCode::InvalidArgument, "SmoothGrad needs samples >= 1");
  return finish(mean_of(noisy_explanations(base, net, x, class_index, cfg, opts)),
                Method::SmoothGrad, class_index, noise_meta(base, cfg));
}

ExplanationMap var_grad(Method base, const Network& net, const Tensor& x,
                        std::size_t class_index, const NoiseConfig& cfg,
                        const AttributionOptions& opts) {
  if (cfg.samples < 2) throw Error(ErrorCode::InvalidArgument, "VarGrad needs samples >= 2");
  return finish(variance_of(noisy_explanations(base, net, x, class_index, cfg, opts)),
                Method::VarGrad, class_index, noise_meta(base, cfg));
}

ExplanationMap explain(Method method, const Network& net, const Tensor& x,
                       std::size_t class_index, const AttributionOptions& opts) {
  switch (method) {
    case Method::Gradient: return gradient(net, x, class_index, opts.score);
    case Method::IntegratedGradients:
      return integrated_gradients(net, x, class_index, opts.ig, opts.score);
    case Method::GuidedBackprop: return guided_backprop(net, x, class_index, opts.score);
    case Method::GuidedGradCam: return guided_grad_cam(net, x, class_index, opts.score);
    case Method::SmoothGrad:
      return smooth_grad(opts.noise_base, net, x, class_index, opts.noise, opts);
    case Method::VarGrad:
      return var_grad(opts.noise_base, net, x, class_index, opts.noise, opts);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

void save_explanation(const ExplanationMap& map, const std::filesystem::path& dir,
                      const std::string& stem) {
  std::filesystem::create_directories(dir);
  const std::string tensor_file = stem + ".tensor";
  save_tensor(map.values, dir / tensor_file);
  const nlohmann::json sidecar = {{"method", to_string(map.method)},
                                  {"class_index", map.class_index},
                                  {"config", map.metadata},
                                  {"tensor_file", tensor_file}};
  std::ofstream out(dir / (stem + ".json"));
  if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / (stem + ".json")).string());
  out << sidecar.dump(2) << '\n';
}

ExplanationMap load_explanation(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + json_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, json_path.string() + ": " + e.what());
  }
  ExplanationMap map;
  map.method = parse_method(j.at("method").get<std::string>());
  map.class_index = j.at("class_index").get<std::size_t>();
  map.metadata = j.value("config", nlohmann::json::object());
  map.values = load_tensor(json_path.parent_path() / j.at("tensor_file").get<std::string>());
  return map;
}

}  // namespace ssc
