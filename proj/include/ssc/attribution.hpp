#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ssc/network.hpp"

namespace ssc {

enum class Method {
  Gradient,
  IntegratedGradients,
  GuidedBackprop,
  GuidedGradCam,
  SmoothGrad,
  VarGrad,
};

inline constexpr Method kAllMethods[] = {Method::Gradient,      Method::IntegratedGradients,
                                         Method::GuidedBackprop, Method::GuidedGradCam,
                                         Method::SmoothGrad,    Method::VarGrad};

/// "gradient", "integrated_gradients", "guided_backprop", "guided_gradcam",
/// "smoothgrad", "vargrad".
const char* to_string(Method method);
Method parse_method(const std::string& name);
bool is_deterministic(Method method);
bool requires_conv(Method method);

struct IGConfig {
  std::optional<Tensor> baseline;  ///< all zeros when unset
  std::size_t steps = 50;
};

struct NoiseConfig {
  std::size_t samples = 25;
  /// Noise standard deviation as a fraction of (max(x) - min(x)).
  double sigma_fraction = 0.15;
  std::uint64_t seed = 0;
};

struct ExplanationMap {
  Tensor values;
  Method method = Method::Gradient;
  std::size_t class_index = 0;
  nlohmann::json metadata = nlohmann::json::object();
};

struct AttributionOptions {
  IGConfig ig;
  NoiseConfig noise;
  /// Method wrapped by SmoothGrad and VarGrad; must be deterministic.
  Method noise_base = Method::Gradient;
  ScoreKind score = ScoreKind::Logit;
};

ExplanationMap gradient(const Network& net, const Tensor& x, std::size_t class_index,
                        ScoreKind score = ScoreKind::Logit);

/// Midpoint-rule path integral from the baseline to x with `steps` nodes at
/// alpha_k = (k + 0.5) / steps, multiplied elementwise by (x - baseline).
ExplanationMap integrated_gradients(const Network& net, const Tensor& x, std::size_t class_index,
                                    const IGConfig& cfg = {},
                                    ScoreKind score = ScoreKind::Logit);

ExplanationMap guided_backprop(const Network& net, const Tensor& x, std::size_t class_index,
                               ScoreKind score = ScoreKind::Logit);

struct GradCamResult {
  Tensor cam;        ///< [H', W'] at the last conv layer's spatial resolution
  Tensor upsampled;  ///< input shape; bilinear resize of cam copied to every input channel
  std::string layer;  ///< name of the conv layer used
};

/// Class activation map from the last conv2d layer. Uses that layer's
/// post-ReLU activation when a ReLU immediately follows it. Channel weights are
/// spatial means of the gradient; the weighted sum is passed through ReLU.
GradCamResult grad_cam(const Network& net, const Tensor& x, std::size_t class_index,
                       ScoreKind score = ScoreKind::Logit);

/// relu(sum_k weights[k] * features[k]) for features [K, H, W].
Tensor weighted_cam(const Tensor& features, const std::vector<double>& weights);

/// Bilinear resize of a [H, W] map with half-pixel centers and edge clamping.
Tensor resize_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w);

ExplanationMap guided_grad_cam(const Network& net, const Tensor& x, std::size_t class_index,
                               ScoreKind score = ScoreKind::Logit);

/// Base-method explanations at x + g_i for i in [0, samples). Sample i draws
/// its noise from a stream seeded by (cfg.seed, i) only.
std::vector<Tensor> noisy_explanations(Method base, const Network& net, const Tensor& x,
                                       std::size_t class_index, const NoiseConfig& cfg,
                                       const AttributionOptions& opts = {});

ExplanationMap smooth_grad(Method base, const Network& net, const Tensor& x,
                           std::size_t class_index, const NoiseConfig& cfg,
                           const AttributionOptions& opts = {});

/// Elementwise population variance of the noisy base explanations.
ExplanationMap var_grad(Method base, const Network& net, const Tensor& x,
                        std::size_t class_index, const NoiseConfig& cfg,
                        const AttributionOptions& opts = {});

/// Reduce precomputed noisy samples, so SmoothGrad and VarGrad can share them.
Tensor mean_of(const std::vector<Tensor>& samples);
Tensor variance_of(const std::vector<Tensor>& samples);

/// Dispatches on `method` using `opts` for method parameters.
ExplanationMap explain(Method method, const Network& net, const Tensor& x,
                       std::size_t class_index, const AttributionOptions& opts = {});

/// Writes <stem>.tensor (see save_tensor) and a JSON sidecar <stem>.json with
/// {method, class_index, config, tensor_file}.
void save_explanation(const ExplanationMap& map, const std::filesystem::path& dir,
                      const std::string& stem);
ExplanationMap load_explanation(const std::filesystem::path& json_path);

}  // namespace ssc
