#include "ssc/experiment.hpp"

#include <algorithm>
#include <chrono>

#include "ssc/error.hpp"
#include "ssc/parallel.hpp"
#include "ssc/random.hpp"

namespace ssc {

void ExperimentConfig::validate(const Network& net) const {
  if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "no attribution methods selected");
  if (modes.empty()) throw Error(ErrorCode::InvalidArgument, "no randomization modes selected");
  if (preprocessings.empty()) throw Error(ErrorCode::InvalidArgument, "no preprocessing selected");
  if (testbed_size == 0) throw Error(ErrorCode::InvalidArgument, "test bed size must be >= 1");
  bool has_conv = false;
  for (const auto& l : net.layers()) has_conv = has_conv || l.kind == LayerKind::Conv2d;
  for (auto m : methods) {
    if (requires_conv(m) && !has_conv) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string(to_string(m)) + " requires a convolutional layer");
    }
  }
  const bool noisy = std::any_of(methods.begin(), methods.end(),
                                 [](Method m) { return !is_deterministic(m); });
  if (noisy) {
    if (!is_deterministic(attribution.noise_base)) {
      throw Error(ErrorCode::InvalidArgument, "noise base method must be deterministic");
    }
    if (requires_conv(attribution.noise_base) && !has_conv) {
      throw Error(ErrorCode::InvalidArgument, "noise base requires a convolutional layer");
    }
    const bool vargrad = std::find(methods.begin(), methods.end(), Method::VarGrad) != methods.end();
    if (attribution.noise.samples < (vargrad ? 2u : 1u)) {
      throw Error(ErrorCode::InvalidArgument, "too few noise samples");
    }
  }
  if (attribution.ig.steps < 1) throw Error(ErrorCode::InvalidArgument, "IG steps must be >= 1");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["model"] = model_name;
  for (auto m : methods) j["methods"].push_back(to_string(m));
  for (auto m : modes) j["modes"].push_back(to_string(m));
  for (auto p : preprocessings) j["preprocessing"].push_back(to_string(p));
  j["testbed_size"] = testbed_size;
  j["seeds"] = {{"randomize", randomize_seed}, {"noise", noise_seed}, {"testbed", testbed_seed}};
  j["ig_steps"] = attribution.ig.steps;
  j["noise"] = {{"samples", attribution.noise.samples},
                {"sigma_fraction", attribution.noise.sigma_fraction},
                {"base", to_string(attribution.noise_base)}};
  j["score"] = attribution.score == ScoreKind::Logit ? "logit" : "softmax";
  j["init"] = to_string(init_kind);
  return j;
}

std::vector<Tensor> explain_all(const Network& net, const Tensor& x, std::size_t class_index,
                                const std::vector<Method>& methods,
                                const AttributionOptions& opts) {
  std::vector<Tensor> out(methods.size());
  std::optional<std::vector<Tensor>> noisy;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const Method m = methods[i];
    if (is_deterministic(m)) {
      out[i] = explain(m, net, x, class_index, opts).values;
      continue;
    }
    if (!noisy) noisy = noisy_explanations(opts.noise_base, net, x, class_index, opts.noise, opts);
    out[i] = m == Method::SmoothGrad ? mean_of(*noisy) : variance_of(*noisy);
    if (!all_finite(out[i])) {
      throw Error(ErrorCode::NonFinite, std::string(to_string(m)) + " produced non-finite values");
    }
  }
  return out;
}

namespace {

struct Stage {
  std::string mode;
  int index;
  std::string label;
  const Network* net;
};

}  // namespace

ReportBundle run_experiment(const ExperimentConfig& cfg, const Network& net,
                            const Dataset& test) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate(net);
  if (test.image_shape() != net.input_shape()) {
    throw Error(ErrorCode::ShapeMismatch, "test images " + shape_to_string(test.image_shape()) +
                                              " do not match network input " +
                                              shape_to_string(net.input_shape()));
  }

  ReportBundle bundle;
  bundle.config = cfg.to_json();
  bundle.testbed = sample_testbed(test, cfg.testbed_size, cfg.testbed_seed).indices;
  const std::size_t n = bundle.testbed.size();

  // Per-image options: noise streams keyed by image id, never by schedule.
  std::vector<AttributionOptions> image_opts(n, cfg.attribution);
  for (std::size_t i = 0; i < n; ++i) {
    image_opts[i].noise.seed = mix_seed(cfg.noise_seed, static_cast<std::uint64_t>(bundle.testbed[i]));
  }

  std::vector<Tensor> images(n);
  bundle.target_classes.resize(n);
  std::vector<std::vector<Tensor>> originals(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    images[i] = test.image(bundle.testbed[i]);
    bundle.target_classes[i] = predict_class(net, images[i]);
    originals[i] = explain_all(net, images[i], bundle.target_classes[i], cfg.methods, image_opts[i]);
  });

  std::vector<std::vector<RandomizedVariant>> all_variants;
  for (auto mode : cfg.modes) {
    const InitScheme scheme{cfg.init_kind, 0};
    all_variants.push_back(variants(net, make_plan(net, mode, cfg.randomize_seed), scheme));
  }

  // The self-check stage evaluates an independent copy of the original model.
  const Network original_copy = net;
  std::vector<Stage> stages{{kOriginalMode, kOriginalStage, kOriginalLabel, &original_copy}};
  for (const auto& vs : all_variants) {
    for (const auto& v : vs) {
      stages.push_back({to_string(v.mode), static_cast<int>(v.stage_index), v.stage_label, &v.network});
    }
  }

  for (const auto& stage : stages) {
    try {
      std::vector<std::vector<Tensor>> maps(n);
      parallel_for(n, cfg.workers, [&](std::size_t i) {
        maps[i] = explain_all(*stage.net, images[i], bundle.target_classes[i], cfg.methods,
                              image_opts[i]);
      });
      for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        for (std::size_t i = 0; i < n; ++i) {
          for (auto pre : cfg.preprocessings) {
            bundle.records.push_back({to_string(cfg.methods[m]), stage.mode, stage.index,
                                      stage.label, bundle.testbed[i], pre,
                                      spearman(originals[i][m], maps[i][m], pre)});
          }
        }
      }
      if (cfg.record_accuracy) {
        bundle.accuracies.push_back(
            {stage.mode, stage.index, stage.label, evaluate_accuracy(*stage.net, test, cfg.workers)});
      }
    } catch (const Error& e) {
      bundle.error = "stage " + stage.mode + "/" + std::to_string(stage.index) + " (" +
                     stage.label + "): " + e.what();
      bundle.error_code = e.code();
      break;
    }
  }

  bundle.summary = summarize(bundle.records);
  bundle.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return bundle;
}

}  // namespace ssc
