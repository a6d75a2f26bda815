#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ssc/attribution.hpp"
#include "ssc/datasets.hpp"
#include "ssc/error.hpp"
#include "ssc/metrics.hpp"
#include "ssc/network.hpp"
#include "ssc/randomizer.hpp"
#include "ssc/trainer.hpp"

namespace ssc {

/// Stage index and label of the unrandomized self-check stage.
inline constexpr int kOriginalStage = -1;
inline constexpr const char* kOriginalLabel = "original";
inline constexpr const char* kOriginalMode = "none";

struct ExperimentConfig {
  std::string model_name = "model";
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  std::vector<RandomizationMode> modes{RandomizationMode::Cascading,
                                       RandomizationMode::Independent};
  std::vector<Preprocessing> preprocessings{Preprocessing::Absolute, Preprocessing::Signed};
  std::size_t testbed_size = 200;
  std::uint64_t randomize_seed = 2;
  std::uint64_t noise_seed = 3;
  std::uint64_t testbed_seed = 4;
  AttributionOptions attribution;
  /// Distribution used to re-initialize layers; should match training.
  InitKind init_kind = InitKind::UniformFan;
  /// Worker threads over test-bed images; 0 means hardware concurrency.
  std::size_t workers = 0;
  /// Evaluate every variant on the full test split.
  bool record_accuracy = true;

  /// Throws Error(InvalidArgument) for empty lists or methods the network
  /// cannot support (GradCAM without a conv layer).
  void validate(const Network& net) const;
  nlohmann::json to_json() const;
};

struct StageAccuracy {
  std::string mode;
  int stage_index = 0;
  std::string stage_label;
  double accuracy = 0.0;
};

struct ReportBundle {
  std::vector<CorrelationRecord> records;
  SummaryResult summary;
  std::vector<StageAccuracy> accuracies;
  std::vector<std::size_t> testbed;
  std::vector<std::size_t> target_classes;  ///< original-model prediction per test-bed image
  nlohmann::json config;
  double wall_seconds = 0.0;
  /// Set when a stage failed; records hold everything completed before it.
  std::optional<std::string> error;
  std::optional<ErrorCode> error_code;
};

/// Explanations of `x` for every method in `methods` (in order). SmoothGrad
/// and VarGrad share one set of noisy samples when both are requested.
std::vector<Tensor> explain_all(const Network& net, const Tensor& x, std::size_t class_index,
                                const std::vector<Method>& methods,
                                const AttributionOptions& opts);

/// Freezes each test-bed image's target class to the original model's
/// prediction, explains every image under the original model (stage -1, a
/// fresh recomputation) and every randomized variant, and correlates each
/// against the original explanation.
ReportBundle run_experiment(const ExperimentConfig& cfg, const Network& net,
                            const Dataset& test);

}  // namespace ssc
