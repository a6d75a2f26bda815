#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssc/tensor.hpp"

namespace ssc {

enum class Preprocessing { Absolute, Signed };

const char* to_string(Preprocessing p);
Preprocessing parse_preprocessing(const std::string& name);

/// 1-based average ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation of the flattened tensors (after |.| when
/// Absolute). Returns nullopt when either side is constant, in which case the
/// correlation is undefined.
std::optional<double> spearman(const Tensor& a, const Tensor& b,
                               Preprocessing preprocessing = Preprocessing::Absolute);

struct CorrelationRecord {
  std::string method;
  std::string mode;
  int stage_index = 0;
  std::string stage_label;
  std::size_t image_id = 0;
  Preprocessing preprocessing = Preprocessing::Absolute;
  std::optional<double> rho;  ///< nullopt marks a degenerate (constant) map

  bool degenerate() const noexcept { return !rho.has_value(); }
};

struct StageSummary {
  std::string method;
  std::string mode;
  int stage_index = 0;
  std::string stage_label;
  Preprocessing preprocessing = Preprocessing::Absolute;
  double mean_rho = 0.0;
  double std_rho = 0.0;  ///< population standard deviation
  std::size_t n_images = 0;
  std::size_t n_degenerate = 0;
};

struct SummaryResult {
  std::vector<StageSummary> summaries;
  /// Groups that had only degenerate records, identified as
  /// "method/mode/stage/preprocessing".
  std::vector<std::string> empty_groups;
  std::size_t degenerate_count = 0;
};

/// Groups by (method, mode, stage, preprocessing) in first-seen order and
/// reports mean and population std of the non-degenerate correlations.
SummaryResult summarize(const std::vector<CorrelationRecord>& records);

}  // namespace ssc
