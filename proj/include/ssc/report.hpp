#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "ssc/experiment.hpp"
#include "ssc/metrics.hpp"

namespace ssc {

// records.csv columns: method,mode,stage_index,stage_label,image_id,preprocessing,rho
// summary.csv columns: method,mode,stage_index,stage_label,preprocessing,mean_rho,std_rho,n_images
// Degenerate correlations are written as "nan". Reals use %.17g.

std::string records_csv(const std::vector<CorrelationRecord>& records);
std::string summary_csv(const std::vector<StageSummary>& summaries);
std::vector<CorrelationRecord> parse_records_csv(const std::string& text);
std::vector<CorrelationRecord> read_records_csv(const std::filesystem::path& path);

nlohmann::json bundle_to_json(const ReportBundle& bundle);

/// Correlation-vs-stage plot for one randomization mode and preprocessing.
/// x runs from the unrandomized model through the output layer down to the
/// input layer; each method gets a mean polyline and a shaded 1-std band; a
/// dashed red line marks zero correlation.
std::string render_svg(const std::vector<StageSummary>& summaries, const std::string& mode,
                       Preprocessing preprocessing);

/// Writes records.csv, summary.csv, report.json and one
/// plot_<mode>_<preprocessing>.svg per combination present in the summaries.
/// Returns the paths written. I/O failures throw Error(Io) naming the file.
std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle,
                                               const std::filesystem::path& out_dir);

/// Regenerates summary.csv and the SVG plots from an existing records.csv.
std::vector<std::filesystem::path> regenerate_report(const std::filesystem::path& dir);

}  // namespace ssc
