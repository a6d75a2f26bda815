#include "ssc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ssc/error.hpp"

namespace ssc {

namespace {

std::string fmt_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

std::string records_csv(const std::vector<CorrelationRecord>& records) {
  std::string out = "method,mode,stage_index,stage_label,image_id,preprocessing,rho\n";
  for (const auto& r : records) {
    out += r.method + ',' + r.mode + ',' + std::to_string(r.stage_index) + ',' + r.stage_label +
           ',' + std::to_string(r.image_id) + ',' + to_string(r.preprocessing) + ',' +
           fmt_real(r.rho.value_or(std::nan(""))) + '\n';
  }
  return out;
}

std::string summary_csv(const std::vector<StageSummary>& summaries) {
  std::string out = "method,mode,stage_index,stage_label,preprocessing,mean_rho,std_rho,n_images\n";
  for (const auto& s : summaries) {
    out += s.method + ',' + s.mode + ',' + std::to_string(s.stage_index) + ',' + s.stage_label +
           ',' + to_string(s.preprocessing) + ',' + fmt_real(s.mean_rho) + ',' +
           fmt_real(s.std_rho) + ',' + std::to_string(s.n_images) + '\n';
  }
  return out;
}

std::vector<CorrelationRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "method,mode,stage_index,stage_label,image_id,preprocessing,rho") {
    throw Error(ErrorCode::InvalidArgument, "records.csv: unexpected header");
  }
  std::vector<CorrelationRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) {
      throw Error(ErrorCode::InvalidArgument,
                  "records.csv line " + std::to_string(line_no) + ": expected 7 fields");
    }
    CorrelationRecord r;
    try {
      r.method = f[0];
      r.mode = f[1];
      r.stage_index = std::stoi(f[2]);
      r.stage_label = f[3];
      r.image_id = std::stoull(f[4]);
      r.preprocessing = parse_preprocessing(f[5]);
      if (f[6] != "nan") r.rho = std::stod(f[6]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidArgument,
                  "records.csv line " + std::to_string(line_no) + ": malformed field");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<CorrelationRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_records_csv(ss.str());
}

nlohmann::json bundle_to_json(const ReportBundle& bundle) {
  nlohmann::json j;
  j["config"] = bundle.config;
  j["wall_seconds"] = bundle.wall_seconds;
  j["testbed"] = bundle.testbed;
  j["target_classes"] = bundle.target_classes;
  j["accuracies"] = nlohmann::json::array();
  for (const auto& a : bundle.accuracies) {
    j["accuracies"].push_back({{"mode", a.mode},
                               {"stage_index", a.stage_index},
                               {"stage_label", a.stage_label},
                               {"accuracy", a.accuracy}});
  }
  j["summaries"] = nlohmann::json::array();
  for (const auto& s : bundle.summary.summaries) {
    j["summaries"].push_back({{"method", s.method},
                              {"mode", s.mode},
                              {"stage_index", s.stage_index},
                              {"stage_label", s.stage_label},
                              {"preprocessing", to_string(s.preprocessing)},
                              {"mean_rho", s.mean_rho},
                              {"std_rho", s.std_rho},
                              {"n_images", s.n_images},
                              {"n_degenerate", s.n_degenerate}});
  }
  j["degenerate_count"] = bundle.summary.degenerate_count;
  j["empty_groups"] = bundle.summary.empty_groups;
  j["records"] = nlohmann::json::array();
  for (const auto& r : bundle.records) {
    j["records"].push_back({{"method", r.method},
                            {"mode", r.mode},
                            {"stage_index", r.stage_index},
                            {"stage_label", r.stage_label},
                            {"image_id", r.image_id},
                            {"preprocessing", to_string(r.preprocessing)},
                            {"rho", r.rho ? nlohmann::json(*r.rho) : nlohmann::json(nullptr)}});
  }
  if (bundle.error) j["error"] = *bundle.error;
  return j;
}

std::string render_svg(const std::vector<StageSummary>& summaries, const std::string& mode,
                       Preprocessing preprocessing) {
  std::vector<const StageSummary*> selected;
  for (const auto& s : summaries) {
    if (s.preprocessing == preprocessing && (s.mode == mode || s.stage_index == kOriginalStage)) {
      selected.push_back(&s);
    }
  }
  std::map<int, std::string> stage_labels;
  std::vector<std::string> methods;
  for (const auto* s : selected) {
    stage_labels.emplace(s->stage_index, s->stage_label);
    if (std::find(methods.begin(), methods.end(), s->method) == methods.end()) {
      methods.push_back(s->method);
    }
  }
  std::map<int, std::size_t> column;
  for (const auto& [idx, label] : stage_labels) column.emplace(idx, column.size());

  const double width = 720, height = 440;
  const double left = 60, right = 180, top = 40, bottom = 70;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const std::size_t columns = std::max<std::size_t>(column.size(), 2);
  auto xpos = [&](int stage) {
    return left + plot_w * static_cast<double>(column.at(stage)) / static_cast<double>(columns - 1);
  };
  auto ypos = [&](double rho) { return top + plot_h * (1.0 - (std::clamp(rho, -1.0, 1.0) + 1.0) / 2.0); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(mode) << " randomization (" << to_string(preprocessing)
      << " attributions)</text>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double tick : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    svg << "<text x=\"" << left - 6 << "\" y=\"" << fmt_px(ypos(tick) + 4)
        << "\" text-anchor=\"end\">" << tick << "</text>\n";
  }
  svg << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 16 "
      << top + plot_h / 2 << ")\" text-anchor=\"middle\">rank correlation</text>\n";
  for (const auto& [idx, label] : stage_labels) {
    const double x = xpos(idx);
    svg << "<text x=\"" << fmt_px(x) << "\" y=\"" << top + plot_h + 14 << "\" transform=\"rotate(30 "
        << fmt_px(x) << ' ' << top + plot_h + 14 << ")\">" << xml_escape(label) << "</text>\n";
  }
  svg << "<line x1=\"" << left << "\" y1=\"" << fmt_px(ypos(0)) << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << fmt_px(ypos(0)) << "\" stroke=\"red\" stroke-dasharray=\"6 4\"/>\n";

  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<const StageSummary*> pts;
    for (const auto* s : selected) {
      if (s->method == methods[m]) pts.push_back(s);
    }
    std::sort(pts.begin(), pts.end(),
              [](const StageSummary* a, const StageSummary* b) { return a->stage_index < b->stage_index; });
    const char* color = kPalette[m % std::size(kPalette)];
    std::string upper, lower, line;
    for (const auto* p : pts) {
      const std::string x = fmt_px(xpos(p->stage_index));
      upper += x + ',' + fmt_px(ypos(p->mean_rho + p->std_rho)) + ' ';
      line += x + ',' + fmt_px(ypos(p->mean_rho)) + ' ';
    }
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
      lower += fmt_px(xpos((*it)->stage_index)) + ',' +
               fmt_px(ypos((*it)->mean_rho - (*it)->std_rho)) + ' ';
    }
    svg << "<polygon points=\"" << upper << lower << "\" fill=\"" << color
        << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    svg << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(m);
    svg << "<line x1=\"" << left + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + plot_w + 32
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << left + plot_w + 38 << "\" y=\"" << ly + 4 << "\">" << xml_escape(methods[m])
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

namespace {

std::vector<std::filesystem::path> write_plots(const std::vector<StageSummary>& summaries,
                                               const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  std::set<std::pair<std::string, Preprocessing>> combos;
  for (const auto& s : summaries) {
    if (s.stage_index != kOriginalStage) combos.emplace(s.mode, s.preprocessing);
  }
  for (const auto& [mode, pre] : combos) {
    const auto path = dir / ("plot_" + mode + "_" + to_string(pre) + ".svg");
    write_text(path, render_svg(summaries, mode, pre));
    written.push_back(path);
  }
  return written;
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle,
                                               const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  write_text(out_dir / "records.csv", records_csv(bundle.records));
  written.push_back(out_dir / "records.csv");
  write_text(out_dir / "summary.csv", summary_csv(bundle.summary.summaries));
  written.push_back(out_dir / "summary.csv");
  write_text(out_dir / "report.json", bundle_to_json(bundle).dump(2) + "\n");
  written.push_back(out_dir / "report.json");
  for (auto& p : write_plots(bundle.summary.summaries, out_dir)) written.push_back(std::move(p));
  return written;
}

std::vector<std::filesystem::path> regenerate_report(const std::filesystem::path& dir) {
  const auto records = read_records_csv(dir / "records.csv");
  const auto summary = summarize(records);
  std::vector<std::filesystem::path> written;
  write_text(dir / "summary.csv", summary_csv(summary.summaries));
  written.push_back(dir / "summary.csv");
  for (auto& p : write_plots(summary.summaries, dir)) written.push_back(std::move(p));
  return written;
}

}  // namespace ssc
