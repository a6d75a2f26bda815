#include "ssc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "ssc/error.hpp"

namespace ssc {

const char* to_string(Preprocessing p) {
  return p == Preprocessing::Absolute ? "absolute" : "signed";
}

Preprocessing parse_preprocessing(const std::string& name) {
  if (name == "absolute") return Preprocessing::Absolute;
  if (name == "signed") return Preprocessing::Signed;
  throw Error(ErrorCode::InvalidArgument, "unknown preprocessing '" + name + "'");
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 (0-based) share rank mean((i+1)..j).
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

std::optional<double> spearman(const Tensor& a, const Tensor& b, Preprocessing preprocessing) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "spearman: shapes " + shape_to_string(a.shape()) +
                                              " and " + shape_to_string(b.shape()) + " differ");
  }
  if (a.size() < 2) throw Error(ErrorCode::InvalidArgument, "spearman needs at least 2 elements");
  auto prepare = [&](const Tensor& t) {
    std::vector<double> v(t.values());
    if (preprocessing == Preprocessing::Absolute) {
      for (auto& x : v) x = std::abs(x);
    }
    return v;
  };
  const auto va = prepare(a);
  const auto vb = prepare(b);
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(va) || constant(vb)) return std::nullopt;
  const double rho = pearson(average_ranks(va), average_ranks(vb));
  return std::clamp(rho, -1.0, 1.0);
}

SummaryResult summarize(const std::vector<CorrelationRecord>& records) {
  using Key = std::tuple<std::string, std::string, int, Preprocessing>;
  std::map<Key, std::size_t> slot;
  std::vector<std::vector<const CorrelationRecord*>> groups;
  std::vector<Key> keys;
  for (const auto& r : records) {
    Key key{r.method, r.mode, r.stage_index, r.preprocessing};
    auto [it, inserted] = slot.emplace(key, groups.size());
    if (inserted) {
      groups.emplace_back();
      keys.push_back(key);
    }
    groups[it->second].push_back(&r);
  }

  SummaryResult result;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    StageSummary s;
    s.method = groups[g].front()->method;
    s.mode = groups[g].front()->mode;
    s.stage_index = groups[g].front()->stage_index;
    s.stage_label = groups[g].front()->stage_label;
    s.preprocessing = groups[g].front()->preprocessing;
    std::vector<double> values;
    for (const auto* r : groups[g]) {
      if (r->rho) {
        values.push_back(*r->rho);
      } else {
        ++s.n_degenerate;
      }
    }
    result.degenerate_count += s.n_degenerate;
    if (values.empty()) {
      result.empty_groups.push_back(s.method + "/" + s.mode + "/" + std::to_string(s.stage_index) +
                                    "/" + to_string(s.preprocessing));
      continue;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    s.mean_rho = mean;
    s.std_rho = std::sqrt(var);
    s.n_images = values.size();
    result.summaries.push_back(std::move(s));
  }
  return result;
}

}  // namespace ssc
