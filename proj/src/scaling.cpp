#include "cascadecay/scaling.hpp"

#include <algorithm>
#include <map>

#include "cascadecay/textio.hpp"

namespace cascadecay {

namespace {

void validate_binning(const LogBinning& bins) {
  if (!(bins.base > 1.0)) throw ConfigError("log binning base must exceed 1");
  if (bins.min_count < 1) throw ConfigError("min_count must be >= 1");
}

std::int64_t bin_index(double x, double log_base) {
  return static_cast<std::int64_t>(std::floor(std::log(x) / log_base));
}

struct BinCounts {
  std::size_t total = 0;
  std::size_t positives = 0;
};

// Latencies are >= 1, so bin indices start at 0.
std::map<std::int64_t, BinCounts> collect_bins(const ExampleSet& set,
                                               const LogBinning& bins,
                                               LabelFilter filter) {
  double log_base = std::log(bins.base);
  std::map<std::int64_t, BinCounts> counts;
  for (const auto& group : set.edges) {
    for (const auto& ex : group.examples) {
      if (!ex.latency) continue;
      if (filter == LabelFilter::positives_only && ex.label != 1) continue;
      auto& bin = counts[bin_index(*ex.latency, log_base)];
      ++bin.total;
      if (ex.label == 1) ++bin.positives;
    }
  }
  return counts;
}

}  // namespace

std::vector<HistogramBin> latency_histogram(const ExampleSet& set,
                                            const LogBinning& bins,
                                            LabelFilter filter) {
  validate_binning(bins);
  auto counts = collect_bins(set, bins, filter);
  std::size_t total = 0;
  for (const auto& [m, c] : counts) total += c.total;
  if (total == 0) {
    throw EmptyResultError("latency_histogram: no matching defined-latency examples");
  }
  std::vector<HistogramBin> out;
  out.reserve(counts.size());
  for (const auto& [m, c] : counts) {
    double lo = std::pow(bins.base, static_cast<double>(m));
    double hi = lo * bins.base;
    HistogramBin bin;
    bin.center = std::pow(bins.base, static_cast<double>(m) + 0.5);
    bin.count = c.total;
    bin.density = static_cast<double>(c.total) /
                  (static_cast<double>(total) * (hi - lo));
    out.push_back(bin);
  }
  return out;
}

std::vector<RatioPoint> propagation_ratio_curve(const ExampleSet& set,
                                                const LogBinning& bins) {
  validate_binning(bins);
  auto counts = collect_bins(set, bins, LabelFilter::all);
  if (counts.empty()) {
    throw EmptyResultError("propagation_ratio_curve: no defined-latency examples");
  }
  std::vector<RatioPoint> out;
  for (const auto& [m, c] : counts) {
    if (c.total < bins.min_count) continue;
    RatioPoint p;
    p.center = std::pow(bins.base, static_cast<double>(m) + 0.5);
    p.ratio = static_cast<double>(c.positives) / static_cast<double>(c.total);
    p.n = c.total;
    out.push_back(p);
  }
  return out;
}

ScalingFit fit_power_law(const std::vector<std::pair<double, double>>& points,
                         Diagnostics& diag) {
  std::vector<std::pair<double, double>> logs;
  logs.reserve(points.size());
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) {
      diag.report(Severity::warning, "nonpositive_point",
                  "dropped (" + format_short(x) + ", " + format_short(y) + ")");
      continue;
    }
    logs.push_back({std::log(x), std::log(y)});
  }
  if (logs.size() < 2) {
    throw DataError("fit_power_law: need at least 2 points with x > 0 and y > 0");
  }
  double n = static_cast<double>(logs.size());
  double sx = 0, sy = 0;
  for (const auto& [lx, ly] : logs) {
    sx += lx;
    sy += ly;
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [lx, ly] : logs) {
    sxx += (lx - mx) * (lx - mx);
    sxy += (lx - mx) * (ly - my);
    syy += (ly - my) * (ly - my);
  }
  if (sxx == 0.0) {
    throw DataError("fit_power_law: all x values coincide");
  }
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  fit.r_squared = std::clamp(fit.r_squared, 0.0, 1.0);
  fit.n_points = logs.size();
  return fit;
}

std::vector<TimelineEntry> edge_timeline(const ExampleSet& set,
                                         const FollowEdge& edge) {
  const EdgeExamples* group = set.find_edge(edge);
  if (group == nullptr) {
    throw NotFoundError("edge_timeline: edge " + std::to_string(edge.followee) +
                        ":" + std::to_string(edge.follower) + " not in set");
  }
  std::vector<TimelineEntry> out;
  out.reserve(group->examples.size());
  for (const auto& ex : group->examples) {
    out.push_back({ex.exposure_time, ex.label, ex.latency});
  }
  return out;
}

std::vector<std::pair<double, double>> curve_points(
    const std::vector<RatioPoint>& curve) {
  std::vector<std::pair<double, double>> out;
  out.reserve(curve.size());
  for (const auto& p : curve) out.push_back({p.center, p.ratio});
  return out;
}

std::vector<std::pair<double, double>> curve_points(
    const std::vector<HistogramBin>& hist, std::size_t min_count) {
  std::vector<std::pair<double, double>> out;
  out.reserve(hist.size());
  for (const auto& b : hist) {
    if (b.count < min_count) continue;
    out.push_back({b.center, b.density});
  }
  return out;
}

}  // namespace cascadecay
