#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "cascadecay/corpus.hpp"
#include "cascadecay/diagnostics.hpp"

namespace cascadecay {

struct LogBinning {
  double base = std::pow(10.0, 0.1);  // 10 bins per decade
  std::size_t min_count = 10;         // bins below this are dropped from curves
};

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;  // of the log-log line, i.e. ln(prefactor)
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

enum class LabelFilter : std::uint8_t { positives_only, all };

struct HistogramBin {
  double center = 0.0;  // geometric bin center
  double density = 0.0;
  std::size_t count = 0;
};

struct RatioPoint {
  double center = 0.0;
  double ratio = 0.0;
  std::size_t n = 0;
};

struct TimelineEntry {
  std::int64_t exposure_time = 0;
  std::uint8_t label = 0;
  std::optional<double> latency;
};

// Log-binned density of defined latencies; integrates to 1 over the emitted
// bins. Undefined-latency examples are excluded everywhere in this module.
std::vector<HistogramBin> latency_histogram(const ExampleSet& set,
                                            const LogBinning& bins,
                                            LabelFilter filter);

// Per bin, positives / (positives + negatives); bins with fewer than
// min_count examples are omitted.
std::vector<RatioPoint> propagation_ratio_curve(const ExampleSet& set,
                                                const LogBinning& bins);

// Least squares on (ln x, ln y). Points with x <= 0 or y <= 0 are dropped
// with a warning; fewer than 2 usable points is an error.
ScalingFit fit_power_law(const std::vector<std::pair<double, double>>& points,
                         Diagnostics& diag);

std::vector<TimelineEntry> edge_timeline(const ExampleSet& set,
                                         const FollowEdge& edge);

std::vector<std::pair<double, double>> curve_points(
    const std::vector<RatioPoint>& curve);
std::vector<std::pair<double, double>> curve_points(
    const std::vector<HistogramBin>& hist, std::size_t min_count);

}  // namespace cascadecay
