#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cascadecay/scaling.hpp"
#include "cascadecay/synthgen.hpp"
#include "helpers.hpp"

using namespace cascadecay;
using cascadecay::testing::make_ex;
using cascadecay::testing::make_set;
using cascadecay::testing::u01;

namespace {

// One positive example per latency value, on a single edge.
ExampleSet set_with_latencies(const std::vector<double>& latencies, int label = 1) {
  EdgeExamples group{{1, 2}, {}};
  for (std::size_t i = 0; i < latencies.size(); ++i) {
    auto ex = make_ex(static_cast<MessageId>(i + 1),
                      static_cast<std::int64_t>(i + 1), label);
    ex.latency = latencies[i];
    group.examples.push_back(ex);
  }
  return make_set({std::move(group)});
}

double histogram_integral(const std::vector<HistogramBin>& hist, double base) {
  double sum = 0.0;
  for (const auto& b : hist) {
    const double lo = b.center / std::sqrt(base);
    sum += b.density * (lo * base - lo);
  }
  return sum;
}

}  // namespace

TEST_CASE("all-equal latencies give one bin integrating to one") {
  const auto set = set_with_latencies(std::vector<double>(50, 1.0));
  LogBinning bins;
  const auto hist = latency_histogram(set, bins, LabelFilter::positives_only);
  REQUIRE(hist.size() == 1);
  CHECK(hist[0].count == 50);
  CHECK(histogram_integral(hist, bins.base) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("histogram density integrates to one on random data") {
  std::mt19937_64 rng(5);
  std::vector<double> latencies;
  for (int i = 0; i < 5000; ++i) {
    latencies.push_back(1.0 + 400.0 * u01(rng) * u01(rng));
  }
  const auto set = set_with_latencies(latencies);
  LogBinning bins;
  const auto hist = latency_histogram(set, bins, LabelFilter::all);
  CHECK(histogram_integral(hist, bins.base) == doctest::Approx(1.0).epsilon(1e-9));
  for (const auto& b : hist) {
    CHECK(b.density >= 0.0);
    CHECK(b.count >= 1);
  }
}

TEST_CASE("histogram recovers the exponent of inverse-CDF power-law samples") {
  // Pareto with density exponent -1.5 on [1, inf): F^{-1}(u) = (1-u)^(-2).
  std::mt19937_64 rng(17);
  std::vector<double> latencies;
  for (int i = 0; i < 200000; ++i) {
    latencies.push_back(std::pow(1.0 - u01(rng), -2.0));
  }
  const auto set = set_with_latencies(latencies);
  LogBinning bins;
  const auto hist = latency_histogram(set, bins, LabelFilter::positives_only);
  Diagnostics diag;
  const auto fit = fit_power_law(curve_points(hist, 100), diag);
  CHECK(fit.slope == doctest::Approx(-1.5).epsilon(0.1 / 1.5));
  CHECK(fit.r_squared > 0.95);
}

TEST_CASE("positives_only on an all-negative set is an empty-result error") {
  const auto set = set_with_latencies(std::vector<double>(10, 2.0), 0);
  LogBinning bins;
  CHECK_THROWS_AS(latency_histogram(set, bins, LabelFilter::positives_only),
                  EmptyResultError);
  CHECK(latency_histogram(set, bins, LabelFilter::all).size() >= 1);
}

TEST_CASE("undefined latencies are excluded from scaling analyses") {
  EdgeExamples group{{1, 2}, {}};
  group.examples.push_back(make_ex(1, 10, 1));  // undefined latency
  auto with_latency = make_ex(2, 20, 1);
  with_latency.latency = 3.0;
  group.examples.push_back(with_latency);
  const auto set = make_set({std::move(group)});
  LogBinning bins;
  const auto hist = latency_histogram(set, bins, LabelFilter::all);
  std::size_t total = 0;
  for (const auto& b : hist) total += b.count;
  CHECK(total == 1);
}

TEST_CASE("ratio curve: 3 positives and 7 negatives in one bin") {
  EdgeExamples group{{1, 2}, {}};
  for (int i = 0; i < 10; ++i) {
    auto ex = make_ex(static_cast<MessageId>(i + 1), i + 1, i < 3);
    ex.latency = 1.05;
    group.examples.push_back(ex);
  }
  const auto set = make_set({std::move(group)});
  LogBinning bins;
  const auto curve = propagation_ratio_curve(set, bins);
  REQUIRE(curve.size() == 1);
  CHECK(curve[0].ratio == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(curve[0].n == 10);
}

TEST_CASE("all-positive set has ratio one in every occupied bin") {
  std::mt19937_64 rng(3);
  std::vector<double> latencies;
  for (int i = 0; i < 500; ++i) latencies.push_back(1.0 + 50.0 * u01(rng));
  const auto set = set_with_latencies(latencies, 1);
  LogBinning bins;
  for (const auto& p : propagation_ratio_curve(set, bins)) {
    CHECK(p.ratio == 1.0);
  }
}

TEST_CASE("ratio curve drops bins under min_count and counts add up") {
  std::mt19937_64 rng(11);
  std::vector<double> latencies;
  for (int i = 0; i < 3000; ++i) {
    latencies.push_back(std::pow(1.0 - u01(rng), -1.2));
  }
  const auto set = set_with_latencies(latencies);
  LogBinning bins;
  bins.min_count = 25;
  const auto curve = propagation_ratio_curve(set, bins);
  std::size_t kept = 0;
  for (const auto& p : curve) {
    CHECK(p.n >= bins.min_count);
    CHECK(p.ratio >= 0.0);
    CHECK(p.ratio <= 1.0);
    kept += p.n;
  }
  LogBinning all_bins;
  all_bins.min_count = 1;
  std::size_t total = 0;
  for (const auto& p : propagation_ratio_curve(set, all_bins)) total += p.n;
  CHECK(total == latencies.size());
  CHECK(kept <= total);
}

TEST_CASE("decay-labeled samples reproduce the generator exponent") {
  // Labels drawn per P = 0.5 * tau^(-0.71); the ratio curve must come back
  // with that slope.
  std::mt19937_64 rng(29);
  EdgeExamples group{{1, 2}, {}};
  for (int i = 0; i < 400000; ++i) {
    const double tau = std::pow(1.0 - u01(rng), -1.25);
    const double p = 0.5 * std::pow(tau, -0.71);
    auto ex = make_ex(static_cast<MessageId>(i + 1), i + 1, u01(rng) < p);
    ex.latency = tau;
    group.examples.push_back(ex);
  }
  const auto set = make_set({std::move(group)});
  LogBinning bins;
  bins.min_count = 200;
  Diagnostics diag;
  const auto fit = fit_power_law(curve_points(propagation_ratio_curve(set, bins)), diag);
  CHECK(fit.slope == doctest::Approx(-0.71).epsilon(0.07 / 0.71));
}

TEST_CASE("noiseless power-law points fit exactly") {
  std::vector<std::pair<double, double>> points;
  for (int i = 0; i < 30; ++i) {
    const double x = std::pow(10.0, 0.1 * i);
    points.emplace_back(x, 2.0 * std::pow(x, -0.71));
  }
  Diagnostics diag;
  const auto fit = fit_power_law(points, diag);
  CHECK(fit.slope == doctest::Approx(-0.71).epsilon(1e-9));
  CHECK(fit.intercept == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.n_points == 30);
}

TEST_CASE("two points pin the line") {
  Diagnostics diag;
  const auto fit = fit_power_law({{1.0, 1.0}, {10.0, 0.1}}, diag);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("noisy synthetic curve recovers the exponent") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<std::pair<double, double>> points;
  for (int i = 0; i < 40; ++i) {
    const double x = std::pow(10.0, 0.08 * i);
    points.emplace_back(x, 3.0 * std::pow(x, -1.3) * std::exp(noise(rng)));
  }
  Diagnostics diag;
  const auto fit = fit_power_law(points, diag);
  CHECK(fit.slope == doctest::Approx(-1.3).epsilon(0.05 / 1.3));
}

TEST_CASE("nonpositive points are dropped with a warning") {
  Diagnostics diag;
  const auto fit =
      fit_power_law({{1.0, 1.0}, {10.0, 0.1}, {100.0, 0.0}, {-3.0, 5.0}}, diag);
  CHECK(fit.n_points == 2);
  CHECK(diag.count("nonpositive_point") == 2);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("fewer than two usable points is a fit error") {
  Diagnostics diag;
  CHECK_THROWS_AS(fit_power_law({{1.0, 1.0}}, diag), DataError);
  CHECK_THROWS_AS(fit_power_law({{1.0, 1.0}, {0.0, 2.0}}, diag), DataError);
  // Identical x has no slope.
  CHECK_THROWS_AS(fit_power_law({{2.0, 1.0}, {2.0, 3.0}}, diag), DataError);
}

TEST_CASE("latency rescaling shifts the intercept but not the slope") {
  std::mt19937_64 rng(53);
  std::vector<std::pair<double, double>> points, scaled;
  const double c = 7.3;
  for (int i = 0; i < 25; ++i) {
    const double x = std::pow(10.0, 0.1 * i);
    const double y = 1.7 * std::pow(x, -0.9) * std::exp(0.01 * u01(rng));
    points.emplace_back(x, y);
    scaled.emplace_back(c * x, y);
  }
  Diagnostics diag;
  const auto base = fit_power_law(points, diag);
  const auto shifted = fit_power_law(scaled, diag);
  CHECK(shifted.slope == doctest::Approx(base.slope).epsilon(1e-9));
  CHECK(shifted.intercept != doctest::Approx(base.intercept).epsilon(1e-3));
}

TEST_CASE("edge timeline returns chronological entries") {
  auto set = make_set({{FollowEdge{1, 2},
                        {make_ex(5, 10, 0), make_ex(6, 20, 1, 25),
                         make_ex(7, 30, 0)}},
                       {FollowEdge{3, 4}, {}}});
  const auto timeline = edge_timeline(set, {1, 2});
  REQUIRE(timeline.size() == 3);
  CHECK(timeline[0].exposure_time == 10);
  CHECK(timeline[1].label == 1);
  CHECK(timeline[2].exposure_time == 30);
  CHECK(edge_timeline(set, {3, 4}).empty());
  CHECK_THROWS_AS(edge_timeline(set, {9, 9}), NotFoundError);
}

TEST_CASE("timeline replays the generator's exposure gaps exactly") {
  SynthConfig sc;
  sc.n_users = 10;
  sc.n_edges = 12;
  sc.horizon_seconds = 40 * 86400;
  sc.seed = 99;
  const auto graph = generate_graph(sc);
  const auto truth = draw_ground_truth(graph, sc);
  const auto set = generate_examples(graph, truth, sc);
  REQUIRE(!set.edges.empty());
  for (const auto& group : set.edges) {
    const auto timeline = edge_timeline(set, group.edge);
    REQUIRE(timeline.size() == group.examples.size());
    for (std::size_t i = 0; i < timeline.size(); ++i) {
      CHECK(timeline[i].exposure_time == group.examples[i].exposure_time);
      CHECK(timeline[i].label == group.examples[i].label);
      if (i > 0) CHECK(timeline[i].exposure_time > timeline[i - 1].exposure_time);
    }
  }
}
