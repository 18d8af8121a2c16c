#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "cascadecay/evaluation.hpp"
#include "cascadecay/synthgen.hpp"
#include "helpers.hpp"

using namespace cascadecay;
using cascadecay::testing::make_ex;
using cascadecay::testing::make_set;
using cascadecay::testing::u01;

namespace {

constexpr std::int64_t kDay = 86400;

ExampleSet synth_corpus(std::uint64_t seed, std::int64_t horizon) {
  SynthConfig sc;
  sc.n_users = 25;
  sc.n_edges = 50;
  sc.horizon_seconds = horizon;
  sc.seed = seed;
  const auto graph = generate_graph(sc);
  return generate_examples(graph, draw_ground_truth(graph, sc), sc);
}

FittedModel toy_decay_model(EdgeParams params, EdgeParams fallback,
                            double fallback_tau) {
  FittedModel model;
  model.kind = ModelKind::Decay;
  model.edges.push_back({FollowEdge{1, 2}, EdgeFit{params, 0, 0, 0.0, 0, true}});
  model.fallback = fallback;
  model.fallback_tau = fallback_tau;
  return model;
}

std::vector<PredictionRecord> records_from(
    const std::vector<std::pair<double, int>>& scored) {
  std::vector<PredictionRecord> out;
  for (const auto& [p, label] : scored) {
    out.push_back({FollowEdge{1, 2}, static_cast<std::uint8_t>(label), p, 1.0});
  }
  return out;
}

}  // namespace

TEST_CASE("next-one split takes the earliest share and the single next example") {
  EdgeExamples group{{1, 2}, {}};
  for (int i = 0; i < 10; ++i) {
    group.examples.push_back(make_ex(static_cast<MessageId>(i + 1), 10 * i, 0));
  }
  const auto set = make_set({std::move(group)});
  {
    const auto [train, test] = next_one_split(set, 0.9);
    REQUIRE(train.edges.size() == 1);
    REQUIRE(test.edges.size() == 1);
    CHECK(train.edges[0].examples.size() == 9);
    CHECK(test.edges[0].examples.size() == 1);
    CHECK(test.edges[0].examples[0].message == 10);
  }
  {
    const auto [train, test] = next_one_split(set, 0.5);
    CHECK(train.edges[0].examples.size() == 5);
    CHECK(test.edges[0].examples[0].message == 6);
  }
}

TEST_CASE("an edge with one example trains but is never tested") {
  auto set = make_set({{FollowEdge{1, 2}, {make_ex(1, 5, 0)}},
                       {FollowEdge{3, 4}, {make_ex(2, 5, 0), make_ex(3, 9, 1, 12)}}});
  const auto [train, test] = next_one_split(set, 0.5);
  CHECK(train.edges.size() == 2);
  REQUIRE(test.edges.size() == 1);
  CHECK(test.edges[0].edge == FollowEdge{3, 4});
}

TEST_CASE("split ratio must lie strictly inside the unit interval") {
  auto set = make_set({{FollowEdge{1, 2}, {make_ex(1, 5, 0)}}});
  for (double ratio : {0.0, 1.0, -0.1, 1.5}) {
    CHECK_THROWS_AS(next_one_split(set, ratio), ConfigError);
  }
  CHECK_THROWS_AS(next_one_split(ExampleSet{}, 0.5), EmptyResultError);
  auto hollow = make_set({{FollowEdge{1, 2}, {}}});
  CHECK_THROWS_AS(next_one_split(hollow, 0.5), EmptyResultError);
}

TEST_CASE("next-one split properties on generated corpora") {
  for (std::uint64_t seed : {4u, 8u, 15u}) {
    const auto set = synth_corpus(seed, 60 * kDay);
    for (double ratio : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const auto [train, test] = next_one_split(set, ratio);
      CHECK(train.latencies_computed == set.latencies_computed);

      std::map<FollowEdge, const EdgeExamples*> originals;
      for (const auto& group : set.edges) originals[group.edge] = &group;

      std::size_t train_total = 0;
      std::map<FollowEdge, std::size_t> train_n;
      for (const auto& group : train.edges) {
        const auto& full = *originals.at(group.edge);
        const std::size_t n = full.examples.size();
        // Smallest count >= ratio*n (with the same guard), at least one.
        std::size_t want = n;
        for (std::size_t k = 1; k <= n; ++k) {
          if (static_cast<double>(k) >=
              ratio * static_cast<double>(n) - 1e-9) {
            want = k;
            break;
          }
        }
        CHECK(group.examples.size() == want);
        for (std::size_t i = 0; i < group.examples.size(); ++i) {
          CHECK(group.examples[i].message == full.examples[i].message);
        }
        train_n[group.edge] = group.examples.size();
        train_total += group.examples.size();
      }
      std::size_t nonempty = 0;
      for (const auto& group : set.edges) {
        nonempty += !group.examples.empty();
      }
      CHECK(train.edges.size() == nonempty);

      for (const auto& group : test.edges) {
        REQUIRE(group.examples.size() == 1);
        const auto& full = *originals.at(group.edge);
        const std::size_t k = train_n.at(group.edge);
        CHECK(k < full.examples.size());
        CHECK(group.examples[0].message == full.examples[k].message);
        // Strictly later than everything this edge trained on.
        for (std::size_t i = 0; i < k; ++i) {
          CHECK(group.examples[0].exposure_time >=
                full.examples[i].exposure_time);
        }
      }
      CHECK(train_total + test.total_examples() <= set.total_examples());
    }
  }
}

TEST_CASE("phase split carves 210-day groups anchored at the first exposure") {
  const std::int64_t t0 = 1000;
  EdgeExamples group{{1, 2}, {}};
  const std::vector<std::int64_t> offsets = {
      0,
      204 * kDay + 86399,
      205 * kDay,
      210 * kDay - 1,
      210 * kDay,
      210 * kDay + 205 * kDay,
      420 * kDay + 3,
      630 * kDay + 204 * kDay,
      630 * kDay + 209 * kDay,
      840 * kDay,  // fifth group, beyond the cap
  };
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    group.examples.push_back(
        make_ex(static_cast<MessageId>(i + 1), t0 + offsets[i], 0));
  }
  const auto phases = chronological_phase_split(make_set({std::move(group)}));
  REQUIRE(phases.size() == 4);
  for (int g = 0; g < 4; ++g) {
    CHECK(phases[g].group_start == t0 + g * 210 * kDay);
    CHECK(phases[g].eval_start == phases[g].group_start + 205 * kDay);
    CHECK(phases[g].eval_end == phases[g].group_start + 210 * kDay);
  }
  auto messages = [](const ExampleSet& s) {
    std::vector<MessageId> out;
    for (const auto& g : s.edges) {
      for (const auto& ex : g.examples) out.push_back(ex.message);
    }
    return out;
  };
  CHECK(messages(phases[0].train) == std::vector<MessageId>{1, 2});
  CHECK(messages(phases[0].eval) == std::vector<MessageId>{3, 4});
  CHECK(messages(phases[1].train) == std::vector<MessageId>{5});
  CHECK(messages(phases[1].eval) == std::vector<MessageId>{6});
  CHECK(messages(phases[2].train) == std::vector<MessageId>{7});
  CHECK(messages(phases[2].eval).empty());
  CHECK(messages(phases[3].train) == std::vector<MessageId>{8});
  CHECK(messages(phases[3].eval) == std::vector<MessageId>{9});
}

TEST_CASE("a corpus spanning 31 weeks yields a single group") {
  auto set = make_set({{FollowEdge{1, 2},
                        {make_ex(1, 500, 0), make_ex(2, 500 + 216 * kDay, 0)}}});
  const auto phases = chronological_phase_split(set);
  REQUIRE(phases.size() == 1);
  CHECK(phases[0].train.total_examples() == 1);
  CHECK(phases[0].eval.total_examples() == 0);
}

TEST_CASE("a corpus shorter than one group cannot be phase-split") {
  auto set = make_set({{FollowEdge{1, 2},
                        {make_ex(1, 0, 0), make_ex(2, 100 * kDay, 0)}}});
  CHECK_THROWS_AS(chronological_phase_split(set), DataError);
  CHECK_THROWS_AS(chronological_phase_split(ExampleSet{}), EmptyResultError);
}

TEST_CASE("phase membership respects the window arithmetic") {
  const auto set = synth_corpus(23, 220 * kDay);
  const auto phases = chronological_phase_split(set);
  REQUIRE(phases.size() == 1);
  const auto& ph = phases[0];
  std::size_t in_window = 0;
  for (const auto& group : set.edges) {
    for (const auto& ex : group.examples) {
      if (ex.exposure_time >= ph.group_start && ex.exposure_time < ph.eval_end) {
        ++in_window;
      }
    }
  }
  CHECK(ph.train.total_examples() + ph.eval.total_examples() == in_window);
  for (const auto& group : ph.train.edges) {
    for (const auto& ex : group.examples) {
      CHECK(ex.exposure_time >= ph.group_start);
      CHECK(ex.exposure_time < ph.eval_start);
    }
  }
  for (const auto& group : ph.eval.edges) {
    for (const auto& ex : group.examples) {
      CHECK(ex.exposure_time >= ph.eval_start);
      CHECK(ex.exposure_time < ph.eval_end);
    }
  }
}

TEST_CASE("perplexity of perfect and uninformative predictions") {
  std::vector<PredictionRecord> perfect;
  for (int i = 0; i < 20; ++i) {
    perfect.push_back({FollowEdge{1, 2}, static_cast<std::uint8_t>(i % 2),
                       i % 2 ? 1.0 : 0.0, 1.0});
  }
  CHECK(perplexity(perfect) == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<PredictionRecord> half;
  for (int i = 0; i < 9; ++i) {
    half.push_back({FollowEdge{1, 2}, static_cast<std::uint8_t>(i % 2), 0.5, 1.0});
  }
  CHECK(perplexity(half) == doctest::Approx(2.0).epsilon(1e-9));

  CHECK_THROWS_AS(perplexity({}), EmptyResultError);
}

TEST_CASE("confidently wrong predictions are clamped, not infinite") {
  std::vector<PredictionRecord> wrong{{FollowEdge{1, 2}, 1, 0.0, 1.0}};
  const double p = perplexity(wrong);
  CHECK(std::isfinite(p));
  CHECK(p == doctest::Approx(1e12).epsilon(1e-9));
}

TEST_CASE("perplexity matches an extended-precision oracle and is at least one") {
  std::mt19937_64 rng(71);
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 4000; ++i) {
    records.push_back({FollowEdge{1, 2}, static_cast<std::uint8_t>(u01(rng) < 0.3),
                       u01(rng), 1.0});
  }
  long double sum = 0.0L;
  for (const auto& r : records) {
    const long double p =
        std::clamp(static_cast<long double>(r.probability), 1e-12L, 1.0L - 1e-12L);
    sum += r.label == 1 ? std::log(p) : std::log(1.0L - p);
  }
  const double want = static_cast<double>(
      std::exp(-sum / static_cast<long double>(records.size())));
  const double got = perplexity(records);
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  CHECK(got >= 1.0);
}

TEST_CASE("roc on a small hand-worked case") {
  const auto records =
      records_from({{0.9, 1}, {0.8, 0}, {0.8, 1}, {0.3, 0}});
  const auto result = roc_auc(records);
  CHECK(result.auc == doctest::Approx(0.875).epsilon(1e-15));
  REQUIRE(result.curve.size() == 4);
  CHECK(result.curve[0] == std::pair{0.0, 0.0});
  CHECK(result.curve[1] == std::pair{0.0, 0.5});
  CHECK(result.curve[2] == std::pair{0.5, 1.0});
  CHECK(result.curve[3] == std::pair{1.0, 1.0});
}

TEST_CASE("roc extremes") {
  CHECK(roc_auc(records_from({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}})).auc == 1.0);
  CHECK(roc_auc(records_from({{0.9, 0}, {0.8, 0}, {0.2, 1}, {0.1, 1}})).auc == 0.0);
  const auto tied = roc_auc(records_from({{0.4, 1}, {0.4, 0}, {0.4, 1}, {0.4, 0}}));
  CHECK(tied.auc == 0.5);
  REQUIRE(tied.curve.size() == 2);
  CHECK(tied.curve[1] == std::pair{1.0, 1.0});
  CHECK_THROWS_AS(roc_auc(records_from({{0.5, 1}, {0.4, 1}})), DataError);
  CHECK_THROWS_AS(roc_auc(records_from({{0.5, 0}})), DataError);
}

TEST_CASE("roc curve walks monotonically from the origin to (1,1)") {
  std::mt19937_64 rng(83);
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 3000; ++i) {
    // Two-decimal scores force heavy ties.
    const double score = std::floor(u01(rng) * 100.0) / 100.0;
    const int label = u01(rng) < 0.3 + 0.4 * score;
    records.push_back(
        {FollowEdge{1, 2}, static_cast<std::uint8_t>(label), score, 1.0});
  }
  const auto result = roc_auc(records);
  CHECK(result.curve.front() == std::pair{0.0, 0.0});
  CHECK(result.curve.back() == std::pair{1.0, 1.0});
  for (std::size_t i = 1; i < result.curve.size(); ++i) {
    CHECK(result.curve[i].first >= result.curve[i - 1].first);
    CHECK(result.curve[i].second >= result.curve[i - 1].second);
  }

  // Pairwise Mann-Whitney statistic, the slow way.
  double credit = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& a : records) {
    if (a.label != 1) continue;
    ++n_pos;
    for (const auto& b : records) {
      if (b.label == 1) continue;
      if (a.probability > b.probability) {
        credit += 1.0;
      } else if (a.probability == b.probability) {
        credit += 0.5;
      }
    }
  }
  n_neg = records.size() - n_pos;
  CHECK(result.auc ==
        doctest::Approx(credit / (static_cast<double>(n_pos) *
                                  static_cast<double>(n_neg)))
            .epsilon(1e-12));
}

TEST_CASE("auc is invariant under monotone score transforms") {
  std::mt19937_64 rng(97);
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 800; ++i) {
    const double score = std::floor(u01(rng) * 50.0) / 50.0;
    records.push_back({FollowEdge{1, 2},
                       static_cast<std::uint8_t>(u01(rng) < 0.2 + 0.5 * score),
                       score, 1.0});
  }
  const double base = roc_auc(records).auc;
  auto squared = records;
  for (auto& r : squared) r.probability *= r.probability;
  CHECK(roc_auc(squared).auc == base);
}

TEST_CASE("labels shuffled independently of scores give chance auc") {
  std::mt19937_64 rng(101);
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 5000; ++i) {
    records.push_back({FollowEdge{1, 2}, static_cast<std::uint8_t>(u01(rng) < 0.5),
                       u01(rng), 1.0});
  }
  CHECK(roc_auc(records).auc == doctest::Approx(0.5).epsilon(0.03 / 0.5));
}

TEST_CASE("prediction records carry the latency actually used") {
  const auto set = synth_corpus(39, 60 * kDay);
  Diagnostics diag;
  const auto model = fit_decay_map(set, Priors{}, OptimizerConfig{}, diag);
  const auto records = predict_records(model, set);
  CHECK(records.size() == set.total_examples());
  std::size_t i = 0;
  for (const auto& group : set.edges) {
    for (const auto& ex : group.examples) {
      const auto& r = records[i++];
      CHECK(r.edge == group.edge);
      CHECK(r.label == ex.label);
      CHECK(r.tau_used == ex.latency.value_or(model.fallback_tau));
      CHECK(r.probability == predict(model, group.edge, ex.latency));
      CHECK(r.probability >= 0.0);
      CHECK(r.probability <= 1.0);
    }
  }
}

TEST_CASE("sequential prediction: one exposure is a plain prediction") {
  const auto model = toy_decay_model({0.6, 0.8}, {0.3, 0.5}, 4.0);
  const FollowEdge edge{1, 2};
  {
    const std::int64_t t[] = {7200};
    const auto probs = sequential_predict(model, edge, t, 0, 3600.0);
    REQUIRE(probs.size() == 1);
    CHECK(probs[0] == predict(model, edge, 2.0));
  }
  {
    const std::int64_t t[] = {7200};
    const auto probs = sequential_predict(model, edge, t, std::nullopt, 3600.0);
    CHECK(probs[0] == predict(model, edge, std::nullopt));
  }
  {
    // Unseen edge runs on the fallback parameters.
    const std::int64_t t[] = {7200};
    const auto probs = sequential_predict(model, {9, 9}, t, 0, 3600.0);
    CHECK(probs[0] == decay_probability(model.fallback, 2.0));
  }
}

TEST_CASE("sequential prediction: two exposures by hand") {
  // q = 0.5, alpha = 1: probability is 0.5 / tau.
  const auto model = toy_decay_model({0.5, 1.0}, {0.5, 1.0}, 1.0);
  const std::int64_t t[] = {2, 6};
  const auto probs = sequential_predict(model, {1, 2}, t, 0, 1.0);
  REQUIRE(probs.size() == 2);
  CHECK(probs[0] == doctest::Approx(0.25).epsilon(1e-15));
  // Expected latency mixes "still from time 0" with "reset at time 2".
  const double expected_tau = 0.75 * 6.0 + 0.25 * 4.0;
  CHECK(probs[1] == doctest::Approx(0.5 / expected_tau).epsilon(1e-15));
}

TEST_CASE("sequential prediction matches outcome enumeration") {
  const auto model = toy_decay_model({0.55, 0.9}, {0.55, 0.9}, 3.0);
  const FollowEdge edge{1, 2};
  const double unit = 3600.0;
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 2 + static_cast<int>(5 * u01(rng));
    std::vector<std::int64_t> times;
    std::int64_t t = static_cast<std::int64_t>(3600 * 10 * u01(rng));
    for (int i = 0; i < m; ++i) {
      // Gaps sometimes below one unit, exercising the latency floor.
      t += 600 + static_cast<std::int64_t>(4 * 3600 * u01(rng));
      times.push_back(t);
    }
    const bool anchored = u01(rng) < 0.7;
    const std::optional<std::int64_t> last =
        anchored ? std::optional<std::int64_t>(-7200) : std::nullopt;
    const auto probs = sequential_predict(model, edge, times, last, unit);
    REQUIRE(static_cast<int>(probs.size()) == m);

    auto tau_since = [&](std::int64_t now, std::int64_t since) {
      return std::max(1.0, static_cast<double>(now - since) / unit);
    };
    std::vector<double> oracle;
    for (int i = 0; i < m; ++i) {
      double expected_tau = 0.0;
      for (std::uint32_t mask = 0; mask < (1u << i); ++mask) {
        double w = 1.0;
        int newest = -1;
        for (int s = 0; s < i; ++s) {
          if (mask & (1u << s)) {
            w *= oracle[s];
            newest = s;
          } else {
            w *= 1.0 - oracle[s];
          }
        }
        double tau;
        if (newest >= 0) {
          tau = tau_since(times[i], times[newest]);
        } else if (last) {
          tau = tau_since(times[i], *last);
        } else {
          tau = model.fallback_tau;
        }
        expected_tau += w * tau;
      }
      oracle.push_back(decay_probability({0.55, 0.9}, expected_tau));
      CHECK(probs[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("sequential prediction rejects bad input") {
  const auto decay = toy_decay_model({0.5, 1.0}, {0.5, 1.0}, 1.0);
  const std::int64_t unsorted[] = {10, 5};
  CHECK_THROWS_AS(sequential_predict(decay, {1, 2}, unsorted, 0, 1.0), DataError);
  const std::int64_t sorted[] = {5, 10};
  CHECK_THROWS_AS(sequential_predict(decay, {1, 2}, sorted, 0, 0.0), ConfigError);
  FittedModel statics;
  statics.kind = ModelKind::MLE;
  CHECK_THROWS_AS(sequential_predict(statics, {1, 2}, sorted, 0, 1.0),
                  ConfigError);
}
