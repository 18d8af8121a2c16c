#include "cascadecay/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cascadecay {

namespace {

constexpr std::int64_t kDaySeconds = 86400;
constexpr std::int64_t kGroupSeconds = 210 * kDaySeconds;  // 30 weeks
constexpr std::int64_t kTrainSeconds = 205 * kDaySeconds;
constexpr int kMaxGroups = 4;

void push_edge(ExampleSet& set, const FollowEdge& edge,
               std::vector<Example> examples) {
  if (examples.empty()) return;
  set.edges.push_back({edge, std::move(examples)});
}

}  // namespace

std::pair<ExampleSet, ExampleSet> next_one_split(const ExampleSet& set,
                                                 double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("next_one_split: ratio must lie in (0,1)");
  }
  if (set.total_examples() == 0) {
    throw EmptyResultError("next_one_split: empty example set");
  }
  ExampleSet train, test;
  train.config = test.config = set.config;
  train.latencies_computed = test.latencies_computed = set.latencies_computed;
  for (const auto& group : set.edges) {
    std::size_t n = group.examples.size();
    if (n == 0) continue;
    // ceil(ratio*n), guarded against the product landing a hair above an
    // integer.
    auto train_n = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(n) - 1e-9));
    train_n = std::min(std::max<std::size_t>(train_n, 1), n);
    push_edge(train, group.edge,
              {group.examples.begin(), group.examples.begin() + train_n});
    if (train_n < n) {
      push_edge(test, group.edge, {group.examples[train_n]});
    }
  }
  return {std::move(train), std::move(test)};
}

std::vector<PhaseSplit> chronological_phase_split(const ExampleSet& set) {
  std::int64_t t0 = std::numeric_limits<std::int64_t>::max();
  std::int64_t t_last = std::numeric_limits<std::int64_t>::min();
  for (const auto& group : set.edges) {
    for (const auto& ex : group.examples) {
      t0 = std::min(t0, ex.exposure_time);
      t_last = std::max(t_last, ex.exposure_time);
    }
  }
  if (t0 > t_last) {
    throw EmptyResultError("chronological_phase_split: empty example set");
  }
  auto n_groups = static_cast<int>(
      std::min<std::int64_t>(kMaxGroups, (t_last - t0 + 1) / kGroupSeconds));
  if (n_groups == 0) {
    throw DataError("chronological_phase_split: corpus spans less than one "
                    "210-day group");
  }
  std::vector<PhaseSplit> out(static_cast<std::size_t>(n_groups));
  for (int g = 0; g < n_groups; ++g) {
    auto& split = out[static_cast<std::size_t>(g)];
    split.group_start = t0 + g * kGroupSeconds;
    split.eval_start = split.group_start + kTrainSeconds;
    split.eval_end = split.group_start + kGroupSeconds;
    split.train.config = split.eval.config = set.config;
    split.train.latencies_computed = split.eval.latencies_computed =
        set.latencies_computed;
  }
  for (const auto& group : set.edges) {
    std::vector<std::vector<Example>> train_parts(out.size()),
        eval_parts(out.size());
    for (const auto& ex : group.examples) {
      std::int64_t off = ex.exposure_time - t0;
      auto g = static_cast<std::size_t>(off / kGroupSeconds);
      if (g >= out.size()) continue;  // trailing partial group
      if (off % kGroupSeconds < kTrainSeconds) {
        train_parts[g].push_back(ex);
      } else {
        eval_parts[g].push_back(ex);
      }
    }
    for (std::size_t g = 0; g < out.size(); ++g) {
      push_edge(out[g].train, group.edge, std::move(train_parts[g]));
      push_edge(out[g].eval, group.edge, std::move(eval_parts[g]));
    }
  }
  return out;
}

double perplexity(std::span<const PredictionRecord> records) {
  if (records.empty()) throw EmptyResultError("perplexity: no records");
  constexpr double kEps = 1e-12;
  double sum = 0.0;
  for (const auto& r : records) {
    double p = std::clamp(r.probability, kEps, 1.0 - kEps);
    sum += r.label == 1 ? std::log(p) : std::log1p(-p);
  }
  return std::exp(-sum / static_cast<double>(records.size()));
}

RocResult roc_auc(std::span<const PredictionRecord> records) {
  std::size_t n_pos = 0, n_neg = 0;
  std::vector<std::pair<double, std::uint8_t>> scored;
  scored.reserve(records.size());
  for (const auto& r : records) {
    scored.push_back({r.probability, r.label});
    if (r.label == 1) {
      ++n_pos;
    } else {
      ++n_neg;
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("roc_auc: need at least one positive and one negative");
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocResult result;
  result.curve.push_back({0.0, 0.0});
  double pair_credit = 0.0;  // positives ranked above negatives, ties half
  std::size_t pos_above = 0, pos_cum = 0, neg_cum = 0;
  for (std::size_t i = 0; i < scored.size();) {
    std::size_t j = i;
    std::size_t pos_here = 0, neg_here = 0;
    while (j < scored.size() && scored[j].first == scored[i].first) {
      if (scored[j].second == 1) {
        ++pos_here;
      } else {
        ++neg_here;
      }
      ++j;
    }
    pair_credit += static_cast<double>(neg_here) *
                   (static_cast<double>(pos_above) +
                    0.5 * static_cast<double>(pos_here));
    pos_above += pos_here;
    pos_cum += pos_here;
    neg_cum += neg_here;
    result.curve.push_back(
        {static_cast<double>(neg_cum) / static_cast<double>(n_neg),
         static_cast<double>(pos_cum) / static_cast<double>(n_pos)});
    i = j;
  }
  result.auc = pair_credit /
               (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return result;
}

std::vector<PredictionRecord> predict_records(const FittedModel& model,
                                              const ExampleSet& test) {
  std::vector<PredictionRecord> out;
  out.reserve(test.total_examples());
  for (const auto& group : test.edges) {
    for (const auto& ex : group.examples) {
      PredictionRecord r;
      r.edge = group.edge;
      r.label = ex.label;
      r.tau_used = ex.latency.value_or(model.fallback_tau);
      r.probability = predict(model, group.edge, ex.latency);
      out.push_back(r);
    }
  }
  return out;
}

std::vector<double> sequential_predict(const FittedModel& model,
                                       const FollowEdge& edge,
                                       std::span<const std::int64_t> exposure_times,
                                       std::optional<std::int64_t> last_activation,
                                       double seconds_per_unit) {
  if (model.kind != ModelKind::Decay) {
    throw ConfigError("sequential_predict: needs a Decay model");
  }
  if (!(seconds_per_unit > 0)) {
    throw ConfigError("sequential_predict: seconds_per_unit must be positive");
  }
  if (!std::is_sorted(exposure_times.begin(), exposure_times.end())) {
    throw DataError("sequential_predict: exposures must be chronological");
  }
  const EdgeFit* fit = model.find(edge);
  const EdgeParams& params = fit ? fit->params : model.fallback;

  auto tau_since = [&](std::int64_t t, std::int64_t since) {
    return std::max(1.0,
                    static_cast<double>(t - since) / seconds_per_unit);
  };

  std::vector<double> probs;
  probs.reserve(exposure_times.size());
  // weight[s] = P(exposure s was the most recent success so far);
  // none_weight = P(no success among predicted exposures yet).
  std::vector<double> weight;
  double none_weight = 1.0;
  for (std::size_t m = 0; m < exposure_times.size(); ++m) {
    std::int64_t t = exposure_times[m];
    double base_tau =
        last_activation ? tau_since(t, *last_activation) : model.fallback_tau;
    double expected_tau = none_weight * base_tau;
    for (std::size_t s = 0; s < m; ++s) {
      expected_tau += weight[s] * tau_since(t, exposure_times[s]);
    }
    double p = decay_probability(params, expected_tau);
    probs.push_back(p);
    for (double& w : weight) w *= 1.0 - p;
    none_weight *= 1.0 - p;
    weight.push_back(p);
  }
  return probs;
}

}  // namespace cascadecay
