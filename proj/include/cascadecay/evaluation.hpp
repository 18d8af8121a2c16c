#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cascadecay/corpus.hpp"
#include "cascadecay/estimators.hpp"

namespace cascadecay {

struct PredictionRecord {
  FollowEdge edge;
  std::uint8_t label = 0;
  double probability = 0.0;
  double tau_used = 1.0;
};

// Per edge with at least ceil(ratio*n)+1 examples: the earliest ceil(ratio*n)
// go to train, the single next one to test. Every edge contributes its
// leading examples to train regardless.
std::pair<ExampleSet, ExampleSet> next_one_split(const ExampleSet& set,
                                                 double ratio);

struct PhaseSplit {
  ExampleSet train;  // first 205 days of the group
  ExampleSet eval;   // last 5 days
  std::int64_t group_start = 0;
  std::int64_t eval_start = 0;
  std::int64_t eval_end = 0;
};

// Consecutive 30-week groups anchored at the earliest exposure, at most 4;
// within each, the first 205 days train and the final 5 days evaluate.
std::vector<PhaseSplit> chronological_phase_split(const ExampleSet& set);

// exp of the average negative log-likelihood; probabilities clamped to
// [1e-12, 1-1e-12] before the logs.
double perplexity(std::span<const PredictionRecord> records);

struct RocResult {
  std::vector<std::pair<double, double>> curve;  // (fpr, tpr), (0,0) to (1,1)
  double auc = 0.0;
};

// Threshold sweep over distinct scores with ties grouped; AUC equals the
// Mann-Whitney statistic with half credit for ties.
RocResult roc_auc(std::span<const PredictionRecord> records);

// One record per test example; tau_used falls back to the model's imputed
// latency when the example's latency is undefined.
std::vector<PredictionRecord> predict_records(const FittedModel& model,
                                              const ExampleSet& test);

// Probability per future exposure with the latency marginalized over the
// Bernoulli outcomes of the preceding predictions: each earlier success
// resets the activation clock at its exposure time.
std::vector<double> sequential_predict(const FittedModel& model,
                                       const FollowEdge& edge,
                                       std::span<const std::int64_t> exposure_times,
                                       std::optional<std::int64_t> last_activation,
                                       double seconds_per_unit);

}  // namespace cascadecay
