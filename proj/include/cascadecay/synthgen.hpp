#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "cascadecay/corpus.hpp"
#include "cascadecay/decay.hpp"

namespace cascadecay {

enum class ExposureProcess : std::uint8_t { poisson, heavy_tailed };

struct SynthConfig {
  std::uint64_t n_users = 100;
  std::uint64_t n_edges = 300;
  double q_min = 0.2;
  double q_max = 0.8;
  double alpha_min = 0.3;
  double alpha_max = 1.2;
  ExposureProcess process = ExposureProcess::heavy_tailed;
  double mean_gap_seconds = 6 * 3600.0;  // poisson only
  double gap_exponent = 1.5;             // heavy_tailed inter-event exponent, > 1
  double min_gap_seconds = 60.0;         // heavy_tailed scale (smallest gap)
  std::int64_t horizon_seconds = 0;      // > 0
  double seconds_per_unit = 3600.0;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<std::pair<FollowEdge, EdgeParams>> params;  // sorted by edge
  const EdgeParams* find(const FollowEdge& e) const;
};

// Uniform simple directed graph on users 1..n_users with exactly n_edges
// edges, no self-loops. Deterministic under config.seed.
FollowGraph generate_graph(const SynthConfig& config);

// Per-edge q ~ U[q_min, q_max], alpha ~ U[alpha_min, alpha_max].
GroundTruth draw_ground_truth(const FollowGraph& graph, const SynthConfig& config);

// Runs the decay process forward on every edge independently: exposures
// arrive per the configured gap process until the horizon; each label is
// drawn with probability q * tau^(-alpha) where tau is the latency since the
// edge's last positive (tau = 1 before the first one). A positive's retweet
// lands one second after its exposure, so emitted logs round-trip through
// extraction with identical labels and latencies. Message ids are assigned
// in a sequential pass; per-edge RNG streams make the output independent of
// worker count.
ExampleSet generate_examples(const FollowGraph& graph, const GroundTruth& truth,
                             const SynthConfig& config);

// `followee<TAB>follower` records, sorted.
void write_follows_tsv(const FollowGraph& graph, std::ostream& out);

// Post/retweet event records reconstructed from a generated example set:
// the followee posts each example's message at its exposure time, and the
// follower retweets one second later when the label is positive.
void write_events_tsv(const ExampleSet& set, std::ostream& out);

// `edge_id,q,alpha` with edge_id formatted as followee:follower.
void write_ground_truth_csv(const GroundTruth& truth, std::ostream& out);

}  // namespace cascadecay
