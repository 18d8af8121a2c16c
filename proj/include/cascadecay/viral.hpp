#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <tuple>
#include <vector>

#include "cascadecay/corpus.hpp"
#include "cascadecay/diagnostics.hpp"
#include "cascadecay/estimators.hpp"

namespace cascadecay {

struct WeightedEdge {
  UserId from = 0;
  UserId to = 0;
  double probability = 0.0;
};

class WeightedDiGraph {
 public:
  // Rejects probabilities outside [0,1], self-loops, and parallel edges.
  static WeightedDiGraph from_edges(std::vector<WeightedEdge> edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return targets_.size(); }
  const std::vector<UserId>& nodes() const { return nodes_; }
  // Index into nodes(), or npos when absent.
  std::size_t index_of(UserId node) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // Out-edges of node index i as parallel spans, ordered by target.
  std::span<const std::uint32_t> out_targets(std::size_t i) const;
  std::span<const double> out_probabilities(std::size_t i) const;
  // Edge slot numbers are the CSR positions; the sampler keys liveness bits
  // off them.
  std::pair<std::size_t, std::size_t> out_slot_range(std::size_t i) const;
  // All edge probabilities in slot order.
  std::span<const double> probabilities() const { return probs_; }

 private:
  std::vector<UserId> nodes_;           // sorted, unique
  std::vector<std::size_t> offsets_;    // node_count()+1
  std::vector<std::uint32_t> targets_;  // node indices
  std::vector<double> probs_;
};

struct SeedPick {
  UserId node = 0;
  double marginal_gain = 0.0;
};

struct SeedSet {
  std::vector<SeedPick> picks;  // in selection order
  std::vector<UserId> nodes() const;
};

// Mean reachable-node count over r live-edge samples. Edge liveness is drawn
// in a fixed edge order from per-replica RNG streams, so the result is
// deterministic, thread-count invariant, and monotone under seed inclusion
// for a fixed RNG seed.
double expected_spread_mc(const WeightedDiGraph& graph,
                          std::span<const UserId> seeds, std::size_t r,
                          std::uint64_t rng_seed);

// Same estimator with the r live-edge samples drawn once up front, for reuse
// across every candidate evaluation of a CELF++ run (common random numbers).
class McSpreadSampler {
 public:
  McSpreadSampler(const WeightedDiGraph& graph, std::size_t r,
                  std::uint64_t rng_seed);
  double spread(std::span<const UserId> seeds) const;

 private:
  const WeightedDiGraph& graph_;
  std::size_t r_;
  std::size_t blocks_per_replica_;
  std::vector<std::uint64_t> live_;  // r_ x blocks_per_replica_ bit rows
};

// Exact expected spread by enumerating all 2^|E| live-edge configurations.
// Refuses graphs with more than 20 edges.
double exact_spread_enum(const WeightedDiGraph& graph,
                         std::span<const UserId> seeds);

using SpreadFn = std::function<double(std::span<const UserId>)>;

// Lazy greedy with CELF++ bookkeeping (mg1, mg2, prev_best, evaluation flag).
// With a deterministic spread estimator the result is identical to plain
// greedy with lowest-id tie-breaking.
SeedSet celfpp_select(const WeightedDiGraph& graph, std::size_t k,
                      const SpreadFn& spread, Diagnostics& diag);

struct PropagationNetwork {
  std::vector<FollowEdge> edges;  // sorted; followee -> follower
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
};

// Edge included iff it carries >= 1 positive example with exposure_time in
// [start, end).
PropagationNetwork build_propagation_network(const ExampleSet& set,
                                             std::int64_t window_start,
                                             std::int64_t window_end);

// Nodes forward-reachable from the seeds on the network, seeds included;
// seeds absent from the network count zero.
std::size_t pseudo_actual_spread(const PropagationNetwork& net,
                                 std::span<const UserId> seeds);

// IC input graph over the training set's edges. Decay models anchor the
// latency at anchor_time (time since the edge's last activation at or before
// it, fallback when none); static models use their per-edge estimate.
WeightedDiGraph build_im_graph(const FittedModel& model,
                               const ExampleSet& train,
                               std::int64_t anchor_time);

}  // namespace cascadecay
