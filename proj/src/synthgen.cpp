#include "cascadecay/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <unordered_set>

#include "cascadecay/parallel.hpp"
#include "cascadecay/textio.hpp"

namespace cascadecay {

namespace {

constexpr std::uint64_t kGraphStream = 1;
constexpr std::uint64_t kTruthStream = 2;
constexpr std::uint64_t kEdgeStreamBase = 16;

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform in [0, bound) without modulo bias.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  std::uint64_t x, r;
  do {
    x = rng();
    r = x % bound;
  } while (x - r > std::numeric_limits<std::uint64_t>::max() - (bound - 1));
  return r;
}

void validate_ranges(const SynthConfig& c) {
  if (!(c.q_min >= 0.0 && c.q_min <= c.q_max && c.q_max <= 1.0)) {
    throw ConfigError("synth: q range must satisfy 0 <= q_min <= q_max <= 1");
  }
  if (!(c.alpha_min >= 0.0 && c.alpha_min <= c.alpha_max)) {
    throw ConfigError("synth: alpha range must satisfy 0 <= alpha_min <= alpha_max");
  }
}

void validate_process(const SynthConfig& c) {
  if (c.horizon_seconds <= 0) throw ConfigError("synth: horizon must be positive");
  if (!(c.seconds_per_unit > 0)) {
    throw ConfigError("synth: seconds_per_unit must be positive");
  }
  if (c.process == ExposureProcess::poisson) {
    if (!(c.mean_gap_seconds > 0)) {
      throw ConfigError("synth: mean_gap_seconds must be positive");
    }
  } else {
    if (!(c.gap_exponent > 1.0)) {
      throw ConfigError("synth: gap_exponent must exceed 1");
    }
    if (!(c.min_gap_seconds > 0)) {
      throw ConfigError("synth: min_gap_seconds must be positive");
    }
  }
}

double draw_gap_seconds(std::mt19937_64& rng, const SynthConfig& c) {
  double u = u01(rng);
  if (c.process == ExposureProcess::poisson) {
    return -c.mean_gap_seconds * std::log1p(-u);
  }
  return c.min_gap_seconds * std::pow(1.0 - u, -1.0 / (c.gap_exponent - 1.0));
}

}  // namespace

const EdgeParams* GroundTruth::find(const FollowEdge& e) const {
  auto it = std::lower_bound(
      params.begin(), params.end(), e,
      [](const auto& entry, const FollowEdge& key) { return entry.first < key; });
  if (it == params.end() || !(it->first == e)) return nullptr;
  return &it->second;
}

FollowGraph generate_graph(const SynthConfig& config) {
  if (config.n_users < 1) throw ConfigError("synth: n_users must be >= 1");
  if (config.n_users > (1ull << 31)) throw ConfigError("synth: n_users too large");
  const std::uint64_t n = config.n_users;
  const std::uint64_t total = n * (n - 1);
  if (config.n_edges > total) {
    throw ConfigError("synth: n_edges exceeds n_users*(n_users-1)");
  }
  // Floyd's algorithm: a uniform n_edges-subset of the pair indices.
  std::mt19937_64 rng(derive_stream_seed(config.seed, kGraphStream));
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(config.n_edges * 2);
  for (std::uint64_t i = total - config.n_edges; i < total; ++i) {
    std::uint64_t r = bounded(rng, i + 1);
    if (!chosen.insert(r).second) chosen.insert(i);
  }
  std::vector<FollowEdge> edges;
  edges.reserve(chosen.size());
  for (std::uint64_t p : chosen) {
    std::uint64_t followee = p / (n - 1);
    std::uint64_t rem = p % (n - 1);
    std::uint64_t follower = rem < followee ? rem : rem + 1;
    edges.push_back({followee + 1, follower + 1});
  }
  return FollowGraph::from_edges(std::move(edges));
}

GroundTruth draw_ground_truth(const FollowGraph& graph, const SynthConfig& config) {
  validate_ranges(config);
  std::mt19937_64 rng(derive_stream_seed(config.seed, kTruthStream));
  GroundTruth truth;
  auto edges = graph.edges();
  truth.params.reserve(edges.size());
  for (const FollowEdge& e : edges) {
    EdgeParams p;
    p.q = config.q_min == config.q_max
              ? config.q_min
              : config.q_min + (config.q_max - config.q_min) * u01(rng);
    p.alpha = config.alpha_min == config.alpha_max
                  ? config.alpha_min
                  : config.alpha_min +
                        (config.alpha_max - config.alpha_min) * u01(rng);
    truth.params.push_back({e, p});
  }
  return truth;
}

ExampleSet generate_examples(const FollowGraph& graph, const GroundTruth& truth,
                             const SynthConfig& config) {
  validate_ranges(config);
  validate_process(config);
  auto edges = graph.edges();
  for (const FollowEdge& e : edges) {
    if (truth.find(e) == nullptr) {
      throw ConfigError("synth: ground truth missing edge " +
                        std::to_string(e.followee) + ":" +
                        std::to_string(e.follower));
    }
  }

  ExampleSet set;
  set.config.seconds_per_unit = config.seconds_per_unit;
  set.edges.resize(edges.size());
  const std::int64_t horizon = config.horizon_seconds;
  parallel_for(edges.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const FollowEdge edge = edges[i];
      const EdgeParams params = *truth.find(edge);
      std::mt19937_64 rng(derive_stream_seed(config.seed, kEdgeStreamBase + i));
      EdgeExamples group;
      group.edge = edge;
      std::int64_t t = 0;
      std::optional<std::int64_t> last_act;
      while (true) {
        double gap_d = draw_gap_seconds(rng, config);
        // Clamp before rounding: heavy-tailed draws can exceed int64 range.
        if (gap_d > static_cast<double>(horizon) + 1.0) {
          gap_d = static_cast<double>(horizon) + 1.0;
        }
        std::int64_t gap = std::max<std::int64_t>(1, std::llround(gap_d));
        if (t > horizon - gap) break;
        t += gap;
        double tau = 1.0;
        if (last_act) {
          tau = std::max(1.0, static_cast<double>(t - *last_act) /
                                  config.seconds_per_unit);
        }
        double p = params.q * std::pow(tau, -params.alpha);
        Example ex;
        ex.exposure_time = t;
        if (u01(rng) < p) {
          ex.label = 1;
          ex.activation_time = t + 1;
          last_act = t + 1;
        }
        group.examples.push_back(ex);
      }
      set.edges[i] = std::move(group);
    }
  });

  // Message ids in a sequential pass so they do not depend on worker count.
  // Posts take even ids; the matching retweet event in the emitted log takes
  // id + 1.
  MessageId next_post = 2;
  for (auto& group : set.edges) {
    for (auto& ex : group.examples) {
      ex.message = next_post;
      next_post += 2;
    }
  }
  return compute_latencies(std::move(set), config.seconds_per_unit);
}

void write_follows_tsv(const FollowGraph& graph, std::ostream& out) {
  for (const FollowEdge& e : graph.edges()) {
    out << e.followee << '\t' << e.follower << '\n';
  }
}

void write_events_tsv(const ExampleSet& set, std::ostream& out) {
  for (const auto& group : set.edges) {
    for (const auto& ex : group.examples) {
      out << group.edge.followee << '\t' << ex.message << '\t'
          << ex.exposure_time << "\tpost\n";
      if (ex.label == 1 && ex.activation_time) {
        out << group.edge.follower << '\t' << ex.message + 1 << '\t'
            << *ex.activation_time << "\tretweet\t" << ex.message << '\n';
      }
    }
  }
}

void write_ground_truth_csv(const GroundTruth& truth, std::ostream& out) {
  out << "edge_id,q,alpha\n";
  for (const auto& [edge, p] : truth.params) {
    out << edge.followee << ':' << edge.follower << ',' << format_full(p.q)
        << ',' << format_full(p.alpha) << '\n';
  }
}

}  // namespace cascadecay
