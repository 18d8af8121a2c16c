#include "cascadecay/viral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <queue>
#include <vector>

#include "cascadecay/common.hpp"
#include "cascadecay/parallel.hpp"

namespace cascadecay {

namespace {

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Fills one replica's liveness bits, one draw per CSR slot. Drawing every
// slot unconditionally keeps replicas identical across different seed sets.
void fill_live_row(const WeightedDiGraph& graph, std::mt19937_64& rng,
                   std::uint64_t* row, std::size_t blocks) {
  std::fill(row, row + blocks, 0);
  const auto probs = graph.probabilities();
  for (std::size_t slot = 0; slot < probs.size(); ++slot) {
    if (u01(rng) < probs[slot]) row[slot >> 6] |= 1ull << (slot & 63);
  }
}

std::size_t live_reach(const WeightedDiGraph& graph,
                       std::span<const std::uint32_t> seed_idx,
                       const std::uint64_t* live,
                       std::vector<std::uint32_t>& stack,
                       std::vector<std::uint8_t>& visited) {
  std::fill(visited.begin(), visited.end(), 0);
  stack.clear();
  std::size_t count = 0;
  for (auto s : seed_idx) {
    if (!visited[s]) {
      visited[s] = 1;
      ++count;
      stack.push_back(s);
    }
  }
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    const auto [lo, hi] = graph.out_slot_range(u);
    const auto targets = graph.out_targets(u);
    for (std::size_t slot = lo; slot < hi; ++slot) {
      if (!(live[slot >> 6] & (1ull << (slot & 63)))) continue;
      const auto v = targets[slot - lo];
      if (!visited[v]) {
        visited[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count;
}

std::vector<std::uint32_t> seed_indices(const WeightedDiGraph& graph,
                                        std::span<const UserId> seeds) {
  std::vector<std::uint32_t> idx;
  idx.reserve(seeds.size());
  for (auto s : seeds) {
    const auto i = graph.index_of(s);
    if (i == WeightedDiGraph::npos) {
      throw ConfigError("seed " + std::to_string(s) +
                        " is not a node of the graph");
    }
    idx.push_back(static_cast<std::uint32_t>(i));
  }
  return idx;
}

std::size_t bit_blocks(std::size_t edges) { return (edges + 63) / 64; }

}  // namespace

WeightedDiGraph WeightedDiGraph::from_edges(std::vector<WeightedEdge> edges) {
  for (const auto& e : edges) {
    if (!(e.probability >= 0.0 && e.probability <= 1.0)) {
      throw DataError("edge probability outside [0,1] on " +
                      std::to_string(e.from) + "->" + std::to_string(e.to));
    }
    if (e.from == e.to) {
      throw DataError("self-loop on node " + std::to_string(e.from));
    }
  }
  std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    return std::tie(a.from, a.to) < std::tie(b.from, b.to);
  });
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i].from == edges[i - 1].from && edges[i].to == edges[i - 1].to) {
      throw DataError("parallel edge " + std::to_string(edges[i].from) +
                      "->" + std::to_string(edges[i].to));
    }
  }

  WeightedDiGraph g;
  g.nodes_.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    g.nodes_.push_back(e.from);
    g.nodes_.push_back(e.to);
  }
  std::sort(g.nodes_.begin(), g.nodes_.end());
  g.nodes_.erase(std::unique(g.nodes_.begin(), g.nodes_.end()),
                 g.nodes_.end());

  g.offsets_.assign(g.nodes_.size() + 1, 0);
  g.targets_.reserve(edges.size());
  g.probs_.reserve(edges.size());
  std::size_t pos = 0;
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    g.offsets_[i] = pos;
    while (pos < edges.size() && edges[pos].from == g.nodes_[i]) {
      g.targets_.push_back(
          static_cast<std::uint32_t>(g.index_of(edges[pos].to)));
      g.probs_.push_back(edges[pos].probability);
      ++pos;
    }
  }
  g.offsets_[g.nodes_.size()] = g.targets_.size();
  return g;
}

std::size_t WeightedDiGraph::index_of(UserId node) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), node);
  if (it == nodes_.end() || *it != node) return npos;
  return static_cast<std::size_t>(it - nodes_.begin());
}

std::span<const std::uint32_t> WeightedDiGraph::out_targets(
    std::size_t i) const {
  return std::span(targets_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::span<const double> WeightedDiGraph::out_probabilities(
    std::size_t i) const {
  return std::span(probs_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::pair<std::size_t, std::size_t> WeightedDiGraph::out_slot_range(
    std::size_t i) const {
  return {offsets_[i], offsets_[i + 1]};
}

std::vector<UserId> SeedSet::nodes() const {
  std::vector<UserId> out;
  out.reserve(picks.size());
  for (const auto& p : picks) out.push_back(p.node);
  return out;
}

double expected_spread_mc(const WeightedDiGraph& graph,
                          std::span<const UserId> seeds, std::size_t r,
                          std::uint64_t rng_seed) {
  if (r == 0) throw ConfigError("expected_spread_mc requires r >= 1");
  const auto idx = seed_indices(graph, seeds);
  if (idx.empty()) return 0.0;
  const std::size_t blocks = bit_blocks(graph.edge_count());

  std::atomic<std::size_t> total{0};
  parallel_for(r, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint64_t> row(blocks);
    std::vector<std::uint32_t> stack;
    std::vector<std::uint8_t> visited(graph.node_count());
    std::size_t local = 0;
    for (std::size_t rep = begin; rep < end; ++rep) {
      std::mt19937_64 rng(derive_stream_seed(rng_seed, rep));
      fill_live_row(graph, rng, row.data(), blocks);
      local += live_reach(graph, idx, row.data(), stack, visited);
    }
    total.fetch_add(local, std::memory_order_relaxed);
  });
  return static_cast<double>(total.load()) / static_cast<double>(r);
}

McSpreadSampler::McSpreadSampler(const WeightedDiGraph& graph, std::size_t r,
                                 std::uint64_t rng_seed)
    : graph_(graph), r_(r), blocks_per_replica_(bit_blocks(graph.edge_count())) {
  if (r == 0) throw ConfigError("McSpreadSampler requires r >= 1");
  live_.assign(r_ * blocks_per_replica_, 0);
  parallel_for(r_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t rep = begin; rep < end; ++rep) {
      std::mt19937_64 rng(derive_stream_seed(rng_seed, rep));
      fill_live_row(graph_, rng, live_.data() + rep * blocks_per_replica_,
                    blocks_per_replica_);
    }
  });
}

double McSpreadSampler::spread(std::span<const UserId> seeds) const {
  const auto idx = seed_indices(graph_, seeds);
  if (idx.empty()) return 0.0;
  std::atomic<std::size_t> total{0};
  parallel_for(r_, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> stack;
    std::vector<std::uint8_t> visited(graph_.node_count());
    std::size_t local = 0;
    for (std::size_t rep = begin; rep < end; ++rep) {
      local += live_reach(graph_, idx,
                          live_.data() + rep * blocks_per_replica_, stack,
                          visited);
    }
    total.fetch_add(local, std::memory_order_relaxed);
  });
  return static_cast<double>(total.load()) / static_cast<double>(r_);
}

double exact_spread_enum(const WeightedDiGraph& graph,
                         std::span<const UserId> seeds) {
  const std::size_t m = graph.edge_count();
  if (m > 20) {
    throw DomainError("exact_spread_enum is limited to 20 edges, got " +
                      std::to_string(m));
  }
  const auto idx = seed_indices(graph, seeds);
  if (idx.empty()) return 0.0;
  const auto probs = graph.probabilities();

  std::vector<std::uint32_t> stack;
  std::vector<std::uint8_t> visited(graph.node_count());
  double expectation = 0.0;
  for (std::uint64_t mask = 0; mask < (1ull << m); ++mask) {
    double weight = 1.0;
    for (std::size_t slot = 0; slot < m; ++slot) {
      weight *= (mask >> slot) & 1 ? probs[slot] : 1.0 - probs[slot];
    }
    if (weight == 0.0) continue;
    const std::uint64_t live[1] = {mask};
    expectation +=
        weight * static_cast<double>(live_reach(graph, idx, live, stack,
                                                visited));
  }
  return expectation;
}

SeedSet celfpp_select(const WeightedDiGraph& graph, std::size_t k,
                      const SpreadFn& spread, Diagnostics& diag) {
  if (k == 0) throw ConfigError("celfpp_select requires k >= 1");
  const auto& nodes = graph.nodes();
  if (k > nodes.size()) {
    diag.report(Severity::warning, "seed_budget_truncated",
                "k=" + std::to_string(k) + " exceeds node count " +
                    std::to_string(nodes.size()));
    k = nodes.size();
  }
  SeedSet result;
  if (k == 0) return result;

  struct Candidate {
    double mg1 = 0.0;       // marginal gain w.r.t. the current seed set
    double mg2 = 0.0;       // gain w.r.t. the set extended by prev_best
    std::uint32_t prev_best = 0;
    bool has_prev = false;
    std::size_t flag = 0;   // seed-set size mg1 was computed against
    std::uint64_t version = 0;
  };
  struct HeapItem {
    double gain;
    std::uint32_t idx;
    std::uint64_t version;
  };
  const auto lower = [](const HeapItem& a, const HeapItem& b) {
    if (a.gain != b.gain) return a.gain < b.gain;
    return a.idx > b.idx;
  };
  std::priority_queue<HeapItem, std::vector<HeapItem>, decltype(lower)> heap(
      lower);

  std::vector<Candidate> cand(nodes.size());
  std::vector<std::uint8_t> accepted(nodes.size(), 0);
  std::vector<UserId> chosen;
  double spread_chosen = 0.0;
  std::uint32_t last_seed = 0;
  bool have_last_seed = false;

  // Current round's best fresh candidate and the cached spread of the seed
  // set extended by it, computed on demand for mg2 evaluations.
  std::uint32_t best_idx = 0;
  double best_gain = 0.0;
  bool have_best = false;
  bool best_spread_cached = false;
  double spread_with_best = 0.0;

  const auto spread_plus = [&](UserId extra) {
    std::vector<UserId> s(chosen);
    s.push_back(extra);
    return spread(s);
  };
  const auto spread_plus2 = [&](UserId a, UserId b) {
    std::vector<UserId> s(chosen);
    s.push_back(a);
    s.push_back(b);
    return spread(s);
  };
  const auto note_best = [&](std::uint32_t idx, double gain) {
    if (!have_best || gain > best_gain ||
        (gain == best_gain && idx < best_idx)) {
      have_best = true;
      best_idx = idx;
      best_gain = gain;
      best_spread_cached = false;
    }
  };
  const auto evaluate_fresh = [&](std::uint32_t idx) {
    auto& c = cand[idx];
    c.mg1 = spread_plus(nodes[idx]) - spread_chosen;
    c.flag = chosen.size();
    if (have_best) {
      if (!best_spread_cached) {
        spread_with_best = spread_plus(nodes[best_idx]);
        best_spread_cached = true;
      }
      c.prev_best = best_idx;
      c.has_prev = true;
      c.mg2 = spread_plus2(nodes[best_idx], nodes[idx]) - spread_with_best;
    } else {
      c.has_prev = false;
      c.mg2 = c.mg1;
    }
    ++c.version;
    heap.push({c.mg1, idx, c.version});
    note_best(idx, c.mg1);
  };

  for (std::uint32_t i = 0; i < nodes.size(); ++i) evaluate_fresh(i);

  while (chosen.size() < k) {
    const HeapItem item = heap.top();
    heap.pop();
    auto& c = cand[item.idx];
    if (accepted[item.idx] || item.version != c.version) continue;

    if (c.flag == chosen.size()) {
      accepted[item.idx] = 1;
      ++c.version;
      result.picks.push_back({nodes[item.idx], c.mg1});
      chosen.push_back(nodes[item.idx]);
      spread_chosen += c.mg1;
      last_seed = item.idx;
      have_last_seed = true;
      have_best = false;
      best_spread_cached = false;
    } else if (c.has_prev && have_last_seed && c.prev_best == last_seed &&
               c.flag + 1 == chosen.size()) {
      // The previous round's runner-up gain against prev_best is exactly the
      // gain against the set that prev_best just joined.
      c.mg1 = c.mg2;
      c.flag = chosen.size();
      c.has_prev = false;
      ++c.version;
      heap.push({c.mg1, item.idx, c.version});
      note_best(item.idx, c.mg1);
    } else {
      evaluate_fresh(item.idx);
    }
  }
  return result;
}

PropagationNetwork build_propagation_network(const ExampleSet& set,
                                             std::int64_t window_start,
                                             std::int64_t window_end) {
  PropagationNetwork net;
  net.window_start = window_start;
  net.window_end = window_end;
  for (const auto& group : set.edges) {
    for (const auto& ex : group.examples) {
      if (ex.label == 1 && ex.exposure_time >= window_start &&
          ex.exposure_time < window_end) {
        net.edges.push_back(group.edge);
        break;
      }
    }
  }
  return net;
}

std::size_t pseudo_actual_spread(const PropagationNetwork& net,
                                 std::span<const UserId> seeds) {
  std::vector<UserId> nodes;
  nodes.reserve(net.edges.size() * 2);
  for (const auto& e : net.edges) {
    nodes.push_back(e.followee);
    nodes.push_back(e.follower);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  const auto index_of = [&](UserId u) -> std::size_t {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), u);
    if (it == nodes.end() || *it != u) return static_cast<std::size_t>(-1);
    return static_cast<std::size_t>(it - nodes.begin());
  };

  std::vector<std::size_t> offsets(nodes.size() + 1, 0);
  std::vector<std::uint32_t> targets(net.edges.size());
  for (const auto& e : net.edges) ++offsets[index_of(e.followee) + 1];
  for (std::size_t i = 0; i < nodes.size(); ++i) offsets[i + 1] += offsets[i];
  {
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& e : net.edges) {
      targets[cursor[index_of(e.followee)]++] =
          static_cast<std::uint32_t>(index_of(e.follower));
    }
  }

  std::vector<std::uint8_t> visited(nodes.size(), 0);
  std::vector<std::uint32_t> stack;
  std::size_t count = 0;
  for (auto s : seeds) {
    const auto i = index_of(s);
    if (i == static_cast<std::size_t>(-1) || visited[i]) continue;
    visited[i] = 1;
    ++count;
    stack.push_back(static_cast<std::uint32_t>(i));
  }
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (std::size_t t = offsets[u]; t < offsets[u + 1]; ++t) {
      const auto v = targets[t];
      if (!visited[v]) {
        visited[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count;
}

WeightedDiGraph build_im_graph(const FittedModel& model,
                               const ExampleSet& train,
                               std::int64_t anchor_time) {
  const double unit = static_cast<double>(train.config.seconds_per_unit);
  if (!(unit > 0)) throw ConfigError("seconds_per_unit must be positive");

  std::vector<WeightedEdge> edges;
  edges.reserve(train.edges.size());
  for (const auto& group : train.edges) {
    std::optional<double> tau;
    if (model.kind == ModelKind::Decay) {
      std::optional<std::int64_t> last;
      for (const auto& ex : group.examples) {
        if (ex.activation_time && *ex.activation_time <= anchor_time &&
            (!last || *ex.activation_time > *last)) {
          last = *ex.activation_time;
        }
      }
      if (last) {
        tau = std::max(1.0, static_cast<double>(anchor_time - *last) / unit);
      }
    }
    edges.push_back({group.edge.followee, group.edge.follower,
                     predict(model, group.edge, tau)});
  }
  return WeightedDiGraph::from_edges(std::move(edges));
}

}  // namespace cascadecay
