#include "cascadecay/corpus.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "json.hpp"

#include "cascadecay/textio.hpp"

namespace cascadecay {

FollowGraph FollowGraph::from_edges(std::vector<FollowEdge> edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  FollowGraph g;
  g.followers_.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size();) {
    UserId u = edges[i].followee;
    g.followees_.push_back(u);
    g.offsets_.push_back(g.followers_.size());
    for (; i < edges.size() && edges[i].followee == u; ++i) {
      g.followers_.push_back(edges[i].follower);
    }
  }
  g.offsets_.push_back(g.followers_.size());
  return g;
}

std::span<const UserId> FollowGraph::followers_of(UserId followee) const {
  auto it = std::lower_bound(followees_.begin(), followees_.end(), followee);
  if (it == followees_.end() || *it != followee) return {};
  std::size_t i = static_cast<std::size_t>(it - followees_.begin());
  return {followers_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

bool FollowGraph::has_edge(UserId followee, UserId follower) const {
  auto span = followers_of(followee);
  return std::binary_search(span.begin(), span.end(), follower);
}

std::vector<FollowEdge> FollowGraph::edges() const {
  std::vector<FollowEdge> out;
  out.reserve(followers_.size());
  for (std::size_t i = 0; i < followees_.size(); ++i) {
    for (std::size_t j = offsets_[i]; j < offsets_[i + 1]; ++j) {
      out.push_back({followees_[i], followers_[j]});
    }
  }
  return out;
}

const EdgeExamples* ExampleSet::find_edge(const FollowEdge& e) const {
  auto it = std::lower_bound(
      edges.begin(), edges.end(), e,
      [](const EdgeExamples& g, const FollowEdge& key) { return g.edge < key; });
  if (it == edges.end() || !(it->edge == e)) return nullptr;
  return &*it;
}

std::size_t ExampleSet::total_examples() const {
  std::size_t n = 0;
  for (const auto& g : edges) n += g.examples.size();
  return n;
}

FollowGraph ingest_follow_graph(std::istream& in, Diagnostics& diag) {
  std::vector<FollowEdge> edges;
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    UserId followee = 0, follower = 0;
    if (fields.size() != 2 || !parse_u64(fields[0], followee) ||
        !parse_u64(fields[1], follower)) {
      diag.report(Severity::error, "malformed_record",
                  "expected followee<TAB>follower", lineno);
      continue;
    }
    if (followee == follower) {
      diag.report(Severity::warning, "self_loop",
                  "user " + std::string(fields[0]), lineno);
      continue;
    }
    edges.push_back({followee, follower});
  }
  return FollowGraph::from_edges(std::move(edges));
}

EventLog ingest_message_events(std::istream& in, Diagnostics& diag) {
  std::vector<MessageEvent> events;
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 4 && fields.size() != 5) {
      diag.report(Severity::error, "malformed_record",
                  "expected user<TAB>message<TAB>timestamp<TAB>kind[<TAB>source]",
                  lineno);
      continue;
    }
    MessageEvent e;
    bool ok = parse_u64(fields[0], e.user) && parse_u64(fields[1], e.message);
    if (!ok) {
      diag.report(Severity::error, "malformed_record", "bad user or message id",
                  lineno);
      continue;
    }
    if (!parse_i64(fields[2], e.timestamp) || e.timestamp <= 0) {
      diag.report(Severity::error, "malformed_record",
                  "timestamp must be a positive integer", lineno);
      continue;
    }
    if (fields[3] == "post") {
      e.kind = EventKind::post;
      if (fields.size() == 5 && !fields[4].empty()) {
        diag.report(Severity::error, "malformed_record",
                    "post carries a source message", lineno);
        continue;
      }
    } else if (fields[3] == "retweet") {
      e.kind = EventKind::retweet;
      MessageId src = 0;
      if (fields.size() != 5 || !parse_u64(fields[4], src)) {
        diag.report(Severity::error, "malformed_record",
                    "retweet needs a source message id", lineno);
        continue;
      }
      e.source_message = src;
    } else {
      diag.report(Severity::error, "malformed_record",
                  "kind must be post or retweet", lineno);
      continue;
    }
    events.push_back(e);
  }
  return resolve_event_log(std::move(events), diag);
}

EventLog resolve_event_log(std::vector<MessageEvent> events, Diagnostics& diag) {
  std::stable_sort(events.begin(), events.end(),
                   [](const MessageEvent& a, const MessageEvent& b) {
                     return a.timestamp < b.timestamp;
                   });
  std::unordered_map<MessageId, MessageId> root;
  root.reserve(events.size());
  EventLog log;
  log.events.reserve(events.size());
  for (auto& e : events) {
    if (root.contains(e.message)) {
      diag.report(Severity::warning, "duplicate_message",
                  "message " + std::to_string(e.message));
      continue;
    }
    if (e.kind == EventKind::post) {
      e.root_message = e.message;
    } else {
      auto it = root.find(*e.source_message);
      if (it == root.end()) {
        diag.report(Severity::warning, "dangling_source",
                    "message " + std::to_string(e.message) + " references " +
                        std::to_string(*e.source_message));
        continue;
      }
      e.root_message = it->second;
    }
    root.emplace(e.message, e.root_message);
    log.events.push_back(std::move(e));
  }
  return log;
}

namespace {

struct UserMsg {
  UserId user;
  MessageId msg;
  friend bool operator==(const UserMsg&, const UserMsg&) = default;
};

struct UserMsgHash {
  std::size_t operator()(const UserMsg& k) const {
    return static_cast<std::size_t>(
        splitmix64(splitmix64(k.user) ^ (k.msg + 0x9e3779b97f4a7c15ull)));
  }
};

struct Triple {
  UserId followee;
  UserId follower;
  MessageId msg;
  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& k) const {
    std::uint64_t h = splitmix64(k.followee);
    h = splitmix64(h ^ (k.follower + 0x9e3779b97f4a7c15ull));
    h = splitmix64(h ^ (k.msg + 0x9e3779b97f4a7c15ull));
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

ExampleSet extract_examples(const FollowGraph& graph, const EventLog& log,
                            const CorpusConfig& config) {
  // First retweet time per (user, cascade root); later retweets of the same
  // message by the same user do not count.
  std::unordered_map<UserMsg, std::int64_t, UserMsgHash> first_retweet;
  for (const auto& e : log.events) {
    if (e.kind != EventKind::retweet) continue;
    first_retweet.emplace(UserMsg{e.user, e.root_message}, e.timestamp);
  }

  std::unordered_set<Triple, TripleHash> seen;
  std::unordered_map<FollowEdge, std::vector<Example>, FollowEdgeHash> acc;
  for (const auto& e : log.events) {
    auto followers = graph.followers_of(e.user);
    if (followers.empty()) continue;
    for (UserId follower : followers) {
      auto rt = first_retweet.find(UserMsg{follower, e.root_message});
      // An exposure at the exact moment of the follower's retweet does not
      // form an example either: the follower no longer counts as a candidate.
      if (rt != first_retweet.end() && rt->second <= e.timestamp) continue;
      if (!seen.insert(Triple{e.user, follower, e.root_message}).second) continue;
      Example ex;
      ex.message = e.root_message;
      ex.exposure_time = e.timestamp;
      if (rt != first_retweet.end()) {
        ex.activation_time = rt->second;
        bool inside_window =
            config.attribution_window_seconds <= 0 ||
            rt->second - e.timestamp <= config.attribution_window_seconds;
        ex.label = inside_window ? 1 : 0;
      }
      acc[FollowEdge{e.user, follower}].push_back(ex);
    }
  }

  ExampleSet set;
  set.config = config;
  set.edges.reserve(acc.size());
  for (auto& [edge, examples] : acc) {
    if (config.min_examples_per_edge > 0 &&
        examples.size() < config.min_examples_per_edge) {
      continue;
    }
    set.edges.push_back({edge, std::move(examples)});
  }
  std::sort(set.edges.begin(), set.edges.end(),
            [](const EdgeExamples& a, const EdgeExamples& b) {
              return a.edge < b.edge;
            });
  return set;
}

ExampleSet compute_latencies(ExampleSet set, double seconds_per_unit) {
  if (!(seconds_per_unit > 0)) {
    throw ConfigError("seconds_per_unit must be positive");
  }
  set.config.seconds_per_unit = seconds_per_unit;
  std::vector<std::int64_t> activations;
  for (auto& group : set.edges) {
    activations.clear();
    for (const auto& ex : group.examples) {
      if (ex.activation_time) activations.push_back(*ex.activation_time);
    }
    std::sort(activations.begin(), activations.end());
    for (auto& ex : group.examples) {
      auto it = std::upper_bound(activations.begin(), activations.end(),
                                 ex.exposure_time);
      if (it == activations.begin()) {
        ex.latency.reset();
        continue;
      }
      double tau = static_cast<double>(ex.exposure_time - *std::prev(it)) /
                   seconds_per_unit;
      ex.latency = std::max(1.0, tau);
    }
  }
  set.latencies_computed = true;
  return set;
}

namespace {

constexpr std::string_view kExamplesHeader = "cascadecay-examples v1";
constexpr std::string_view kMetaPrefix = "# meta: ";

[[noreturn]] void load_fail(std::uint64_t lineno, const std::string& what) {
  throw DataError("examples file, line " + std::to_string(lineno) + ": " + what);
}

}  // namespace

void save_examples(const ExampleSet& set, std::ostream& out) {
  out << kExamplesHeader << '\n';
  nlohmann::json meta{
      {"attribution_window_seconds", set.config.attribution_window_seconds},
      {"latencies_computed", set.latencies_computed},
      {"min_examples_per_edge", set.config.min_examples_per_edge},
      {"seconds_per_unit", set.config.seconds_per_unit},
  };
  out << kMetaPrefix << meta.dump() << '\n';
  for (const auto& group : set.edges) {
    out << "edge\t" << group.edge.followee << '\t' << group.edge.follower << '\n';
    for (const auto& ex : group.examples) {
      out << "ex\t" << ex.message << '\t' << ex.exposure_time << '\t'
          << static_cast<int>(ex.label) << '\t';
      if (ex.activation_time) {
        out << *ex.activation_time;
      } else {
        out << '-';
      }
      out << '\t';
      if (ex.latency) {
        out << format_full(*ex.latency);
      } else {
        out << '-';
      }
      out << '\n';
    }
  }
}

ExampleSet load_examples(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("examples file: empty input, expected header");
  }
  strip_cr(line);
  if (line != kExamplesHeader) {
    if (line.starts_with("cascadecay-examples")) {
      throw DataError("examples file: unsupported version \"" + line + "\"");
    }
    throw DataError("examples file: bad header \"" + line + "\"");
  }

  ExampleSet set;
  EdgeExamples* current = nullptr;
  std::uint64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    if (line.starts_with(kMetaPrefix)) {
      auto meta = nlohmann::json::parse(line.substr(kMetaPrefix.size()),
                                        nullptr, false);
      if (meta.is_discarded() || !meta.is_object()) {
        load_fail(lineno, "unparseable meta record");
      }
      try {
        set.config.attribution_window_seconds =
            meta.value("attribution_window_seconds", std::int64_t{0});
        set.config.min_examples_per_edge =
            meta.value("min_examples_per_edge", std::size_t{0});
        set.config.seconds_per_unit = meta.value("seconds_per_unit", 3600.0);
        set.latencies_computed = meta.value("latencies_computed", false);
      } catch (const nlohmann::json::exception& e) {
        load_fail(lineno, std::string("bad meta record: ") + e.what());
      }
      continue;
    }
    if (line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields[0] == "edge") {
      FollowEdge edge;
      if (fields.size() != 3 || !parse_u64(fields[1], edge.followee) ||
          !parse_u64(fields[2], edge.follower)) {
        load_fail(lineno, "bad edge record");
      }
      if (!set.edges.empty() && !(set.edges.back().edge < edge)) {
        load_fail(lineno, "edge groups out of order");
      }
      set.edges.push_back({edge, {}});
      current = &set.edges.back();
    } else if (fields[0] == "ex") {
      if (current == nullptr) load_fail(lineno, "example before any edge record");
      if (fields.size() != 6) load_fail(lineno, "bad example record");
      Example ex;
      std::uint64_t label = 0;
      if (!parse_u64(fields[1], ex.message) ||
          !parse_i64(fields[2], ex.exposure_time) ||
          !parse_u64(fields[3], label) || label > 1) {
        load_fail(lineno, "bad example record");
      }
      ex.label = static_cast<std::uint8_t>(label);
      if (fields[4] != "-") {
        std::int64_t t = 0;
        if (!parse_i64(fields[4], t)) load_fail(lineno, "bad activation time");
        ex.activation_time = t;
      }
      if (fields[5] != "-") {
        double tau = 0;
        if (!parse_double(fields[5], tau) || !(tau >= 1.0)) {
          load_fail(lineno, "latency must be a number >= 1");
        }
        ex.latency = tau;
      }
      if (!current->examples.empty() &&
          ex.exposure_time < current->examples.back().exposure_time) {
        load_fail(lineno, "exposure times out of order within edge");
      }
      current->examples.push_back(ex);
    } else {
      load_fail(lineno, "unrecognized record type");
    }
  }
  return set;
}

}  // namespace cascadecay
