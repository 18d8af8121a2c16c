#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cascadecay/common.hpp"
#include "cascadecay/diagnostics.hpp"

namespace cascadecay {

enum class EventKind : std::uint8_t { post, retweet };

struct MessageEvent {
  UserId user = 0;
  MessageId message = 0;
  std::int64_t timestamp = 0;
  EventKind kind = EventKind::post;
  std::optional<MessageId> source_message;  // set iff kind == retweet
  // Original post at the root of the retweet chain; equals `message` for
  // posts. Filled in by resolve_event_log.
  MessageId root_message = 0;
  friend bool operator==(const MessageEvent&, const MessageEvent&) = default;
};

struct EventLog {
  std::vector<MessageEvent> events;  // sorted by timestamp, ties keep input order
};

class FollowGraph {
 public:
  // Sorts, deduplicates, and indexes. Self-loops are the caller's problem;
  // ingest_follow_graph drops them before calling this.
  static FollowGraph from_edges(std::vector<FollowEdge> edges);

  std::size_t edge_count() const { return followers_.size(); }
  std::span<const UserId> followers_of(UserId followee) const;
  bool has_edge(UserId followee, UserId follower) const;
  const std::vector<UserId>& followees() const { return followees_; }
  std::vector<FollowEdge> edges() const;

 private:
  std::vector<UserId> followees_;     // sorted, unique
  std::vector<std::size_t> offsets_;  // followees_.size() + 1 entries
  std::vector<UserId> followers_;     // sorted run per followee
};

struct Example {
  MessageId message = 0;
  std::int64_t exposure_time = 0;
  std::uint8_t label = 0;  // 1 iff the follower retweeted strictly after exposure
  // Time the follower retweeted the message, when that happened strictly after
  // exposure. Also present on negatives created by the attribution window cap:
  // the late retweet still activates the edge for latency purposes.
  std::optional<std::int64_t> activation_time;
  // Latency tau in configured units, >= 1. Empty until compute_latencies runs,
  // and stays empty for exposures before the edge's first activation.
  std::optional<double> latency;
  friend bool operator==(const Example&, const Example&) = default;
};

struct EdgeExamples {
  FollowEdge edge;
  std::vector<Example> examples;  // exposure_time non-decreasing
  friend bool operator==(const EdgeExamples&, const EdgeExamples&) = default;
};

struct CorpusConfig {
  double seconds_per_unit = 3600.0;
  std::int64_t attribution_window_seconds = 0;  // 0 disables the cap
  std::size_t min_examples_per_edge = 0;        // 0 keeps every edge
  friend bool operator==(const CorpusConfig&, const CorpusConfig&) = default;
};

struct ExampleSet {
  CorpusConfig config;
  bool latencies_computed = false;
  std::vector<EdgeExamples> edges;  // sorted by (followee, follower)

  const EdgeExamples* find_edge(const FollowEdge& e) const;
  std::size_t total_examples() const;
  friend bool operator==(const ExampleSet&, const ExampleSet&) = default;
};

// Records are `followee<TAB>follower`. Malformed records are reported as
// errors and skipped; self-loops dropped with a warning; duplicates merged.
FollowGraph ingest_follow_graph(std::istream& in, Diagnostics& diag);

// Records are `user<TAB>message<TAB>timestamp<TAB>kind[<TAB>source]`. Output
// is sorted and cascade roots are resolved.
EventLog ingest_message_events(std::istream& in, Diagnostics& diag);

// Stable-sorts by timestamp and resolves each event's cascade root by
// following retweet sources. Retweets of unknown messages and events reusing
// an already-seen message id are dropped with warnings.
EventLog resolve_event_log(std::vector<MessageEvent> events, Diagnostics& diag);

// One example per (followee, follower, message): the follower's first
// exposure, skipped entirely when the follower already retweeted the message
// at or before that moment. Positive iff the follower's first retweet falls
// strictly after exposure (and inside the attribution window if one is set).
ExampleSet extract_examples(const FollowGraph& graph, const EventLog& log,
                            const CorpusConfig& config);

// Latency of an exposure = time since the follower's most recent retweet of
// this followee on this edge, in `seconds_per_unit` units, floored at 1.
ExampleSet compute_latencies(ExampleSet set, double seconds_per_unit);

void save_examples(const ExampleSet& set, std::ostream& out);
ExampleSet load_examples(std::istream& in);

}  // namespace cascadecay
