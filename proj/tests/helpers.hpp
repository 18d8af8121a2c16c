#pragma once

#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "cascadecay/corpus.hpp"

namespace cascadecay::testing {

inline Example make_ex(MessageId msg, std::int64_t exposure, int label,
                       std::optional<std::int64_t> activation = std::nullopt,
                       std::optional<double> latency = std::nullopt) {
  Example e;
  e.message = msg;
  e.exposure_time = exposure;
  e.label = static_cast<std::uint8_t>(label);
  e.activation_time = activation;
  e.latency = latency;
  return e;
}

inline ExampleSet make_set(std::vector<EdgeExamples> edges,
                           double seconds_per_unit = 3600.0,
                           bool latencies_computed = true) {
  ExampleSet set;
  set.config.seconds_per_unit = seconds_per_unit;
  set.latencies_computed = latencies_computed;
  set.edges = std::move(edges);
  return set;
}

inline double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace cascadecay::testing
