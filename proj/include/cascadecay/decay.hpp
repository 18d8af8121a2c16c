#pragma once

#include "cascadecay/common.hpp"

namespace cascadecay {

struct EdgeParams {
  double q = 0.0;      // in [0,1]
  double alpha = 0.0;  // >= 0
  friend bool operator==(const EdgeParams&, const EdgeParams&) = default;
};

// P(delta = 1) = q * tau^(-alpha). Requires tau >= 1, which keeps the result
// inside [0,1] for any valid params.
double decay_probability(const EdgeParams& params, double tau);

}  // namespace cascadecay
