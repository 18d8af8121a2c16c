#include "cascadecay/decay.hpp"

#include <cmath>

namespace cascadecay {

double decay_probability(const EdgeParams& params, double tau) {
  if (!(tau >= 1.0)) {
    throw DomainError("decay_probability: tau must be >= 1");
  }
  return params.q * std::pow(tau, -params.alpha);
}

}  // namespace cascadecay
