#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "cascadecay/corpus.hpp"
#include "cascadecay/decay.hpp"
#include "cascadecay/diagnostics.hpp"

namespace cascadecay {

enum class ModelKind : std::uint8_t {
  Decay,
  MLE,
  EM,
  StaticBernoulli,
  StaticPCBernoulli,
};

std::string_view model_kind_name(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);

struct Priors {
  // q ~ Beta(a, b); Beta(1,1) is flat.
  double q_a = 1.1;
  double q_b = 10.0;
  // alpha ~ log-normal(mu, sigma), centered on the global decay exponent.
  double alpha_mu = -0.3424903089467762;  // ln 0.71
  double alpha_sigma = 0.7;
  // Drops the alpha prior term entirely (a log-normal cannot be flat).
  bool alpha_flat = false;
  friend bool operator==(const Priors&, const Priors&) = default;
};

struct OptimizerConfig {
  double tol = 1e-6;  // on the objective
  int max_iter = 200;
  std::optional<double> fixed_alpha;  // pin alpha, optimize q alone
  // Keeps log terms finite during optimization.
  double q_lo = 1e-6;
  double q_hi = 1.0 - 1e-6;
  double alpha_hi = 10.0;
  // Imputed latency for undefined-latency examples; default is the median
  // defined latency of the training corpus.
  std::optional<double> fallback_tau_override;
};

struct EdgeFit {
  EdgeParams params;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;
  friend bool operator==(const EdgeFit&, const EdgeFit&) = default;
};

struct FittedModel {
  ModelKind kind = ModelKind::MLE;
  std::vector<std::pair<FollowEdge, EdgeFit>> edges;  // sorted by edge
  EdgeParams fallback;        // for edges absent from training
  double fallback_tau = 1.0;  // imputation for undefined latencies
  Priors priors;              // as used (Decay only)
  std::size_t non_converged = 0;
  int em_iterations = 0;

  const EdgeFit* find(const FollowEdge& e) const;
};

// Aggregated per-edge training data: positives' log-latencies, negatives
// grouped by distinct log-latency. Undefined latencies enter as fallback_tau.
struct EdgeLikelihood {
  std::size_t n_pos = 0;
  double sum_pos_log_tau = 0.0;
  std::vector<std::pair<double, double>> neg_log_tau;  // (ln tau, count)
  std::size_t n_neg = 0;

  double objective(double q, double alpha, const Priors& priors) const;
  // d/dq, d/dalpha, and second derivatives at (q, alpha).
  void derivatives(double q, double alpha, const Priors& priors, double g[2],
                   double h[3]) const;
};

EdgeLikelihood build_edge_likelihood(const EdgeExamples& group,
                                     double fallback_tau);

// Prior-maximizing (q, alpha) under box constraints; the fit on an edge with
// no examples.
EdgeParams prior_mode(const Priors& priors, const OptimizerConfig& opt);

// Median defined latency across the set, floored at 1; 1 when none defined.
double median_defined_latency(const ExampleSet& set);

// Per-edge MAP fit of P = q * tau^(-alpha): coarse grid seeding followed by
// damped Newton ascent inside the box.
FittedModel fit_decay_map(const ExampleSet& train, const Priors& priors,
                          const OptimizerConfig& opt, Diagnostics& diag);

FittedModel fit_mle(const ExampleSet& train);
FittedModel fit_static_bernoulli(const ExampleSet& train);
FittedModel fit_static_pc_bernoulli(const ExampleSet& train);

// Multi-parent credit sharing via expectation-maximization over the latent
// "which parent succeeded" indicators. ll_trace, when given, receives the
// incomplete-data log-likelihood after every iteration.
FittedModel fit_em(const ExampleSet& train, double tol, int max_iter,
                   Diagnostics& diag, std::vector<double>* ll_trace = nullptr);

// Static kinds ignore tau; Decay evaluates the model at tau (fallback_tau
// when undefined). Unseen edges use the model's fallback parameters.
double predict(const FittedModel& model, const FollowEdge& edge,
               std::optional<double> tau);

void save_model(const FittedModel& model, std::ostream& out);
FittedModel load_model(std::istream& in);

}  // namespace cascadecay
