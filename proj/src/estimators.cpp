#include "cascadecay/estimators.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>

#include "json.hpp"

#include "cascadecay/parallel.hpp"
#include "cascadecay/textio.hpp"

namespace cascadecay {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate_priors(const Priors& p) {
  if (!(p.q_a > 0) || !(p.q_b > 0)) throw ConfigError("beta prior needs a, b > 0");
  if (!(p.alpha_sigma > 0)) throw ConfigError("alpha prior needs sigma > 0");
}

void validate_opt(const OptimizerConfig& o) {
  if (!(o.tol > 0)) throw ConfigError("optimizer tol must be positive");
  if (o.max_iter < 1) throw ConfigError("optimizer max_iter must be >= 1");
  if (!(0 < o.q_lo && o.q_lo < o.q_hi && o.q_hi < 1)) {
    throw ConfigError("optimizer q box must satisfy 0 < lo < hi < 1");
  }
  if (!(o.alpha_hi > 0)) throw ConfigError("optimizer alpha_hi must be positive");
  if (o.fixed_alpha && !(*o.fixed_alpha >= 0)) {
    throw ConfigError("fixed_alpha must be >= 0");
  }
}

double log_alpha_prior(double alpha, const Priors& pr) {
  if (pr.alpha_flat) return 0.0;
  if (!(alpha > 0)) return kNegInf;
  double la = std::log(alpha);
  double z = (la - pr.alpha_mu) / pr.alpha_sigma;
  return -la - 0.5 * z * z;
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Decay: return "Decay";
    case ModelKind::MLE: return "MLE";
    case ModelKind::EM: return "EM";
    case ModelKind::StaticBernoulli: return "StaticBernoulli";
    case ModelKind::StaticPCBernoulli: return "StaticPCBernoulli";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  if (name == "Decay") return ModelKind::Decay;
  if (name == "MLE") return ModelKind::MLE;
  if (name == "EM") return ModelKind::EM;
  if (name == "StaticBernoulli") return ModelKind::StaticBernoulli;
  if (name == "StaticPCBernoulli") return ModelKind::StaticPCBernoulli;
  return std::nullopt;
}

const EdgeFit* FittedModel::find(const FollowEdge& e) const {
  auto it = std::lower_bound(
      edges.begin(), edges.end(), e,
      [](const auto& entry, const FollowEdge& key) { return entry.first < key; });
  if (it == edges.end() || !(it->first == e)) return nullptr;
  return &it->second;
}

double EdgeLikelihood::objective(double q, double alpha,
                                 const Priors& priors) const {
  if (!(q > 0) || !(q < 1)) return kNegInf;
  double f = 0.0;
  if (n_pos > 0) {
    f += static_cast<double>(n_pos) * std::log(q) - alpha * sum_pos_log_tau;
  }
  for (const auto& [lt, w] : neg_log_tau) {
    double r = 1.0 - q * std::exp(-alpha * lt);
    if (!(r > 0)) return kNegInf;
    f += w * std::log(r);
  }
  f += (priors.q_a - 1.0) * std::log(q) + (priors.q_b - 1.0) * std::log1p(-q);
  f += log_alpha_prior(alpha, priors);
  return f;
}

void EdgeLikelihood::derivatives(double q, double alpha, const Priors& priors,
                                 double g[2], double h[3]) const {
  double se_r = 0, sle_r = 0, se2_r2 = 0, sle_r2 = 0, sl2e_r2 = 0;
  for (const auto& [lt, w] : neg_log_tau) {
    double e = std::exp(-alpha * lt);
    double r = 1.0 - q * e;
    double er = e / r;
    se_r += w * er;
    sle_r += w * lt * er;
    se2_r2 += w * er * er;
    sle_r2 += w * lt * e / (r * r);
    sl2e_r2 += w * lt * lt * e / (r * r);
  }
  double np = static_cast<double>(n_pos);
  g[0] = np / q - se_r + (priors.q_a - 1.0) / q - (priors.q_b - 1.0) / (1.0 - q);
  g[1] = -sum_pos_log_tau + q * sle_r;
  h[0] = -np / (q * q) - se2_r2 - (priors.q_a - 1.0) / (q * q) -
         (priors.q_b - 1.0) / ((1.0 - q) * (1.0 - q));
  h[1] = sle_r2;
  h[2] = -q * sl2e_r2;
  if (!priors.alpha_flat) {
    double la = std::log(alpha);
    double s2 = priors.alpha_sigma * priors.alpha_sigma;
    g[1] += -(1.0 + (la - priors.alpha_mu) / s2) / alpha;
    h[2] += (1.0 + (la - priors.alpha_mu - 1.0) / s2) / (alpha * alpha);
  }
}

EdgeLikelihood build_edge_likelihood(const EdgeExamples& group,
                                     double fallback_tau) {
  EdgeLikelihood lik;
  std::vector<double> neg;
  for (const auto& ex : group.examples) {
    double tau = ex.latency.value_or(fallback_tau);
    double lt = std::log(tau);
    if (ex.label == 1) {
      ++lik.n_pos;
      lik.sum_pos_log_tau += lt;
    } else {
      neg.push_back(lt);
    }
  }
  lik.n_neg = neg.size();
  std::sort(neg.begin(), neg.end());
  for (std::size_t i = 0; i < neg.size();) {
    std::size_t j = i;
    while (j < neg.size() && neg[j] == neg[i]) ++j;
    lik.neg_log_tau.push_back({neg[i], static_cast<double>(j - i)});
    i = j;
  }
  return lik;
}

EdgeParams prior_mode(const Priors& priors, const OptimizerConfig& opt) {
  EdgeParams p;
  if (priors.q_a > 1 && priors.q_b > 1) {
    p.q = (priors.q_a - 1.0) / (priors.q_a + priors.q_b - 2.0);
  } else if (priors.q_a <= 1 && priors.q_b > 1) {
    p.q = opt.q_lo;
  } else if (priors.q_a > 1 && priors.q_b <= 1) {
    p.q = opt.q_hi;
  } else {
    p.q = 0.5;
  }
  p.q = std::clamp(p.q, opt.q_lo, opt.q_hi);
  if (opt.fixed_alpha) {
    p.alpha = *opt.fixed_alpha;
  } else if (priors.alpha_flat) {
    p.alpha = 0.0;
  } else {
    p.alpha = std::clamp(
        std::exp(priors.alpha_mu - priors.alpha_sigma * priors.alpha_sigma),
        0.0, opt.alpha_hi);
  }
  return p;
}

double median_defined_latency(const ExampleSet& set) {
  std::vector<double> lat;
  for (const auto& group : set.edges) {
    for (const auto& ex : group.examples) {
      if (ex.latency) lat.push_back(*ex.latency);
    }
  }
  if (lat.empty()) return 1.0;
  std::size_t mid = lat.size() / 2;
  std::nth_element(lat.begin(), lat.begin() + mid, lat.end());
  double m = lat[mid];
  if (lat.size() % 2 == 0) {
    double lo = *std::max_element(lat.begin(), lat.begin() + mid);
    m = 0.5 * (lo + m);
  }
  return std::max(1.0, m);
}

namespace {

EdgeFit fit_edge_map(const EdgeLikelihood& lik, const Priors& priors_in,
                     const OptimizerConfig& opt) {
  Priors priors = priors_in;
  // A pinned alpha turns the alpha prior into a constant; drop it so the
  // objective stays finite even at alpha = 0.
  if (opt.fixed_alpha) priors.alpha_flat = true;
  const double alpha_lo = priors.alpha_flat ? 0.0 : 1e-8;

  auto clamp_point = [&](double& q, double& a) {
    q = std::clamp(q, opt.q_lo, opt.q_hi);
    a = opt.fixed_alpha ? *opt.fixed_alpha
                        : std::clamp(a, alpha_lo, opt.alpha_hi);
  };

  // Seed from a coarse grid plus the prior mode.
  EdgeParams mode = prior_mode(priors, opt);
  double best_q = mode.q, best_a = mode.alpha;
  clamp_point(best_q, best_a);
  double best_f = lik.objective(best_q, best_a, priors);
  for (int i = 0; i <= 14; ++i) {
    double q = 0.01 + 0.07 * i;
    int a_steps = opt.fixed_alpha ? 0 : 12;
    for (int j = 0; j <= a_steps; ++j) {
      double qq = q, aa = opt.fixed_alpha ? *opt.fixed_alpha : 0.25 * j;
      clamp_point(qq, aa);
      double f = lik.objective(qq, aa, priors);
      if (f > best_f) {
        best_f = f;
        best_q = qq;
        best_a = aa;
      }
    }
  }

  double q = best_q, a = best_a, f = best_f;
  EdgeFit fit;
  fit.converged = false;
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    double g[2], h[3];
    lik.derivatives(q, a, priors, g, h);
    double dq, da;
    if (opt.fixed_alpha) {
      dq = h[0] < 0 ? -g[0] / h[0] : g[0];
      da = 0.0;
    } else {
      double det = h[0] * h[2] - h[1] * h[1];
      dq = (-g[0] * h[2] + g[1] * h[1]) / det;
      da = (-g[1] * h[0] + g[0] * h[1]) / det;
      bool usable = std::isfinite(dq) && std::isfinite(da) &&
                    dq * g[0] + da * g[1] > 0;
      if (!usable) {
        dq = g[0];
        da = g[1];
      }
    }
    double step = 1.0;
    double fn = kNegInf, qn = q, an = a;
    bool improved = false;
    while (step >= 1e-12) {
      qn = q + step * dq;
      an = a + step * da;
      clamp_point(qn, an);
      fn = lik.objective(qn, an, priors);
      if (fn > f) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      fit.converged = true;  // stationary inside the box
      break;
    }
    double gain = fn - f;
    q = qn;
    a = an;
    f = fn;
    if (gain < opt.tol) {
      fit.converged = true;
      ++iter;
      break;
    }
  }
  fit.params = {q, a};
  fit.n_pos = lik.n_pos;
  fit.n_neg = lik.n_neg;
  fit.objective = f;
  fit.iterations = iter;
  return fit;
}

void require_nonempty(const ExampleSet& train, const char* who) {
  if (train.edges.empty()) {
    throw EmptyResultError(std::string(who) + ": empty training set");
  }
}

double corpus_positive_ratio(const ExampleSet& train) {
  std::size_t pos = 0, total = 0;
  for (const auto& group : train.edges) {
    total += group.examples.size();
    for (const auto& ex : group.examples) pos += ex.label;
  }
  return total == 0 ? 0.0 : static_cast<double>(pos) / static_cast<double>(total);
}

double bernoulli_ll(std::size_t pos, std::size_t neg, double p) {
  double ll = 0.0;
  if (pos > 0) ll += static_cast<double>(pos) * std::log(p);
  if (neg > 0) ll += static_cast<double>(neg) * std::log1p(-p);
  return ll;
}

FittedModel fit_ratio_model(const ExampleSet& train, ModelKind kind) {
  require_nonempty(train, "fit");
  FittedModel model;
  model.kind = kind;
  model.fallback = {corpus_positive_ratio(train), 0.0};
  model.edges.reserve(train.edges.size());
  for (const auto& group : train.edges) {
    EdgeFit fit;
    fit.n_pos = 0;
    for (const auto& ex : group.examples) fit.n_pos += ex.label;
    fit.n_neg = group.examples.size() - fit.n_pos;
    std::size_t n = group.examples.size();
    fit.params.q = n == 0 ? model.fallback.q
                          : static_cast<double>(fit.n_pos) /
                                static_cast<double>(n);
    fit.objective = bernoulli_ll(fit.n_pos, fit.n_neg, fit.params.q);
    model.edges.push_back({group.edge, fit});
  }
  return model;
}

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

}  // namespace

FittedModel fit_decay_map(const ExampleSet& train, const Priors& priors,
                          const OptimizerConfig& opt, Diagnostics& diag) {
  validate_priors(priors);
  validate_opt(opt);
  require_nonempty(train, "fit_decay_map");
  FittedModel model;
  model.kind = ModelKind::Decay;
  model.priors = priors;
  model.fallback_tau = std::max(
      1.0, opt.fallback_tau_override.value_or(median_defined_latency(train)));
  {
    Priors pr = priors;
    if (opt.fixed_alpha) pr.alpha_flat = true;
    model.fallback = prior_mode(pr, opt);
  }
  model.edges.resize(train.edges.size());
  parallel_for(train.edges.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      EdgeLikelihood lik =
          build_edge_likelihood(train.edges[i], model.fallback_tau);
      model.edges[i] = {train.edges[i].edge, fit_edge_map(lik, priors, opt)};
    }
  });
  for (const auto& [edge, fit] : model.edges) {
    if (!fit.converged) {
      ++model.non_converged;
      diag.report(Severity::warning, "map_non_convergence",
                  "edge " + std::to_string(edge.followee) + ":" +
                      std::to_string(edge.follower));
    }
  }
  return model;
}

FittedModel fit_mle(const ExampleSet& train) {
  return fit_ratio_model(train, ModelKind::MLE);
}

FittedModel fit_static_bernoulli(const ExampleSet& train) {
  // Exposing actions toward the follower are exactly this corpus's examples,
  // so the estimate coincides with MLE; the kinds stay distinct on purpose.
  return fit_ratio_model(train, ModelKind::StaticBernoulli);
}

FittedModel fit_static_pc_bernoulli(const ExampleSet& train) {
  require_nonempty(train, "fit_static_pc_bernoulli");
  std::unordered_map<UserMsg, double, UserMsgHash> parent_count;
  for (const auto& group : train.edges) {
    for (const auto& ex : group.examples) {
      if (ex.label == 1) {
        parent_count[UserMsg{group.edge.follower, ex.message}] += 1.0;
      }
    }
  }
  FittedModel model;
  model.kind = ModelKind::StaticPCBernoulli;
  model.edges.reserve(train.edges.size());
  double total_credit = 0.0;
  std::size_t total_examples = 0;
  for (const auto& group : train.edges) {
    EdgeFit fit;
    double credit = 0.0;
    for (const auto& ex : group.examples) {
      if (ex.label == 1) {
        ++fit.n_pos;
        credit += 1.0 / parent_count.at(UserMsg{group.edge.follower, ex.message});
      }
    }
    fit.n_neg = group.examples.size() - fit.n_pos;
    std::size_t n = group.examples.size();
    fit.params.q = n == 0 ? 0.0 : credit / static_cast<double>(n);
    fit.objective = credit;
    total_credit += credit;
    total_examples += n;
    model.edges.push_back({group.edge, fit});
  }
  model.fallback.q = total_examples == 0
                         ? 0.0
                         : total_credit / static_cast<double>(total_examples);
  for (auto& [edge, fit] : model.edges) {
    if (fit.n_pos + fit.n_neg == 0) fit.params.q = model.fallback.q;
  }
  return model;
}

FittedModel fit_em(const ExampleSet& train, double tol, int max_iter,
                   Diagnostics& diag, std::vector<double>* ll_trace) {
  if (!(tol > 0)) throw ConfigError("fit_em: tol must be positive");
  if (max_iter < 1) throw ConfigError("fit_em: max_iter must be >= 1");
  require_nonempty(train, "fit_em");

  const std::size_t n_edges = train.edges.size();
  std::vector<std::size_t> trials(n_edges, 0), positives(n_edges, 0);
  // Events: one per (follower, message) with at least one positive; parents
  // are the edges whose exposure preceded that retweet.
  std::unordered_map<UserMsg, std::size_t, UserMsgHash> event_index;
  std::vector<std::vector<std::size_t>> event_parents;
  for (std::size_t i = 0; i < n_edges; ++i) {
    const auto& group = train.edges[i];
    trials[i] = group.examples.size();
    for (const auto& ex : group.examples) {
      if (ex.label != 1) continue;
      ++positives[i];
      UserMsg key{group.edge.follower, ex.message};
      auto [it, inserted] = event_index.try_emplace(key, event_parents.size());
      if (inserted) event_parents.emplace_back();
      event_parents[it->second].push_back(i);
    }
  }

  std::vector<double> p(n_edges, 0.0);
  for (std::size_t i = 0; i < n_edges; ++i) {
    if (trials[i] > 0) {
      p[i] = (static_cast<double>(positives[i]) + 1.0) /
             (static_cast<double>(trials[i]) + 2.0);
    }
  }

  auto incomplete_ll = [&]() {
    double ll = 0.0;
    for (const auto& parents : event_parents) {
      double miss = 1.0;
      for (std::size_t i : parents) miss *= 1.0 - p[i];
      ll += std::log(std::max(1.0 - miss, 1e-300));
    }
    for (std::size_t i = 0; i < n_edges; ++i) {
      std::size_t neg = trials[i] - positives[i];
      if (neg > 0) ll += static_cast<double>(neg) * std::log1p(-p[i]);
    }
    return ll;
  };

  if (ll_trace) {
    ll_trace->clear();
    ll_trace->push_back(incomplete_ll());
  }

  std::vector<double> credit(n_edges);
  int iter = 0;
  double delta = 0.0;
  for (; iter < max_iter; ++iter) {
    std::fill(credit.begin(), credit.end(), 0.0);
    for (const auto& parents : event_parents) {
      double miss = 1.0;
      double sum_p = 0.0;
      for (std::size_t i : parents) {
        miss *= 1.0 - p[i];
        sum_p += p[i];
      }
      double denom = 1.0 - miss;
      for (std::size_t i : parents) {
        double gamma;
        if (denom > 1e-300) {
          gamma = p[i] / denom;
        } else if (sum_p > 0) {
          gamma = p[i] / sum_p;
        } else {
          gamma = 1.0 / static_cast<double>(parents.size());
        }
        credit[i] += gamma;
      }
    }
    delta = 0.0;
    for (std::size_t i = 0; i < n_edges; ++i) {
      if (trials[i] == 0) continue;
      double pn = credit[i] / static_cast<double>(trials[i]);
      delta = std::max(delta, std::abs(pn - p[i]));
      p[i] = pn;
    }
    if (ll_trace) ll_trace->push_back(incomplete_ll());
    if (delta < tol) {
      ++iter;
      break;
    }
  }
  if (iter >= max_iter && delta >= tol) {
    diag.report(Severity::warning, "em_max_iter",
                "stopped at delta=" + format_short(delta));
  }

  FittedModel model;
  model.kind = ModelKind::EM;
  model.fallback = {corpus_positive_ratio(train), 0.0};
  model.em_iterations = iter;
  model.edges.reserve(n_edges);
  for (std::size_t i = 0; i < n_edges; ++i) {
    EdgeFit fit;
    fit.n_pos = positives[i];
    fit.n_neg = trials[i] - positives[i];
    fit.params.q = trials[i] == 0 ? model.fallback.q : p[i];
    fit.iterations = iter;
    model.edges.push_back({train.edges[i].edge, fit});
  }
  return model;
}

double predict(const FittedModel& model, const FollowEdge& edge,
               std::optional<double> tau) {
  const EdgeFit* fit = model.find(edge);
  const EdgeParams& params = fit ? fit->params : model.fallback;
  if (model.kind != ModelKind::Decay) return params.q;
  double t = tau.value_or(model.fallback_tau);
  return decay_probability(params, t);
}

namespace {
constexpr std::string_view kModelHeader = "cascadecay-model v1";
constexpr std::string_view kMetaPrefix = "# meta: ";
}  // namespace

void save_model(const FittedModel& model, std::ostream& out) {
  out << kModelHeader << '\n';
  nlohmann::json meta{
      {"em_iterations", model.em_iterations},
      {"fallback_alpha", model.fallback.alpha},
      {"fallback_q", model.fallback.q},
      {"fallback_tau", model.fallback_tau},
      {"kind", std::string(model_kind_name(model.kind))},
      {"n_edges", model.edges.size()},
      {"non_converged", model.non_converged},
      {"priors",
       {{"alpha_flat", model.priors.alpha_flat},
        {"alpha_mu", model.priors.alpha_mu},
        {"alpha_sigma", model.priors.alpha_sigma},
        {"q_a", model.priors.q_a},
        {"q_b", model.priors.q_b}}},
  };
  out << kMetaPrefix << meta.dump() << '\n';
  out << "edge_id,q,alpha\n";
  for (const auto& [edge, fit] : model.edges) {
    out << edge.followee << ':' << edge.follower << ','
        << format_full(fit.params.q) << ',' << format_full(fit.params.alpha)
        << '\n';
  }
}

FittedModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("model file: empty input, expected header");
  }
  strip_cr(line);
  if (line != kModelHeader) {
    if (line.starts_with("cascadecay-model")) {
      throw DataError("model file: unsupported version \"" + line + "\"");
    }
    throw DataError("model file: bad header \"" + line + "\"");
  }
  FittedModel model;
  bool have_kind = false;
  bool have_columns = false;
  std::uint64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    if (line.starts_with(kMetaPrefix)) {
      auto meta = nlohmann::json::parse(line.substr(kMetaPrefix.size()),
                                        nullptr, false);
      if (meta.is_discarded() || !meta.is_object()) {
        throw DataError("model file, line " + std::to_string(lineno) +
                        ": unparseable meta record");
      }
      try {
        auto kind = parse_model_kind(meta.at("kind").get<std::string>());
        if (!kind) throw DataError("model file: unknown kind");
        model.kind = *kind;
        have_kind = true;
        model.fallback.q = meta.value("fallback_q", 0.0);
        model.fallback.alpha = meta.value("fallback_alpha", 0.0);
        model.fallback_tau = meta.value("fallback_tau", 1.0);
        model.non_converged = meta.value("non_converged", std::size_t{0});
        model.em_iterations = meta.value("em_iterations", 0);
        if (meta.contains("priors")) {
          const auto& pr = meta["priors"];
          model.priors.q_a = pr.value("q_a", model.priors.q_a);
          model.priors.q_b = pr.value("q_b", model.priors.q_b);
          model.priors.alpha_mu = pr.value("alpha_mu", model.priors.alpha_mu);
          model.priors.alpha_sigma =
              pr.value("alpha_sigma", model.priors.alpha_sigma);
          model.priors.alpha_flat = pr.value("alpha_flat", false);
        }
      } catch (const nlohmann::json::exception& e) {
        throw DataError("model file, line " + std::to_string(lineno) +
                        ": bad meta record: " + e.what());
      }
      continue;
    }
    if (line[0] == '#') continue;
    if (line == "edge_id,q,alpha") {
      have_columns = true;
      continue;
    }
    std::size_t colon = line.find(':');
    std::size_t c1 = line.find(',', colon == std::string::npos ? 0 : colon);
    std::size_t c2 = c1 == std::string::npos ? std::string::npos
                                             : line.find(',', c1 + 1);
    FollowEdge edge;
    EdgeFit fit;
    if (colon == std::string::npos || c1 == std::string::npos ||
        c2 == std::string::npos ||
        !parse_u64(std::string_view(line).substr(0, colon), edge.followee) ||
        !parse_u64(std::string_view(line).substr(colon + 1, c1 - colon - 1),
                   edge.follower) ||
        !parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1),
                      fit.params.q) ||
        !parse_double(std::string_view(line).substr(c2 + 1), fit.params.alpha)) {
      throw DataError("model file, line " + std::to_string(lineno) +
                      ": bad edge row");
    }
    if (!model.edges.empty() && !(model.edges.back().first < edge)) {
      throw DataError("model file, line " + std::to_string(lineno) +
                      ": edges out of order");
    }
    model.edges.push_back({edge, fit});
  }
  if (!have_kind) throw DataError("model file: missing meta record with kind");
  if (!have_columns && !model.edges.empty()) {
    throw DataError("model file: missing column header");
  }
  return model;
}

}  // namespace cascadecay
