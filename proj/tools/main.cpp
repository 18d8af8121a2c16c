#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cascadecay/common.hpp"
#include "cascadecay/corpus.hpp"
#include "cascadecay/diagnostics.hpp"
#include "cascadecay/estimators.hpp"
#include "cascadecay/evaluation.hpp"
#include "cascadecay/scaling.hpp"
#include "cascadecay/synthgen.hpp"
#include "cascadecay/textio.hpp"
#include "cascadecay/viral.hpp"

namespace fs = std::filesystem;
using namespace cascadecay;

namespace {

constexpr double kEmTol = 1e-6;
constexpr int kEmMaxIter = 200;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// The hash covers everything that shapes the computation; the output
// directory stays out so reruns into different directories stay
// byte-identical.
std::string run_line(const nlohmann::json& config) {
  nlohmann::json j{{"config_hash", hex64(fnv1a64(config.dump()))},
                   {"tool", kToolName},
                   {"version", kToolVersion}};
  return "# run: " + j.dump();
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path.string());
  return out;
}

void write_artifact(const fs::path& path, const std::string& meta,
                    const std::function<void(std::ostream&)>& body) {
  auto out = open_output(path);
  out << meta << '\n';
  body(out);
  if (!out.good()) throw DataError("failed writing " + path.string());
}

// Library formats put their version tag on line one; the run header goes
// right after it.
void write_versioned_artifact(const fs::path& path, const std::string& meta,
                              const std::function<void(std::ostream&)>& save) {
  std::ostringstream buf;
  save(buf);
  const std::string content = buf.str();
  const auto nl = content.find('\n');
  auto out = open_output(path);
  out << content.substr(0, nl + 1) << meta << '\n' << content.substr(nl + 1);
  if (!out.good()) throw DataError("failed writing " + path.string());
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

int finish(const fs::path& out_dir, const std::string& meta, Diagnostics& diag) {
  write_artifact(out_dir / "diagnostics.txt", meta,
                 [&](std::ostream& o) { diag.write(o); });
  if (diag.error_count() > 0) {
    diag.write(std::cerr);
    return 1;
  }
  return 0;
}

ExampleSet load_examples_file(const std::string& path) {
  auto in = open_input(path);
  auto set = load_examples(in);
  if (!set.latencies_computed) {
    set = compute_latencies(std::move(set), set.config.seconds_per_unit);
  }
  return set;
}

std::pair<FollowGraph, EventLog> load_corpus(const std::string& follows,
                                             const std::string& events,
                                             Diagnostics& diag) {
  auto fin = open_input(follows);
  auto ein = open_input(events);
  FollowGraph graph = ingest_follow_graph(fin, diag);
  EventLog raw = ingest_message_events(ein, diag);
  EventLog log = resolve_event_log(std::move(raw.events), diag);
  return {std::move(graph), std::move(log)};
}

std::vector<ModelKind> parse_models(const std::vector<std::string>& names) {
  std::vector<ModelKind> kinds;
  for (const auto& n : names) {
    auto k = parse_model_kind(n);
    if (!k) throw ConfigError("unknown model \"" + n + "\"");
    if (std::find(kinds.begin(), kinds.end(), *k) == kinds.end()) {
      kinds.push_back(*k);
    }
  }
  return kinds;
}

std::vector<double> parse_double_list(const std::string& s, std::size_t want,
                                      const std::string& flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto piece = s.substr(pos, comma == std::string::npos ? std::string::npos
                                                                : comma - pos);
    double v = 0.0;
    if (!parse_double(piece, v)) {
      throw ConfigError(flag + ": expected comma-separated numbers, got \"" + s + "\"");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.size() != want) {
    throw ConfigError(flag + ": expected " + std::to_string(want) + " values");
  }
  return out;
}

Priors parse_priors(const std::string& prior_q, const std::string& prior_alpha) {
  Priors pr;
  const auto qv = parse_double_list(prior_q, 2, "--prior-q");
  pr.q_a = qv[0];
  pr.q_b = qv[1];
  if (!(pr.q_a > 0) || !(pr.q_b > 0)) {
    throw ConfigError("--prior-q: Beta parameters must be positive");
  }
  if (prior_alpha == "flat") {
    pr.alpha_flat = true;
  } else {
    const auto av = parse_double_list(prior_alpha, 2, "--prior-alpha");
    pr.alpha_mu = av[0];
    pr.alpha_sigma = av[1];
    if (!(pr.alpha_sigma > 0)) {
      throw ConfigError("--prior-alpha: sigma must be positive");
    }
  }
  return pr;
}

FittedModel fit_kind(ModelKind kind, const ExampleSet& train, const Priors& priors,
                     Diagnostics& diag) {
  switch (kind) {
    case ModelKind::Decay:
      return fit_decay_map(train, priors, OptimizerConfig{}, diag);
    case ModelKind::MLE:
      return fit_mle(train);
    case ModelKind::EM:
      return fit_em(train, kEmTol, kEmMaxIter, diag);
    case ModelKind::StaticBernoulli:
      return fit_static_bernoulli(train);
    case ModelKind::StaticPCBernoulli:
      return fit_static_pc_bernoulli(train);
  }
  throw ConfigError("unhandled model kind");
}

nlohmann::json priors_config(const Priors& pr) {
  return {{"q_a", pr.q_a},
          {"q_b", pr.q_b},
          {"alpha_mu", pr.alpha_mu},
          {"alpha_sigma", pr.alpha_sigma},
          {"alpha_flat", pr.alpha_flat}};
}

struct IngestOpts {
  std::string follows;
  std::string events;
  std::string out;
};

int run_ingest(const IngestOpts& o) {
  const nlohmann::json config{
      {"subcommand", "ingest"}, {"follows", o.follows}, {"events", o.events}};
  const std::string meta = run_line(config);
  const auto out_dir = prepare_out_dir(o.out);

  Diagnostics diag;
  auto [graph, log] = load_corpus(o.follows, o.events, diag);

  std::vector<UserId> users;
  for (const auto& e : graph.edges()) {
    users.push_back(e.followee);
    users.push_back(e.follower);
  }
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());

  std::size_t posts = 0;
  for (const auto& ev : log.events) {
    if (ev.kind == EventKind::post) ++posts;
  }

  nlohmann::json summary{
      {"config_hash", hex64(fnv1a64(config.dump()))},
      {"tool", kToolName},
      {"version", kToolVersion},
      {"input", {{"follows", o.follows}, {"events", o.events}}},
      {"counts",
       {{"users", users.size()},
        {"follow_edges", graph.edge_count()},
        {"events", log.events.size()},
        {"posts", posts},
        {"retweets", log.events.size() - posts}}},
      {"diagnostics", nlohmann::json::object()}};
  for (const auto& [code, count] : diag.counts()) {
    summary["diagnostics"][code] = count;
  }
  write_artifact(out_dir / "ingest.json", meta,
                 [&](std::ostream& out) { out << summary.dump(2) << '\n'; });
  return finish(out_dir, meta, diag);
}

struct ExtractOpts {
  std::string follows;
  std::string events;
  std::string out;
  double time_unit = 3600.0;
  std::int64_t window = 0;
  std::uint64_t min_examples = 0;
};

int run_extract(const ExtractOpts& o) {
  const nlohmann::json config{{"subcommand", "extract"},
                              {"follows", o.follows},
                              {"events", o.events},
                              {"time_unit", o.time_unit},
                              {"window", o.window},
                              {"min_examples", o.min_examples}};
  const std::string meta = run_line(config);
  const auto out_dir = prepare_out_dir(o.out);

  Diagnostics diag;
  auto [graph, log] = load_corpus(o.follows, o.events, diag);
  CorpusConfig cc;
  cc.seconds_per_unit = o.time_unit;
  cc.attribution_window_seconds = o.window;
  cc.min_examples_per_edge = o.min_examples;
  ExampleSet set = extract_examples(graph, log, cc);
  set = compute_latencies(std::move(set), cc.seconds_per_unit);

  write_versioned_artifact(out_dir / "examples.tsv", meta,
                           [&](std::ostream& out) { save_examples(set, out); });
  return finish(out_dir, meta, diag);
}

struct AnalyzeOpts {
  std::string input;
  std::string out;
  double bins_base = std::pow(10.0, 0.1);
  std::uint64_t min_count = 10;
};

int run_analyze(const AnalyzeOpts& o) {
  const nlohmann::json config{{"subcommand", "analyze"},
                              {"input", o.input},
                              {"bins_base", o.bins_base},
                              {"min_count", o.min_count}};
  const std::string meta = run_line(config);
  const auto out_dir = prepare_out_dir(o.out);

  Diagnostics diag;
  const ExampleSet set = load_examples_file(o.input);
  LogBinning bins;
  bins.base = o.bins_base;
  bins.min_count = o.min_count;

  const auto hist = latency_histogram(set, bins, LabelFilter::positives_only);
  const auto ratio = propagation_ratio_curve(set, bins);

  write_artifact(out_dir / "latency_histogram.csv", meta, [&](std::ostream& out) {
    out << "center,density,count\n";
    for (const auto& b : hist) {
      out << format_short(b.center) << ',' << format_short(b.density) << ','
          << b.count << '\n';
    }
  });
  write_artifact(out_dir / "propagation_ratio.csv", meta, [&](std::ostream& out) {
    out << "center,ratio,n\n";
    for (const auto& p : ratio) {
      out << format_short(p.center) << ',' << format_short(p.ratio) << ','
          << p.n << '\n';
    }
  });

  std::vector<std::pair<std::string, ScalingFit>> fits;
  const auto try_fit = [&](const std::string& name,
                           const std::vector<std::pair<double, double>>& pts) {
    try {
      fits.emplace_back(name, fit_power_law(pts, diag));
    } catch (const DataError& e) {
      diag.report(Severity::warning, "fit_skipped", name + ": " + e.what());
    }
  };
  try_fit("propagation_ratio", curve_points(ratio));
  try_fit("latency_histogram", curve_points(hist, bins.min_count));

  write_artifact(out_dir / "scaling_fit.csv", meta, [&](std::ostream& out) {
    out << "curve,slope,intercept,r_squared,n_points\n";
    for (const auto& [name, fit] : fits) {
      out << name << ',' << format_short(fit.slope) << ','
          << format_short(fit.intercept) << ',' << format_short(fit.r_squared)
          << ',' << fit.n_points << '\n';
    }
  });
  return finish(out_dir, meta, diag);
}

struct FitOpts {
  std::string input;
  std::string out;
  std::vector<std::string> models{"Decay", "MLE", "EM", "StaticBernoulli",
                                  "StaticPCBernoulli"};
  std::string prior_q = "1.1,10";
  std::string prior_alpha = "-0.3424903089467762,0.7";
};

int run_fit(const FitOpts& o) {
  const auto kinds = parse_models(o.models);
  const Priors priors = parse_priors(o.prior_q, o.prior_alpha);
  const nlohmann::json config{{"subcommand", "fit"},
                              {"input", o.input},
                              {"models", o.models},
                              {"priors", priors_config(priors)}};
  const std::string meta = run_line(config);
  const auto out_dir = prepare_out_dir(o.out);

  Diagnostics diag;
  const ExampleSet set = load_examples_file(o.input);
  for (const auto kind : kinds) {
    const FittedModel model = fit_kind(kind, set, priors, diag);
    const std::string name =
        "model_" + std::string(model_kind_name(kind)) + ".csv";
    write_versioned_artifact(out_dir / name, meta, [&](std::ostream& out) {
      save_model(model, out);
    });
  }
  return finish(out_dir, meta, diag);
}

struct EvaluateOpts {
  std::string input;
  std::string out;
  std::vector<std::string> models{"Decay", "MLE", "EM", "StaticBernoulli",
                                  "StaticPCBernoulli"};
  std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::string prior_q = "1.1,10";
  std::string prior_alpha = "-0.3424903089467762,0.7";
};

int run_evaluate(const EvaluateOpts& o) {
  const auto kinds = parse_models(o.models);
  const Priors priors = parse_priors(o.prior_q, o.prior_alpha);
  const nlohmann::json config{{"subcommand", "evaluate"},
                              {"input", o.input},
                              {"models", o.models},
                              {"ratios", o.ratios},
                              {"priors", priors_config(priors)}};
  const std::string meta = run_line(config);
  const auto out_dir = prepare_out_dir(o.out);

  Diagnostics diag;
  const ExampleSet set = load_examples_file(o.input);

  std::ostringstream auc_rows, perplexity_rows, roc_rows;
  for (const double ratio : o.ratios) {
    ExampleSet train, test;
    try {
      std::tie(train, test) = next_one_split(set, ratio);
    } catch (const EmptyResultError& e) {
      diag.report(Severity::warning, "empty_test_split",
                  "ratio " + format_short(ratio) + ": " + e.what());
      continue;
    }
    for (const auto kind : kinds) {
      const FittedModel model = fit_kind(kind, train, priors, diag);
      const auto records = predict_records(model, test);
      const auto name = model_kind_name(kind);
      auc_rows << format_short(ratio) << ',' << name << ','
               << format_short(roc_auc(records).auc) << '\n';
      perplexity_rows << format_short(ratio) << ',' << name << ','
                      << format_short(perplexity(records)) << '\n';
      for (const auto& [fpr, tpr] : roc_auc(records).curve) {
        roc_rows << format_short(ratio) << ',' << name << ','
                 << format_short(fpr) << ',' << format_short(tpr) << '\n';
      }
    }
  }

  write_artifact(out_dir / "auc.csv", meta, [&](std::ostream& out) {
    out << "ratio,model,auc\n" << auc_rows.str();
  });
  write_artifact(out_dir / "perplexity.csv", meta, [&](std::ostream& out) {
    out << "ratio,model,perplexity\n" << perplexity_rows.str();
  });
  write_artifact(out_dir / "roc.csv", meta, [&](std::ostream& out) {
    out << "ratio,model,fpr,tpr\n" << roc_rows.str();
  });
  return finish(out_dir, meta, diag);
}

struct ImOpts {
  std::string input;
  std::string out;
  std::vector<std::string> models{"Decay", "MLE", "EM", "StaticBernoulli",
                                  "StaticPCBernoulli"};
  std::uint64_t k = 0;
  std::uint64_t mc_runs = 10000;
  std::uint64_t seed = 0;
  std::string prior_q = "1.1,10";
  std::string prior_alpha = "-0.3424903089467762,0.7";
};

int run_im(const ImOpts& o) {
  const auto kinds = parse_models(o.models);
  const Priors priors = parse_priors(o.prior_q, o.prior_alpha);
  const nlohmann::json config{{"subcommand", "im"},
                              {"input", o.input},
                              {"models", o.models},
                              {"k", o.k},
                              {"mc_runs", o.mc_runs},
                              {"seed", o.seed},
                              {"priors", priors_config(priors)}};
  const std::string meta = run_line(config);
  const auto out_dir = prepare_out_dir(o.out);

  Diagnostics diag;
  const ExampleSet set = load_examples_file(o.input);
  const auto phases = chronological_phase_split(set);

  std::ostringstream seed_rows, spread_rows;
  for (std::size_t phase = 0; phase < phases.size(); ++phase) {
    const auto& ph = phases[phase];
    const PropagationNetwork net =
        build_propagation_network(set, ph.eval_start, ph.eval_end);
    const std::uint64_t sampler_seed = derive_stream_seed(o.seed, phase);
    for (const auto kind : kinds) {
      const FittedModel model = fit_kind(kind, ph.train, priors, diag);
      const WeightedDiGraph graph = build_im_graph(model, ph.train, ph.eval_start);
      const McSpreadSampler sampler(graph, o.mc_runs, sampler_seed);
      const SeedSet seeds = celfpp_select(
          graph, o.k,
          [&](std::span<const UserId> s) { return sampler.spread(s); }, diag);

      const auto name = model_kind_name(kind);
      const auto nodes = seeds.nodes();
      for (std::size_t rank = 0; rank < seeds.picks.size(); ++rank) {
        seed_rows << phase << ',' << name << ',' << rank + 1 << ','
                  << seeds.picks[rank].node << ','
                  << format_short(seeds.picks[rank].marginal_gain) << '\n';
      }
      spread_rows << phase << ',' << name << ',' << o.k << ',' << nodes.size()
                  << ',' << format_short(sampler.spread(nodes)) << ','
                  << pseudo_actual_spread(net, nodes) << ',' << ph.eval_start
                  << ',' << ph.eval_end << '\n';
    }
  }

  write_artifact(out_dir / "seeds.csv", meta, [&](std::ostream& out) {
    out << "phase,model,rank,node,marginal_gain\n" << seed_rows.str();
  });
  write_artifact(out_dir / "spread.csv", meta, [&](std::ostream& out) {
    out << "phase,model,k,n_selected,expected_spread,pseudo_actual_spread,"
           "eval_start,eval_end\n"
        << spread_rows.str();
  });
  return finish(out_dir, meta, diag);
}

struct SynthOpts {
  std::string out;
  std::uint64_t seed = 0;
  std::uint64_t users = 100;
  std::uint64_t edges = 300;
  std::string q_range = "0.2,0.8";
  std::string alpha_range = "0.3,1.2";
  std::string process = "heavy_tailed";
  double mean_gap = 6 * 3600.0;
  double gap_exponent = 1.5;
  double min_gap = 60.0;
  std::int64_t horizon = 220ll * 86400;
  double time_unit = 3600.0;
};

int run_synth(const SynthOpts& o) {
  SynthConfig sc;
  sc.n_users = o.users;
  sc.n_edges = o.edges;
  const auto qr = parse_double_list(o.q_range, 2, "--q-range");
  sc.q_min = qr[0];
  sc.q_max = qr[1];
  const auto ar = parse_double_list(o.alpha_range, 2, "--alpha-range");
  sc.alpha_min = ar[0];
  sc.alpha_max = ar[1];
  sc.process = o.process == "poisson" ? ExposureProcess::poisson
                                      : ExposureProcess::heavy_tailed;
  sc.mean_gap_seconds = o.mean_gap;
  sc.gap_exponent = o.gap_exponent;
  sc.min_gap_seconds = o.min_gap;
  sc.horizon_seconds = o.horizon;
  sc.seconds_per_unit = o.time_unit;
  sc.seed = o.seed;

  const nlohmann::json config{{"subcommand", "synth"},
                              {"seed", o.seed},
                              {"users", o.users},
                              {"edges", o.edges},
                              {"q_range", o.q_range},
                              {"alpha_range", o.alpha_range},
                              {"process", o.process},
                              {"mean_gap", o.mean_gap},
                              {"gap_exponent", o.gap_exponent},
                              {"min_gap", o.min_gap},
                              {"horizon", o.horizon},
                              {"time_unit", o.time_unit}};
  const std::string meta = run_line(config);
  const auto out_dir = prepare_out_dir(o.out);

  const FollowGraph graph = generate_graph(sc);
  const GroundTruth truth = draw_ground_truth(graph, sc);
  const ExampleSet set = generate_examples(graph, truth, sc);

  write_artifact(out_dir / "follows.tsv", meta,
                 [&](std::ostream& out) { write_follows_tsv(graph, out); });
  write_artifact(out_dir / "events.tsv", meta,
                 [&](std::ostream& out) { write_events_tsv(set, out); });
  write_artifact(out_dir / "truth.csv", meta, [&](std::ostream& out) {
    write_ground_truth_csv(truth, out);
  });
  write_versioned_artifact(out_dir / "examples.tsv", meta,
                           [&](std::ostream& out) { save_examples(set, out); });
  Diagnostics diag;
  return finish(out_dir, meta, diag);
}

struct ReportOpts {
  std::string input;
  std::string out;
};

struct MetricTable {
  // model -> value, copied verbatim from the source artifact
  std::vector<std::pair<std::string, std::string>> values;
  const std::string* find(const std::string& model) const {
    for (const auto& [m, v] : values) {
      if (m == model) return &v;
    }
    return nullptr;
  }
};

// Rows of a CSV artifact, '#' comments and header skipped.
std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  auto in = open_input(path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const auto comma = line.find(',', pos);
      fields.push_back(line.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

// Keeps rows whose first field matches the numerically largest first field
// (the highest training ratio, the final phase).
std::vector<std::vector<std::string>> last_group(
    std::vector<std::vector<std::string>> rows) {
  std::string best;
  double best_v = 0.0;
  bool have = false;
  for (const auto& r : rows) {
    double v = 0.0;
    if (r.empty() || !parse_double(r[0], v)) continue;
    if (!have || v > best_v) {
      have = true;
      best_v = v;
      best = r[0];
    }
  }
  std::vector<std::vector<std::string>> out;
  for (auto& r : rows) {
    if (!r.empty() && r[0] == best) out.push_back(std::move(r));
  }
  return out;
}

int run_report(const ReportOpts& o) {
  const nlohmann::json config{{"subcommand", "report"}, {"input", o.input}};
  const std::string meta = run_line(config);
  const auto out_dir = prepare_out_dir(o.out);

  std::vector<std::string> missing;
  std::vector<std::string> model_order;
  const auto note_model = [&](const std::string& m) {
    if (std::find(model_order.begin(), model_order.end(), m) ==
        model_order.end()) {
      model_order.push_back(m);
    }
  };

  const auto load_metric = [&](const std::string& file, std::size_t model_col,
                               std::size_t value_col) -> MetricTable {
    const fs::path path = fs::path(o.input) / file;
    MetricTable table;
    if (!fs::exists(path)) {
      missing.push_back(file);
      return table;
    }
    for (auto& row : last_group(read_csv_rows(path))) {
      if (row.size() <= std::max(model_col, value_col)) continue;
      note_model(row[model_col]);
      table.values.emplace_back(row[model_col], row[value_col]);
    }
    return table;
  };

  const MetricTable auc = load_metric("auc.csv", 1, 2);
  const MetricTable perplexity = load_metric("perplexity.csv", 1, 2);
  const MetricTable spread = load_metric("spread.csv", 1, 5);

  write_artifact(out_dir / "report.csv", meta, [&](std::ostream& out) {
    out << "model,auc,perplexity,spread\n";
    for (const auto& model : model_order) {
      const auto* a = auc.find(model);
      const auto* p = perplexity.find(model);
      const auto* s = spread.find(model);
      out << model << ',' << (a ? *a : "") << ',' << (p ? *p : "") << ','
          << (s ? *s : "") << '\n';
    }
  });
  write_artifact(out_dir / "report.txt", meta, [&](std::ostream& out) {
    out << "model               auc          perplexity   spread\n";
    for (const auto& model : model_order) {
      const auto* a = auc.find(model);
      const auto* p = perplexity.find(model);
      const auto* s = spread.find(model);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%-19s %-12s %-12s %s\n", model.c_str(),
                    a ? a->c_str() : "-", p ? p->c_str() : "-",
                    s ? s->c_str() : "-");
      out << buf;
    }
    if (missing.empty()) {
      out << "missing artifacts: none\n";
    } else {
      for (const auto& m : missing) out << "missing artifact: " << m << '\n';
    }
  });
  for (const auto& m : missing) {
    std::cerr << "missing artifact: " << m << '\n';
  }
  return 0;
}

const CLI::Validator kModelName(
    [](std::string& s) -> std::string {
      if (parse_model_kind(s)) return {};
      return "unknown model \"" + s + "\"";
    },
    "MODEL");

const CLI::Validator kOpenUnitInterval(
    [](std::string& s) -> std::string {
      double v = 0.0;
      if (!parse_double(s, v) || !(v > 0.0) || !(v < 1.0)) {
        return "value must lie strictly between 0 and 1";
      }
      return {};
    },
    "RATIO");

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-decaying propagation-probability estimation on retweet logs"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "Read option defaults from a TOML/INI file");
  app.require_subcommand(1);

  IngestOpts ingest_opts;
  auto* ingest = app.add_subcommand(
      "ingest", "Parse follow and event logs, resolve cascades, report counts");
  ingest->add_option("--follows", ingest_opts.follows, "Follow edges TSV")->required();
  ingest->add_option("--events", ingest_opts.events, "Message events TSV")->required();
  ingest->add_option("--out", ingest_opts.out, "Output directory")->required();

  ExtractOpts extract_opts;
  auto* extract = app.add_subcommand(
      "extract", "Build per-edge propagation examples from raw logs");
  extract->add_option("--follows", extract_opts.follows, "Follow edges TSV")->required();
  extract->add_option("--events", extract_opts.events, "Message events TSV")->required();
  extract->add_option("--out", extract_opts.out, "Output directory")->required();
  extract->add_option("--time-unit", extract_opts.time_unit,
                      "Seconds per latency unit")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  extract->add_option("--window", extract_opts.window,
                      "Attribution window in seconds, 0 for none")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  extract->add_option("--min-examples", extract_opts.min_examples,
                      "Drop edges with fewer examples")
      ->capture_default_str();

  AnalyzeOpts analyze_opts;
  auto* analyze = app.add_subcommand(
      "analyze", "Latency histogram, propagation-ratio curve, power-law fits");
  analyze->add_option("--input", analyze_opts.input, "Examples file")->required();
  analyze->add_option("--out", analyze_opts.out, "Output directory")->required();
  analyze->add_option("--bins-base", analyze_opts.bins_base,
                      "Logarithmic bin base")
      ->check(CLI::Range(1.0 + 1e-9, 1e9))
      ->capture_default_str();
  analyze->add_option("--min-count", analyze_opts.min_count,
                      "Minimum examples per curve point")
      ->capture_default_str();

  FitOpts fit_opts;
  auto* fit = app.add_subcommand("fit", "Fit propagation models, one dump per model");
  fit->add_option("--input", fit_opts.input, "Examples file")->required();
  fit->add_option("--out", fit_opts.out, "Output directory")->required();
  fit->add_option("--models", fit_opts.models, "Models to fit")
      ->delimiter(',')
      ->check(kModelName)
      ->capture_default_str();
  fit->add_option("--prior-q", fit_opts.prior_q, "Beta prior a,b for q")
      ->capture_default_str();
  fit->add_option("--prior-alpha", fit_opts.prior_alpha,
                  "Log-normal prior mu,sigma for alpha, or \"flat\"")
      ->capture_default_str();

  EvaluateOpts eval_opts;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Perplexity, ROC, and AUC across training ratios");
  evaluate->add_option("--input", eval_opts.input, "Examples file")->required();
  evaluate->add_option("--out", eval_opts.out, "Output directory")->required();
  evaluate->add_option("--models", eval_opts.models, "Models to evaluate")
      ->delimiter(',')
      ->check(kModelName)
      ->capture_default_str();
  evaluate->add_option("--ratio", eval_opts.ratios, "Training ratios to sweep")
      ->delimiter(',')
      ->check(kOpenUnitInterval)
      ->capture_default_str();
  evaluate->add_option("--prior-q", eval_opts.prior_q, "Beta prior a,b for q")
      ->capture_default_str();
  evaluate->add_option("--prior-alpha", eval_opts.prior_alpha,
                       "Log-normal prior mu,sigma for alpha, or \"flat\"")
      ->capture_default_str();

  ImOpts im_opts;
  auto* im = app.add_subcommand(
      "im", "Select seed sets per model and score their pseudo-actual spread");
  im->add_option("--input", im_opts.input, "Examples file")->required();
  im->add_option("--out", im_opts.out, "Output directory")->required();
  im->add_option("--models", im_opts.models, "Models to run")
      ->delimiter(',')
      ->check(kModelName)
      ->capture_default_str();
  im->add_option("--k", im_opts.k, "Seed-set size")
      ->required()
      ->check(CLI::PositiveNumber);
  im->add_option("--mc-runs", im_opts.mc_runs, "Monte-Carlo replicas")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  im->add_option("--seed", im_opts.seed, "RNG seed")->required();
  im->add_option("--prior-q", im_opts.prior_q, "Beta prior a,b for q")
      ->capture_default_str();
  im->add_option("--prior-alpha", im_opts.prior_alpha,
                 "Log-normal prior mu,sigma for alpha, or \"flat\"")
      ->capture_default_str();

  SynthOpts synth_opts;
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic corpus with known edge parameters");
  synth->add_option("--out", synth_opts.out, "Output directory")->required();
  synth->add_option("--seed", synth_opts.seed, "RNG seed")->required();
  synth->add_option("--users", synth_opts.users, "User count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--edges", synth_opts.edges, "Follow-edge count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--q-range", synth_opts.q_range, "Ground-truth q range lo,hi")
      ->capture_default_str();
  synth->add_option("--alpha-range", synth_opts.alpha_range,
                    "Ground-truth alpha range lo,hi")
      ->capture_default_str();
  synth->add_option("--process", synth_opts.process, "Exposure gap process")
      ->check(CLI::IsMember({"poisson", "heavy_tailed"}))
      ->capture_default_str();
  synth->add_option("--mean-gap", synth_opts.mean_gap,
                    "Mean exposure gap in seconds (poisson)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--gap-exponent", synth_opts.gap_exponent,
                    "Heavy-tailed gap exponent, > 1")
      ->capture_default_str();
  synth->add_option("--min-gap", synth_opts.min_gap,
                    "Smallest heavy-tailed gap in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--horizon", synth_opts.horizon, "Simulated seconds per edge")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--time-unit", synth_opts.time_unit, "Seconds per latency unit")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  ReportOpts report_opts;
  auto* report = app.add_subcommand(
      "report", "Consolidate evaluate/im artifacts into one table");
  report->add_option("--input", report_opts.input, "Artifacts directory")->required();
  report->add_option("--out", report_opts.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(ingest)) return run_ingest(ingest_opts);
    if (app.got_subcommand(extract)) return run_extract(extract_opts);
    if (app.got_subcommand(analyze)) return run_analyze(analyze_opts);
    if (app.got_subcommand(fit)) return run_fit(fit_opts);
    if (app.got_subcommand(evaluate)) return run_evaluate(eval_opts);
    if (app.got_subcommand(im)) return run_im(im_opts);
    if (app.got_subcommand(synth)) return run_synth(synth_opts);
    if (app.got_subcommand(report)) return run_report(report_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
