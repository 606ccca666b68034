#pragma once

// Batch commands behind the pacmeta executable. Each takes a validated Config
// plus run options and writes its results atomically.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pacmeta/artifact.hpp"
#include "pacmeta/audit.hpp"
#include "pacmeta/bounds.hpp"
#include "pacmeta/config.hpp"
#include "pacmeta/csv.hpp"
#include "pacmeta/env.hpp"
#include "pacmeta/metalearn.hpp"
#include "pacmeta/parallel.hpp"
#include "pacmeta/prior_mean.hpp"

namespace pacmeta {

inline constexpr int kResultsFormatVersion = 1;

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
};

namespace cli {

inline const std::set<std::string> kRunKeys{"seed", "out", "jobs"};
inline const std::set<std::string> kEnvKeys{"kind",   "d",            "mu_tau", "sigma_tau",   "dim",
                                            "classes", "points",      "center_scale", "noise", "blob_seed",
                                            "num_shuffled"};
inline const std::set<std::string> kModelKeys{"kind", "hidden"};
inline const std::set<std::string> kTrainKeys{"epochs_stage1", "epochs_stage2", "learning_rate", "batch_size",
                                              "delta",         "kappa_pi",      "kappa_rho",     "mc_train",
                                              "optimizer",     "beta1",         "beta2",         "epsilon",
                                              "loss",          "clip",          "adapt_epochs",  "mc_eval"};
inline const std::set<std::string> kPriorMeanKeys{"sigma_prior", "sigma_hyper",       "sigma_rho",       "sigma_pi",
                                                  "inner_steps", "inner_lr",          "inner_mc",        "clip",
                                                  "algorithm_samples", "meta_iterations", "delta", "test_tasks",
                                                  "n_eval"};
inline const std::set<std::string> kEvalKeys{"prior_samples", "mc_bound", "test_tasks", "n_eval"};

inline ConfigSchema schema_for(const std::string& command) {
  if (command == "sweep") {
    return {{"run", kRunKeys},
            {"sweep", {"n", "m", "d", "seeds", "pipeline"}},
            {"env", {"mu_tau", "sigma_tau"}},
            {"prior_mean", kPriorMeanKeys},
            {"train", kTrainKeys},
            {"eval", kEvalKeys}};
  }
  if (command == "train") return {{"run", kRunKeys}, {"env", kEnvKeys}, {"model", kModelKeys}, {"train", kTrainKeys}, {"data", {"n", "m"}}};
  if (command == "adapt") {
    return {{"run", kRunKeys},
            {"env", kEnvKeys},
            {"train", kTrainKeys},
            {"adapt", {"metaposterior", "tasks", "m", "n_eval", "baseline"}}};
  }
  if (command == "audit") {
    return {{"run", kRunKeys},
            {"audit", {"trials", "n", "m", "pipeline"}},
            {"env", kEnvKeys},
            {"model", kModelKeys},
            {"prior_mean", kPriorMeanKeys},
            {"train", kTrainKeys},
            {"eval", kEvalKeys}};
  }
  if (command == "bound") {
    return {{"run", kRunKeys},
            {"bound", {"theorem", "empirical", "kl", "kl_rho_pi", "kl_hyper", "sum_task_kl", "weights", "n", "m", "delta"}}};
  }
  throw ConfigError("unknown command '" + command + "'");
}

/// Hash of everything except the [run] section, which only routes output.
inline std::uint64_t config_hash(const Config& cfg) {
  std::string text;
  std::istringstream in(cfg.canonical());
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("run.", 0) != 0) text += line + "\n";
  }
  return fnv1a(text);
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

struct Resolved {
  std::uint64_t seed = 0;
  std::string out;
  std::size_t jobs = 1;
};

inline Resolved resolve(const Config& cfg, const RunOptions& opt, const std::string& default_out) {
  Resolved r;
  r.seed = opt.seed ? *opt.seed : cfg.get_u64("run", "seed", 0);
  r.out = opt.out ? *opt.out : cfg.get_string("run", "out", default_out);
  r.jobs = opt.jobs ? *opt.jobs : cfg.get_size("run", "jobs", 1);
  if (r.jobs == 0) throw ConfigError("jobs must be >= 1");
  return r;
}

inline void stamp(CsvTable& t, const std::string& command, const Config& cfg, std::uint64_t seed) {
  t.meta("pacmeta-results v" + std::to_string(kResultsFormatVersion) + " command=" + command);
  t.meta("config_hash=" + hex(config_hash(cfg)));
  t.meta("seed=" + std::to_string(seed));
  t.meta("created=" + utc_timestamp());
}

inline std::string fmt(double v) { return format_double(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }

inline LinearEnvSpec linear_env_from(const Config& c, std::size_t d) {
  LinearEnvSpec s;
  s.d = d;
  s.mu_tau.assign(d, c.get_double("env", "mu_tau", 10.0));
  s.sigma_tau = c.get_double("env", "sigma_tau", 3.0);
  s.validate();
  return s;
}

inline EnvSpec env_from(const Config& c) {
  const std::string kind = c.get_string("env", "kind", "linear");
  if (kind == "linear") return linear_env_from(c, c.get_size("env", "d", 2));
  PermutedEnvSpec p;
  if (kind == "permuted_labels") p.mode = PermuteMode::permute_labels;
  else if (kind == "shuffled_features") p.mode = PermuteMode::shuffle_features;
  else throw ConfigError("env.kind must be linear|permuted_labels|shuffled_features, got '" + kind + "'");
  p.base.dim = c.get_size("env", "dim", p.base.dim);
  p.base.classes = c.get_size("env", "classes", p.base.classes);
  p.base.points = c.get_size("env", "points", p.base.points);
  p.base.center_scale = c.get_double("env", "center_scale", p.base.center_scale);
  p.base.noise = c.get_double("env", "noise", p.base.noise);
  p.base.seed = c.get_u64("env", "blob_seed", p.base.seed);
  p.num_shuffled = c.get_size("env", "num_shuffled", p.num_shuffled);
  p.validate();
  return p;
}

inline ModelArchitecture arch_from(const Config& c, const Environment& env) {
  const ModelKind kind = parse_model_kind(c.get_string("model", "kind", env.num_classes() == 2 ? "linear" : "mlp1"));
  const auto arch = kind == ModelKind::linear
                        ? ModelArchitecture::linear(env.input_dim())
                        : ModelArchitecture::mlp1(env.input_dim(), c.get_size("model", "hidden", 16), env.num_classes());
  arch.validate();
  return arch;
}

inline TrainConfig train_config_from(const Config& c) {
  TrainConfig t;
  t.epochs_stage1 = c.get_size("train", "epochs_stage1", t.epochs_stage1);
  t.epochs_stage2 = c.get_size("train", "epochs_stage2", t.epochs_stage2);
  t.learning_rate = c.get_double("train", "learning_rate", t.learning_rate);
  t.batch_size = c.get_size("train", "batch_size", t.batch_size);
  t.delta = c.get_double("train", "delta", t.delta);
  t.kappa_pi = c.get_double("train", "kappa_pi", t.kappa_pi);
  t.kappa_rho = c.get_double("train", "kappa_rho", t.kappa_rho);
  t.mc_train = c.get_size("train", "mc_train", t.mc_train);
  t.optimizer = parse_optimizer_kind(c.get_string("train", "optimizer", to_string(t.optimizer)));
  t.beta1 = c.get_double("train", "beta1", t.beta1);
  t.beta2 = c.get_double("train", "beta2", t.beta2);
  t.epsilon = c.get_double("train", "epsilon", t.epsilon);
  t.loss.kind = parse_loss_kind(c.get_string("train", "loss", to_string(t.loss.kind)));
  t.loss.clip_max = c.get_double("train", "clip", t.loss.clip_max);
  t.adapt_epochs = c.get_size("train", "adapt_epochs", t.adapt_epochs);
  t.mc_eval = c.get_size("train", "mc_eval", t.mc_eval);
  t.validate();
  return t;
}

inline PriorMeanConfig prior_mean_config_from(const Config& c) {
  PriorMeanConfig p;
  p.sigma_prior = c.get_double("prior_mean", "sigma_prior", p.sigma_prior);
  p.sigma_hyper = c.get_double("prior_mean", "sigma_hyper", p.sigma_hyper);
  p.sigma_rho = c.get_double("prior_mean", "sigma_rho", p.sigma_rho);
  p.sigma_pi = c.get_double("prior_mean", "sigma_pi", p.sigma_pi);
  p.inner_steps = c.get_size("prior_mean", "inner_steps", p.inner_steps);
  p.inner_lr = c.get_double("prior_mean", "inner_lr", p.inner_lr);
  p.inner_mc = c.get_size("prior_mean", "inner_mc", p.inner_mc);
  p.loss.clip_max = c.get_double("prior_mean", "clip", p.loss.clip_max);
  p.algorithm_samples = c.get_size("prior_mean", "algorithm_samples", p.algorithm_samples);
  p.meta_iterations = c.get_size("prior_mean", "meta_iterations", p.meta_iterations);
  p.delta = c.get_double("prior_mean", "delta", p.delta);
  p.test_tasks = c.get_size("prior_mean", "test_tasks", p.test_tasks);
  p.n_eval = c.get_size("prior_mean", "n_eval", p.n_eval);
  p.validate();
  return p;
}

inline TwoPriorAuditConfig eval_config_from(const Config& c, const TrainConfig& t, std::size_t hidden) {
  TwoPriorAuditConfig e;
  e.train = t;
  e.hidden_dim = hidden;
  e.prior_samples = c.get_size("eval", "prior_samples", e.prior_samples);
  e.mc_bound = c.get_size("eval", "mc_bound", e.mc_bound);
  e.test_tasks = c.get_size("eval", "test_tasks", e.test_tasks);
  e.n_eval = c.get_size("eval", "n_eval", e.n_eval);
  if (e.prior_samples == 0 || e.mc_bound == 0 || e.test_tasks == 0 || e.n_eval == 0) {
    throw ConfigError("[eval] counts must be >= 1");
  }
  return e;
}

inline std::string pipeline_from(const Config& c, const std::string& section) {
  const std::string p = c.get_string(section, "pipeline", "prior_mean");
  if (p != "prior_mean" && p != "two_prior") throw ConfigError(section + ".pipeline must be prior_mean|two_prior, got '" + p + "'");
  return p;
}

}  // namespace cli

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{
      "n",          "m",           "d",           "seed",         "pipeline",         "empirical_multitask_risk",
      "bound_thm1", "bound_thm2",  "task_level_term", "multitask_term_thm1", "multitask_term_thm2", "kl_rho_pi",
      "mean_task_kl", "mean_kl_hyper", "meta_train_loss", "meta_test_loss", "meta_test_loss_se"};
  return cols;
}

struct SweepPoint {
  std::size_t n, m, d;
  std::uint64_t seed;
};

inline std::uint64_t sweep_point_seed(std::uint64_t root, std::uint64_t seed) {
  return splitmix64(stream_seed(root, "sweep/point") + splitmix64(seed));
}

/// One sweep row. Tasks for (seed, d, m) are drawn from one stream, so a point
/// with more tasks extends the task list of a point with fewer.
inline std::vector<std::string> run_sweep_point(const Config& c, const std::string& pipeline, const SweepPoint& p,
                                                std::uint64_t root) {
  const std::uint64_t eff = sweep_point_seed(root, p.seed);
  const Environment env(cli::linear_env_from(c, p.d));
  Rng task_rng = make_stream(eff, "sweep/tasks/d" + std::to_string(p.d) + "/m" + std::to_string(p.m));
  const auto tasks = sample_tasks(env, p.n, p.m, task_rng);

  MetaBoundInput in;
  BoundTerms t1, t2;
  double task_kl = 0.0, kl_hyper = 0.0, train_loss = 0.0;
  RiskEstimate test;
  if (pipeline == "prior_mean") {
    PriorMeanConfig pm = cli::prior_mean_config_from(c);
    pm.seed = eff;
    const auto r = run_prior_mean(tasks, pm);
    in = r.bound_input;
    t1 = r.thm1;
    t2 = r.thm2;
    task_kl = r.mean_task_kl;
    kl_hyper = r.mean_kl_hyper;
    train_loss = r.meta_train_loss;
    test = prior_mean_test_loss(r.mu_bar, env, p.m, pm);
  } else {
    TrainConfig tc = cli::train_config_from(c);
    tc.seed = eff;
    const auto ev = cli::eval_config_from(c, tc, 0);
    const auto arch = ModelArchitecture::linear(p.d);
    const auto trained = train_meta(tasks, arch, tc);
    Rng bound_rng = make_stream(eff, "sweep/bound");
    in = meta_bound_input(trained.rho, trained.posteriors, tasks, arch, tc, LossSpec{LossKind::zero_one, 1.0},
                          ev.prior_samples, ev.mc_bound, bound_rng);
    t1 = theorem1_terms(in);
    t2 = theorem2_terms(in);
    task_kl = in.expectation([](const AlgorithmComplexity& a) { return a.sum_task_kl; }) / double(p.n);
    for (std::size_t i = 0; i < p.n; ++i) {
      train_loss += mc_empirical_risk({arch, trained.posteriors[i]}, tasks[i].train, tc.loss, tc.mc_eval, bound_rng);
    }
    train_loss /= double(p.n);
    test = meta_test_loss(trained.rho, env, p.m, arch, tc, ev.test_tasks, ev.n_eval, eff);
  }
  using cli::fmt;
  return {fmt(p.n),           fmt(p.m),           fmt(p.d),           std::to_string(p.seed),
          pipeline,           fmt(in.empirical_multitask_risk), fmt(t1.total), fmt(t2.total),
          fmt(t1.task_level), fmt(t1.multitask),  fmt(t2.multitask),  fmt(in.kl_rho_pi),
          fmt(task_kl),       fmt(kl_hyper),      fmt(train_loss),    fmt(test.mean),
          fmt(test.standard_error)};
}

inline CsvTable cmd_sweep(const Config& c, const RunOptions& opt) {
  c.validate(cli::schema_for("sweep"));
  const auto run = cli::resolve(c, opt, "sweep.csv");
  const auto ns = c.get_size_list("sweep", "n", {2, 5, 10, 20, 50});
  const auto ms = c.get_size_list("sweep", "m", {5});
  const auto ds = c.get_size_list("sweep", "d", {2});
  const auto seeds = c.get_size_list("sweep", "seeds", {0});
  for (auto v : ns) if (v == 0) throw ConfigError("sweep.n entries must be >= 1");
  for (auto v : ms) if (v == 0) throw ConfigError("sweep.m entries must be >= 1");
  for (auto v : ds) if (v == 0) throw ConfigError("sweep.d entries must be >= 1");
  const std::string pipeline = cli::pipeline_from(c, "sweep");
  // Parse every section up front so a bad value fails before any work.
  if (pipeline == "prior_mean") cli::prior_mean_config_from(c);
  else cli::eval_config_from(c, cli::train_config_from(c), 0);
  cli::linear_env_from(c, ds.front());

  std::vector<SweepPoint> points;
  for (auto s : seeds)
    for (auto d : ds)
      for (auto m : ms)
        for (auto n : ns) points.push_back({n, m, d, s});

  std::vector<std::vector<std::string>> rows(points.size());
  std::vector<double> seconds(points.size());
  parallel_for(points.size(), run.jobs, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    rows[i] = run_sweep_point(c, pipeline, points[i], run.seed);
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  CsvTable table(sweep_columns());
  cli::stamp(table, "sweep", c, run.seed);
  for (auto& r : rows) table.add_row(std::move(r));
  std::string times = "wall_time_seconds=";
  for (std::size_t i = 0; i < seconds.size(); ++i) times += (i ? ";" : "") + cli::fmt(seconds[i]);
  table.trailer(times);
  table.write_atomic(run.out);
  return table;
}

struct TrainOutput {
  MetaPosteriorArtifact artifact;
  CsvTable trace{{"epoch", "stage", "objective"}};
};

inline TrainOutput cmd_train(const Config& c, const RunOptions& opt) {
  c.validate(cli::schema_for("train"));
  const auto run = cli::resolve(c, opt, "metaposterior.txt");
  const Environment env(cli::env_from(c));
  const auto arch = cli::arch_from(c, env);
  TrainConfig tc = cli::train_config_from(c);
  tc.seed = stream_seed(run.seed, "train/meta");
  const std::size_t n = c.get_size("data", "n", 10), m = c.get_size("data", "m", 64);
  if (n == 0 || m == 0) throw ConfigError("data.n and data.m must be >= 1");

  Rng task_rng = make_stream(run.seed, "train/tasks");
  const auto tasks = sample_tasks(env, n, m, task_rng);
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train_meta(tasks, arch, tc);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  TrainOutput out{{result.rho, MetaPrior{tc.kappa_pi}, arch}};
  cli::stamp(out.trace, "train", c, run.seed);
  for (std::size_t e = 0; e < result.trace.size(); ++e) {
    out.trace.add_row({cli::fmt(e), e < tc.epochs_stage1 ? "1" : "2", cli::fmt(result.trace[e])});
  }
  out.trace.trailer("wall_time_seconds=" + cli::fmt(seconds));
  save_artifact(run.out, out.artifact);
  out.trace.write_atomic(run.out + ".trace.csv");
  return out;
}

inline CsvTable cmd_adapt(const Config& c, const RunOptions& opt) {
  c.validate(cli::schema_for("adapt"));
  const auto run = cli::resolve(c, opt, "adapt.csv");
  const auto artifact = load_artifact(c.require_string("adapt", "metaposterior"));
  const Environment env(cli::env_from(c));
  if (env.input_dim() != artifact.arch.input_dim || env.num_classes() != artifact.arch.num_classes) {
    throw ConfigError("environment does not match the meta-posterior's model");
  }
  TrainConfig tc = cli::train_config_from(c);
  const std::size_t tasks = c.get_size("adapt", "tasks", 20), m = c.get_size("adapt", "m", 32);
  const std::size_t n_eval = c.get_size("adapt", "n_eval", 2000);
  const bool baseline = c.get_bool("adapt", "baseline", false);
  if (tasks == 0 || m == 0 || n_eval == 0) throw ConfigError("adapt.tasks, adapt.m and adapt.n_eval must be >= 1");

  std::vector<std::string> cols{"task", "m", "empirical_risk", "kl", "bound", "test_error"};
  if (baseline) {
    cols.insert(cols.end(), {"baseline_bound", "baseline_test_error"});
  }
  CsvTable table(cols);
  cli::stamp(table, "adapt", c, run.seed);
  const LossSpec zero_one{LossKind::zero_one, 1.0};
  std::vector<std::vector<std::string>> rows(tasks);
  std::vector<double> errors(tasks), bounds(tasks), base_errors(tasks);
  parallel_for(tasks, run.jobs, [&](std::size_t j) {
    Rng rng = make_stream(run.seed, "adapt/task", j);
    const Task task = env.sample_task(m, rng);
    Rng arng = make_stream(run.seed, "adapt/run", j);
    const auto a = adapt(artifact.rho, task, artifact.arch, tc, tc.adapt_epochs, arng);
    errors[j] = true_risk_mc(task, a.model, zero_one, n_eval, arng).mean;
    bounds[j] = a.bound;
    rows[j] = {cli::fmt(j), cli::fmt(m), cli::fmt(a.empirical_risk), cli::fmt(a.kl), cli::fmt(a.bound), cli::fmt(errors[j])};
    if (baseline) {
      Rng brng = make_stream(run.seed, "adapt/baseline", j);
      const auto b = independent_baseline(task, artifact.arch, tc, tc.adapt_epochs, brng);
      base_errors[j] = true_risk_mc(task, b.model, zero_one, n_eval, brng).mean;
      rows[j].push_back(cli::fmt(b.bound));
      rows[j].push_back(cli::fmt(base_errors[j]));
    }
  });
  for (auto& r : rows) table.add_row(std::move(r));
  auto summary = [](const std::vector<double>& v, const std::string& name) {
    double mean = 0.0, var = 0.0;
    for (double x : v) mean += x / double(v.size());
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / double(v.size() - 1)) : 0.0;
    return "mean_" + name + "=" + cli::fmt(mean) + " std_" + name + "=" + cli::fmt(sd);
  };
  std::string line = "summary " + summary(errors, "test_error") + " " + summary(bounds, "bound");
  if (baseline) line += " " + summary(base_errors, "baseline_test_error");
  table.trailer(line);
  table.write_atomic(run.out);
  return table;
}

inline CsvTable cmd_audit(const Config& c, const RunOptions& opt) {
  c.validate(cli::schema_for("audit"));
  const auto run = cli::resolve(c, opt, "audit.csv");
  const std::size_t trials = c.get_size("audit", "trials", 200);
  const std::size_t n = c.get_size("audit", "n", 5), m = c.get_size("audit", "m", 5);
  if (trials == 0 || n == 0 || m == 0) throw ConfigError("audit.trials, audit.n and audit.m must be >= 1");
  const std::string pipeline = cli::pipeline_from(c, "audit");

  AuditReport report;
  if (pipeline == "prior_mean") {
    const EnvSpec spec = cli::env_from(c);
    const auto* lin = std::get_if<LinearEnvSpec>(&spec);
    if (!lin) throw ConfigError("the prior_mean pipeline needs env.kind = linear");
    report = audit_bound_validity(*lin, n, m, cli::prior_mean_config_from(c), trials, run.seed, run.jobs);
  } else {
    const EnvSpec spec = cli::env_from(c);
    const Environment env(spec);
    const auto arch = cli::arch_from(c, env);
    const auto ev = cli::eval_config_from(c, cli::train_config_from(c), arch.hidden_dim);
    report = audit_bound_validity(spec, n, m, ev, trials, run.seed, run.jobs);
  }

  CsvTable table({"trial_index", "seed", "bound", "true_risk_est", "true_risk_se", "margin", "violated"});
  cli::stamp(table, "audit", c, run.seed);
  for (const auto& r : report.records) {
    table.add_row({cli::fmt(r.trial_index), std::to_string(r.seed), cli::fmt(r.bound), cli::fmt(r.true_risk_est),
                   cli::fmt(r.true_risk_se), cli::fmt(r.margin), r.violated ? "1" : "0"});
  }
  table.trailer("summary trials=" + cli::fmt(report.trials) + " violations=" + cli::fmt(report.violations) +
                " rate=" + cli::fmt(report.violation_rate()) + " delta=" + cli::fmt(report.delta) +
                " binomial_tail=" + cli::fmt(binomial_upper_tail(report.violations, report.trials, report.delta)));
  table.write_atomic(run.out);
  return table;
}

struct BoundEvaluation {
  std::string theorem;
  double bound = 0.0;
  BoundTerms terms;
};

/// Calculator mode: evaluates one bound from explicitly supplied terms.
inline BoundEvaluation evaluate_bound(const Config& c) {
  c.validate(cli::schema_for("bound"));
  BoundEvaluation out;
  out.theorem = c.get_string("bound", "theorem", "1");
  const double emp = c.get_double("bound", "empirical", 0.0);
  const std::size_t n = c.get_size("bound", "n", 10), m = c.get_size("bound", "m", 5);
  const double delta = c.get_double("bound", "delta", 0.1);
  if (out.theorem == "maurer" || out.theorem == "adaptation") {
    const double kl = c.get_double("bound", "kl", 0.0);
    out.bound = out.theorem == "maurer" ? maurer_bound({emp, kl, m, delta}) : adaptation_bound(emp, kl, m, delta);
    out.terms = {emp, 0.0, out.bound - emp, out.bound};
    return out;
  }
  if (out.theorem != "1" && out.theorem != "2") {
    throw ConfigError("bound.theorem must be 1|2|maurer|adaptation, got '" + out.theorem + "'");
  }
  MetaBoundInput in;
  in.empirical_multitask_risk = emp;
  in.kl_rho_pi = c.get_double("bound", "kl_rho_pi", 0.0);
  in.n = n;
  in.m = m;
  in.delta = delta;
  const auto hyper = c.get_double_list("bound", "kl_hyper", {0.0});
  const auto task = c.get_double_list("bound", "sum_task_kl", {0.0});
  const std::size_t k = std::max(hyper.size(), task.size());
  if ((hyper.size() != 1 && hyper.size() != k) || (task.size() != 1 && task.size() != k)) {
    throw ConfigError("bound.kl_hyper and bound.sum_task_kl must have equal lengths (or length 1)");
  }
  const auto weights = c.get_double_list("bound", "weights", std::vector<double>(k, 1.0));
  if (weights.size() != k) throw ConfigError("bound.weights must have one entry per algorithm");
  for (std::size_t a = 0; a < k; ++a) {
    in.per_algorithm.push_back({hyper.size() == 1 ? hyper[0] : hyper[a], task.size() == 1 ? task[0] : task[a], weights[a]});
  }
  out.terms = out.theorem == "1" ? theorem1_terms(in) : theorem2_terms(in);
  out.bound = out.terms.total;
  return out;
}

inline BoundEvaluation cmd_bound(const Config& c, const RunOptions& opt, std::ostream& os) {
  const auto run = cli::resolve(c, opt, "");
  const auto ev = evaluate_bound(c);
  os << "bound=" << cli::fmt(ev.bound) << "\n"
     << "empirical=" << cli::fmt(ev.terms.empirical) << "\n"
     << "task_level=" << cli::fmt(ev.terms.task_level) << "\n"
     << "multitask=" << cli::fmt(ev.terms.multitask) << "\n";
  if (!run.out.empty()) {
    CsvTable table({"theorem", "bound", "empirical", "task_level", "multitask"});
    cli::stamp(table, "bound", c, run.seed);
    table.add_row({ev.theorem, cli::fmt(ev.bound), cli::fmt(ev.terms.empirical), cli::fmt(ev.terms.task_level),
                   cli::fmt(ev.terms.multitask)});
    table.write_atomic(run.out);
  }
  return ev;
}

}  // namespace pacmeta
