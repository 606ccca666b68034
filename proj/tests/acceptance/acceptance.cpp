// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pacmeta/pacmeta.hpp"

using namespace pacmeta;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double limit_seconds, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_seconds > 0.0 && secs >= limit_seconds) {
    v.pass = false;
    v.detail += "; over time limit of " + format_double(limit_seconds) + " s";
  }
  if (!v.pass) ++failures;
  std::printf("criterion %d: %s  %s  [%s] (%.1f s)\n", id, v.pass ? "PASS" : "FAIL", title, v.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------------------

Verdict kl_decomposition() {
  Rng rng = make_stream(1, "acceptance/decomposition");
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    const std::size_t priors = 1 + rng() % 3, models = 1 + rng() % 4, tasks = 1 + rng() % 3;
    const auto sys = random_discrete_system(rng, 2, priors, models, tasks);
    worst = std::max(worst, kl_decomposition_check(sys).max_abs_diff);
  }
  return {worst <= 1e-12, "max_abs_diff=" + num(worst) + " over 100 systems"};
}

Verdict closed_forms() {
  Rng rng = make_stream(2, "acceptance/closed-forms");
  double worst_quad = 0.0;
  for (int k = 0; k < 200; ++k) {
    const DiagonalGaussian q({uniform(rng, -3.0, 3.0)}, {uniform(rng, -3.0, 2.0)});
    const DiagonalGaussian p({uniform(rng, -3.0, 3.0)}, {uniform(rng, -3.0, 2.0)});
    worst_quad = std::max(worst_quad, std::abs(kl_divergence(q, p) - quadrature_kl_1d(q, p, 20000)));
  }
  double worst_rel = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t d = 1 + rng() % 3;
    std::vector<double> qm(d), qv(d), hm(d), hv(d);
    for (std::size_t i = 0; i < d; ++i) {
      qm[i] = uniform(rng, -3.0, 3.0);
      qv[i] = uniform(rng, -2.0, 1.0);
      hm[i] = uniform(rng, -3.0, 3.0);
      hv[i] = uniform(rng, -3.0, 1.0);
    }
    const DiagonalGaussian q(qm, qv), hyper(hm, hv);
    const double prior_var = uniform(rng, 0.5, 4.0);
    double mc = 0.0;
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) {
      const auto mu = sample(hyper, rng);
      mc += kl_divergence(q, DiagonalGaussian(mu, std::vector<double>(d, std::log(prior_var)))) / draws;
    }
    const double exact = expected_kl_under_gaussian_mean(q, hyper, prior_var);
    worst_rel = std::max(worst_rel, std::abs(exact - mc) / mc);
  }
  return {worst_quad <= 1e-6 && worst_rel <= 0.02,
          "quadrature max_abs=" + num(worst_quad) + ", expected-KL max_rel=" + num(worst_rel)};
}

Verdict gradients() {
  Rng rng = make_stream(3, "acceptance/gradients");
  const auto arch = ModelArchitecture::mlp1(3, 4, 3);
  const std::size_t D = arch.parameter_count();
  const LossSpec loss{LossKind::cross_entropy_clipped, 4.0};
  auto batch_of = [&](std::size_t size) {
    Dataset b{3, {}, {}};
    for (std::size_t i = 0; i < size; ++i) b.push_back(standard_normal_vector(rng, 3), int(i % 3));
    return b;
  };
  auto posterior_point = [&](std::size_t copies) {
    std::vector<double> p;
    for (std::size_t c = 0; c < copies; ++c) {
      const auto mean = standard_normal_vector(rng, D);
      p.insert(p.end(), mean.begin(), mean.end());
      for (std::size_t i = 0; i < D; ++i) p.push_back(uniform(rng, -3.0, 0.0));
    }
    return p;
  };
  double worst[3] = {0.0, 0.0, 0.0};
  for (int k = 0; k < 10; ++k) {
    const Dataset batch = batch_of(10);
    const auto eps = standard_normal_vector(rng, D);
    const auto pm = standard_normal_vector(rng, D), plv = standard_normal_vector(rng, D);
    auto per_task = [&](bool adaptation) {
      return [&, adaptation](Tape& t, Var x) {
        const Var mean = slice(x, 0, {D}), log_var = slice(x, D, {D});
        const Var risk = mc_empirical_risk(mean, log_var, arch, batch, loss, {eps});
        const Var kl = kl_divergence(mean, log_var, t.constant(Tensor::vector(pm)), t.constant(Tensor::vector(plv)));
        return adaptation ? objective::adaptation(risk, kl, 10, 0.1) : objective::maurer(risk, kl, 10, 0.1);
      };
    };
    worst[0] = std::max(worst[0], gradcheck(per_task(false), Tensor::vector(posterior_point(1))));
    worst[1] = std::max(worst[1], gradcheck(per_task(true), Tensor::vector(posterior_point(1))));

    const std::size_t n = 2;
    const std::vector<Dataset> batches{batch_of(6), batch_of(6)};
    TrainConfig cfg;
    cfg.kappa_rho = uniform(rng, 0.01, 0.5);
    cfg.kappa_pi = uniform(rng, 1.0, 10.0);
    cfg.mc_train = 2;
    const auto noise = MetaObjectiveNoise::draw(D, n, cfg.mc_train, rng);
    std::vector<double> point = standard_normal_vector(rng, 2 * D);
    const auto qs = posterior_point(n);
    point.insert(point.end(), qs.begin(), qs.end());
    const ScalarObjective meta = [&](Tape&, Var x) {
      const Var theta = slice(x, 0, {2 * D});
      std::vector<Var> q_mean, q_log_var;
      for (std::size_t i = 0; i < n; ++i) {
        q_mean.push_back(slice(x, 2 * D + 2 * i * D, {D}));
        q_log_var.push_back(slice(x, 2 * D + 2 * i * D + D, {D}));
      }
      return meta_objective(theta, theta, q_mean, q_log_var, arch, batches, 6, cfg, noise).total;
    };
    worst[2] = std::max(worst[2], gradcheck(meta, Tensor::vector(point)));
  }
  return {worst[0] <= 1e-4 && worst[1] <= 1e-4 && worst[2] <= 1e-4,
          "max rel err per-task=" + num(worst[0]) + " adaptation=" + num(worst[1]) + " meta=" + num(worst[2])};
}

Verdict jensen() {
  Rng rng = make_stream(4, "acceptance/jensen");
  int violations = 0, strict_cases = 0, strict_fail = 0;
  for (int k = 0; k < 1000; ++k) {
    MetaBoundInput in;
    in.empirical_multitask_risk = uniform(rng, 0.0, 1.0);
    in.kl_rho_pi = k % 5 == 0 ? 0.0 : std::exp(uniform(rng, -3.0, 6.0));
    in.n = 1 + rng() % 100;
    in.m = 1 + rng() % 100;
    in.delta = uniform(rng, 0.001, 0.5);
    const std::size_t algs = 1 + rng() % 8;
    for (std::size_t a = 0; a < algs; ++a) {
      in.per_algorithm.push_back({std::exp(uniform(rng, -3.0, 5.0)), std::exp(uniform(rng, -3.0, 7.0)), uniform(rng, 0.1, 2.0)});
    }
    const double t1 = theorem1_bound(in), t2 = theorem2_bound(in);
    if (t2 > t1) ++violations;
    if (algs > 1 && in.kl_rho_pi > 0.0) {
      ++strict_cases;
      if (!(t2 < t1)) ++strict_fail;
    }
  }
  return {violations == 0 && strict_fail == 0,
          "violations=" + std::to_string(violations) + ", strict failures=" + std::to_string(strict_fail) + "/" +
              std::to_string(strict_cases)};
}

Verdict audit() {
  LinearEnvSpec env;
  env.d = 2;
  const auto report = audit_bound_validity(env, 5, 5, PriorMeanConfig{}, 200, 5);
  double min_margin = 1e300;
  for (const auto& r : report.records) min_margin = std::min(min_margin, r.margin);
  return {report.violation_rate() <= 0.1,
          "violations=" + std::to_string(report.violations) + "/200, rate=" + num(report.violation_rate()) +
              ", min margin=" + num(min_margin)};
}

Verdict non_vacuity() {
  const fs::path out = fs::temp_directory_path() / "pacmeta_acceptance_sweep.csv";
  const auto c = Config::parse("[sweep]\nn = 2, 5, 10, 20, 50\nm = 5\nd = 2\nseeds = 0, 1, 2, 3, 4\n");
  const auto table = cmd_sweep(c, {std::uint64_t{6}, out.string(), std::nullopt});
  fs::remove(out);
  const std::vector<std::size_t> ns{2, 5, 10, 20, 50};
  std::vector<double> mean(ns.size(), 0.0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const std::size_t n = std::stoul(table.cell(r, "n"));
    const auto k = std::size_t(std::find(ns.begin(), ns.end(), n) - ns.begin());
    mean[k] += std::stod(table.cell(r, "bound_thm2")) / 5.0;
  }
  bool monotone = true;
  std::string trend;
  for (std::size_t k = 0; k < ns.size(); ++k) {
    if (k && mean[k] > mean[k - 1]) monotone = false;
    trend += (k ? " " : "") + std::string("n=") + std::to_string(ns[k]) + ":" + num(mean[k]);
  }
  return {table.rows() == 25 && monotone && mean.back() < 1.0, "mean bound_thm2 " + trend};
}

Verdict separation() {
  const PermutedEnvSpec spec;
  const Environment env(spec);
  const auto arch = ModelArchitecture::mlp1(spec.base.dim, 16, spec.base.classes);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 8;
  double sep = 0.0, tied = 0.0, base = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng = make_stream(s, "acceptance/separation/tasks");
    const auto tasks = sample_tasks(env, 10, 64, rng);
    cfg.seed = stream_seed(s, "acceptance/separation/train");
    const auto separated = train_meta(tasks, arch, cfg);
    TrainConfig single = cfg;
    single.epochs_stage1 = cfg.epochs_stage1 + cfg.epochs_stage2;
    single.epochs_stage2 = 0;
    const auto tied_rho = train_meta(tasks, arch, single).rho;
    const std::uint64_t test_seed = stream_seed(s, "acceptance/separation/test");
    sep += meta_test_loss(separated.rho, env, 32, arch, cfg, 20, 2000, test_seed).mean / 5.0;
    tied += meta_test_loss(tied_rho, env, 32, arch, cfg, 20, 2000, test_seed).mean / 5.0;
    base += meta_test_loss(separated.rho, env, 32, arch, cfg, 20, 2000, test_seed, true).mean / 5.0;
  }
  return {sep <= tied && base - sep >= 0.05 && base - tied >= 0.05,
          "mean test error separated=" + num(sep) + " tied=" + num(tied) + " independent=" + num(base)};
}

Verdict lambda_machinery() {
  Rng rng = make_stream(8, "acceptance/lambda");
  int bad = 0, clipped = 0;
  double max_slack = 0.0, min_clipped_grid = 1e300;
  for (int k = 0; k < 1000; ++k) {
    const double kl = k % 10 == 0 ? 0.0 : std::exp(uniform(rng, -4.0, 9.0));
    const std::size_t n = 1 + rng() % 30, m = 1 + rng() % 40;
    const double delta = uniform(rng, 0.001, 0.5);
    const double nm = double(n) * double(m);
    const double X = kl + std::log(8.0 * nm / delta);
    const auto ls = lambda_star(kl, n, m, delta);
    const double oracle_lambda = std::sqrt(8.0 * nm * X + 1.0);
    if (ls.clipped != (oracle_lambda > 4.0 * nm)) ++bad;
    const double closed = multitask_sqrt_term(kl, n, m, delta);
    const double grid = union_grid_minimum(kl, n, m, delta);
    if (ls.clipped) {
      ++clipped;
      // Vacuous branch: the closed form exceeds 1, and the grid minimum sits at
      // lambda = 4mn where its value X/(4mn) + 1/2 exceeds 1 - 1/(32 (mn)^2).
      const double top = union_lambda_form(kl, 4.0 * nm, n, m, delta);
      if (!(closed > 1.0) || std::abs(grid - top) > 1e-12 || !(grid > 1.0 - 1.0 / (32.0 * nm * nm))) ++bad;
      min_clipped_grid = std::min(min_clipped_grid, grid);
    } else {
      const double relaxed = relaxed_lambda_form(kl, ls.lambda, n, m, delta);
      const double continuous = std::sqrt(X / (2.0 * nm));
      if (!(grid <= relaxed + 1e-12) || !(relaxed <= closed + 1e-12) || !(grid >= continuous - 1e-12)) ++bad;
      max_slack = std::max(max_slack, closed - grid);
    }
  }
  return {bad == 0, "mismatches=" + std::to_string(bad) + ", clipped=" + std::to_string(clipped) +
                        ", max closed-minus-grid=" + num(max_slack) +
                        ", min clipped grid=" + num(min_clipped_grid)};
}

std::string body_of(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::string line, out;
  while (std::getline(f, line)) {
    if (line.rfind("# created", 0) == 0 || line.rfind("# wall_time", 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / "pacmeta_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  };
  const std::string cli = PACMETA_CLI_PATH;
  const std::string sweep = write("sweep.conf", "[sweep]\nn = 2, 5\nseeds = 0, 1\n[prior_mean]\ninner_steps = 20\nalgorithm_samples = 8\nn_eval = 500\n");
  const std::string train = write("train.conf",
                                  "[env]\nkind = permuted_labels\n[train]\nepochs_stage1 = 5\nepochs_stage2 = 5\n"
                                  "batch_size = 16\nlearning_rate = 0.05\n[data]\nn = 3\nm = 32\n");
  const std::string audit = write("audit.conf", "[audit]\ntrials = 4\n[prior_mean]\ninner_steps = 20\nalgorithm_samples = 8\nn_eval = 500\n");
  const std::string bound = write("bound.conf", "[bound]\ntheorem = 2\nempirical = 0.2\nkl_rho_pi = 3\nkl_hyper = 1, 2\nsum_task_kl = 10, 30\nn = 10\nm = 5\n");
  std::vector<std::pair<std::string, std::string>> runs;  // (argument tail, output file)
  for (int rep = 0; rep < 2; ++rep) {
    const std::string r = std::to_string(rep);
    runs.push_back({"sweep --config " + sweep + " --seed 3 --jobs " + std::to_string(rep + 1), "sweep" + r + ".csv"});
    runs.push_back({"train --config " + train + " --seed 3", "rho" + r + ".txt"});
    runs.push_back({"audit --config " + audit + " --seed 3", "audit" + r + ".csv"});
    runs.push_back({"bound --config " + bound + " --seed 3", "bound" + r + ".csv"});
  }
  for (const auto& [args, out] : runs) {
    const std::string cmd = cli + " " + args + " --out " + (dir / out).string() + " > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
  }
  for (int rep = 0; rep < 2; ++rep) {
    const std::string r = std::to_string(rep);
    const std::string cmd = cli + " adapt --config " + write("adapt.conf", "[env]\nkind = permuted_labels\n[train]\nadapt_epochs = 5\nmc_eval = 50\n[adapt]\ntasks = 4\nn_eval = 500\nbaseline = true\n") +
                            " --set adapt.metaposterior=" + (dir / "rho0.txt").string() + " --seed 3 --out " +
                            (dir / ("adapt" + r + ".csv")).string() + " > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
  }
  std::string differing;
  int compared = 0;
  for (const char* stem : {"sweep", "audit", "bound", "adapt"}) {
    ++compared;
    if (body_of(dir / (std::string(stem) + "0.csv")) != body_of(dir / (std::string(stem) + "1.csv"))) differing += std::string(" ") + stem;
  }
  for (const auto& [a, b] : {std::pair{"rho0.txt", "rho1.txt"}, std::pair{"rho0.txt.trace.csv", "rho1.txt.trace.csv"}}) {
    ++compared;
    if (body_of(dir / a) != body_of(dir / b)) differing += std::string(" ") + a;
  }
  fs::remove_all(dir);
  return {differing.empty(), std::to_string(compared) + " outputs compared" + (differing.empty() ? "" : "; differ:" + differing)};
}

}  // namespace

int main() {
  criterion(1, "KL decomposition on random discrete systems", 10.0, kl_decomposition);
  criterion(2, "closed-form KLs vs quadrature and Monte Carlo", 60.0, closed_forms);
  criterion(3, "gradient checks of the bound objectives", 60.0, gradients);
  criterion(4, "shared-hyper-prior bound never exceeds the general bound", 5.0, jensen);
  criterion(5, "bound validity audit (200 trials, d=2, n=5, m=5)", 900.0, audit);
  criterion(6, "seed-averaged bound nonincreasing in n and below 1 at n=50", 1200.0, non_vacuity);
  criterion(7, "separated priors vs tied priors vs independent learning", 1800.0, separation);
  criterion(8, "lambda* closed form vs union-bound grid", 5.0, lambda_machinery);
  criterion(9, "CLI outputs are byte-identical across repeated runs", 0.0, determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
