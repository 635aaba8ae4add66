// Command-line harness: `run` executes seeded experiments and writes one
// CSV + JSON log per trial, `summarize` aggregates a directory of trial logs
// into per-round mean / standard-error series, `selftest` runs a quick
// smoke set of the library's core identities.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mahabo/mahabo.hpp"

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  const auto range_pos = text.find("..");
  if (range_pos != std::string::npos) {
    const std::uint64_t lo = std::stoull(text.substr(0, range_pos));
    const std::uint64_t hi = std::stoull(text.substr(range_pos + 2));
    if (hi < lo) throw std::invalid_argument("--seeds: range end before start");
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    seeds.push_back(std::stoull(text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (seeds.empty()) throw std::invalid_argument("--seeds: empty");
  return seeds;
}

int cmd_run(const mahabo::ExperimentConfig& cfg) {
  const auto logs = mahabo::run_experiment(cfg);
  for (const auto& log : logs) log.write(cfg.out_dir);
  const auto summary = mahabo::summarize(logs);
  std::ofstream sf(cfg.out_dir + "/summary.csv");
  sf << summary.to_csv();
  std::cout << "wrote " << logs.size() << " trial logs to " << cfg.out_dir << "\n";
  std::cout << "final best (mean ± se over " << summary.n_trials
            << " trials): " << summary.final_cell() << "\n";
  return 0;
}

int cmd_summarize(const std::string& dir, const std::string& format, const std::string& out) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto path = entry.path().string();
    if (entry.path().extension() == ".csv" &&
        entry.path().filename().string().rfind("trial_", 0) == 0)
      files.push_back(path);
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "no trial_*.csv logs found in " << dir << "\n";
    return 2;
  }
  std::vector<std::vector<double>> per_trial;
  for (const auto& f : files) per_trial.push_back(mahabo::read_trial_best_by_round(f));
  const auto summary = mahabo::summarize_best_by_round(per_trial);

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    os = &file;
  }
  if (format == "csv") {
    *os << summary.to_csv();
  } else {
    *os << "round  mean_best  se_best\n";
    for (const auto& r : summary.rows) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%5d  %9.4f  %7.4f\n", r.round, r.mean_best, r.se_best);
      *os << buf;
    }
    *os << "final: " << summary.final_cell() << "  (" << summary.n_trials << " trials)\n";
  }
  return 0;
}

bool check(bool ok, const char* name, int& failures) {
  std::printf("[%s] %s\n", ok ? "ok" : "FAIL", name);
  if (!ok) ++failures;
  return ok;
}

int cmd_selftest() {
  using namespace mahabo;
  int failures = 0;
  RngStream rng(42);

  {  // kernel basics
    MahaKernelParams<double> p;
    p.gamma = 1.5;
    p.embedding = Eigen::MatrixXd::Random(2, 5);
    p.noise_var = 1e-2;
    Eigen::VectorXd x = Eigen::VectorXd::Random(5);
    check(std::abs(kernel_eval(p, x, x) - 2.25) < 1e-12, "kernel: zero distance", failures);
    p.embedding.setZero();
    p.gamma = 1.0;
    Eigen::VectorXd x2 = Eigen::VectorXd::Random(5);
    check(std::abs(kernel_eval(p, x, x2) - 1.0) < 1e-12, "kernel: degenerate embedding",
          failures);
  }
  {  // projected-posterior equivalence
    const int D = 12, d = 2, N = 15;
    MahaKernelParams<double> p;
    p.gamma = 1.2;
    p.noise_var = 1e-2;
    p.embedding = Eigen::MatrixXd::NullaryExpr(d, D, [&](Eigen::Index) {
      return rng.normal() / std::sqrt(double(D));
    });
    Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(N, D, [&](Eigen::Index) {
      return rng.uniform(-1, 1);
    });
    Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(N, [&](Eigen::Index) {
      return rng.normal();
    });
    auto post = fit_posterior(X, y, p);
    MahaKernelParams<double> zp;
    zp.gamma = p.gamma;
    zp.noise_var = p.noise_var;
    zp.embedding = Eigen::MatrixXd::Identity(d, d);
    auto z_post = fit_posterior<double>(X * p.embedding.transpose(), y, zp);
    double max_diff = 0;
    for (int i = 0; i < 25; ++i) {
      Eigen::VectorXd q = Eigen::VectorXd::NullaryExpr(D, [&](Eigen::Index) {
        return rng.uniform(-1, 1);
      });
      max_diff = std::max(max_diff,
                          std::abs(post.mean(q) - z_post.mean(p.embedding * q)));
      max_diff = std::max(max_diff, std::abs(post.var(q) - z_post.var(p.embedding * q)));
    }
    check(max_diff < 1e-8, "posterior: factors through the embedding", failures);
  }
  {  // embedding identities
    Eigen::MatrixXd B(1, 2);
    B << 1, 0;
    LinearEmbedding<double> emb(B);
    Eigen::VectorXd z(1);
    z << 0.5;
    const Eigen::VectorXd x = pseudo_inverse_map(emb, z);
    check(std::abs(x[0] - 0.5) < 1e-14 && std::abs(x[1]) < 1e-14,
          "embedding: pseudo-inverse map", failures);
    auto box = BoxDomain<double>::unit_symmetric(2);
    auto prior = [&](RngStream& r) { return box.sample(r); };
    auto rec = randomized_reconstruct(emb, z, prior, box, rng);
    check(rec.converged && std::abs(rec.x[0] - 0.5) < 1e-6,
          "embedding: randomized reconstruction", failures);
  }
  {  // sobol conventions
    auto box1 = BoxDomain<double>(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
    const Eigen::MatrixXd pts = sobol_init(box1, 4, 0);
    const double expected[4] = {0.5, 0.75, 0.25, 0.375};
    bool ok = true;
    for (int i = 0; i < 4; ++i) ok = ok && std::abs(pts(i, 0) - expected[i]) < 1e-12;
    check(ok, "sobol: base sequence", failures);
  }
  {  // embedded problem construction
    RngStream prng(7);
    auto prob = make_embedded_problem(branin(), 40, 0.0, prng);
    bool ok = true;
    for (int i = 0; i < prob.A.rows(); ++i)
      ok = ok && std::abs(prob.A.row(i).cwiseAbs().sum() - 1.0) < 1e-12;
    for (int s = 0; s < 200 && ok; ++s) {
      const Eigen::VectorXd x = prob.domain.sample(prng);
      ok = (prob.A * x).cwiseAbs().maxCoeff() <= 1.0 + 1e-12;
    }
    check(ok, "benchmarks: row normalization and containment", failures);
  }
  {  // tiny deterministic trial
    ExperimentConfig cfg;
    cfg.function = "branin";
    cfg.dim = 8;
    cfg.embed_dim = 2;
    cfg.budget = 1;
    cfg.n_batch = 2;
    cfg.n_init = 6;
    cfg.adam.iterations = 40;
    cfg.adam.restarts = 1;
    cfg.est_candidates = 32;
    cfg.seeds = {0};
    auto a = run_trial(cfg, 0);
    auto b = run_trial(cfg, 0);
    bool mono = true;
    for (std::size_t i = 1; i < a.records.size(); ++i)
      mono = mono && a.records[i].best_so_far <= a.records[i - 1].best_so_far + 1e-15;
    check(a.records.size() == 8 && mono && a.to_csv(false) == b.to_csv(false),
          "harness: deterministic trial", failures);
  }

  std::printf("selftest: %s\n", failures == 0 ? "all checks passed" : "FAILURES");
  return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch Bayesian optimization with a learned linear embedding"};
  app.require_subcommand(1);

  // --- run ---
  auto* run = app.add_subcommand("run", "execute an experiment and write trial logs");
  mahabo::ExperimentConfig defaults;
  std::string function = defaults.function, method = defaults.method,
              acquisition = defaults.acquisition, out_dir = defaults.out_dir;
  std::string seeds_text = "0", config_path, external_cmd, opt_mode = "quasi-newton";
  int dim = defaults.dim, embed_dim = defaults.embed_dim, n_init = defaults.n_init,
      n_batch = defaults.n_batch, budget = defaults.budget,
      est_candidates = defaults.est_candidates, threads = defaults.threads,
      adam_iters = defaults.adam.iterations, adam_restarts = defaults.adam.restarts,
      opt_restarts = defaults.opt.restarts, cap = defaults.hard_cap;
  double fixed_beta = defaults.fixed_beta, noise_sd = defaults.noise_sd;

  auto* o_function = run->add_option("--function", function, "objective name or 'external'");
  auto* o_dim = run->add_option("--dim", dim, "ambient dimension D");
  auto* o_embed = run->add_option("--embed-dim", embed_dim, "embedding dimension d");
  auto* o_method = run->add_option(
      "--method", method, "maha-one-step | maha-pinv | maha-random | rbf-ard");
  auto* o_init = run->add_option("--init", n_init, "initial design size");
  auto* o_batch = run->add_option("--batch", n_batch, "batch size per round");
  auto* o_budget = run->add_option("--budget", budget, "number of rounds");
  auto* o_seeds = run->add_option("--seeds", seeds_text, "seed list '0,1,2' or range '0..4'");
  auto* o_acq = run->add_option("--acquisition", acquisition, "est | lcb");
  auto* o_beta = run->add_option("--beta", fixed_beta, "beta for --acquisition lcb");
  auto* o_cands = run->add_option("--est-candidates", est_candidates, "EST candidate count");
  auto* o_noise = run->add_option("--noise-sd", noise_sd, "observation noise sd");
  auto* o_out = run->add_option("--out", out_dir, "output directory");
  auto* o_threads = run->add_option("--threads", threads, "parallel trials (0 = auto)");
  auto* o_ext = run->add_option("--external-cmd", external_cmd,
                                "shell command for the external objective");
  auto* o_ai = run->add_option("--adam-iters", adam_iters, "Adam iterations per start");
  auto* o_ar = run->add_option("--adam-restarts", adam_restarts, "Adam random restarts");
  auto* o_or = run->add_option("--opt-restarts", opt_restarts, "acquisition restarts");
  auto* o_om = run->add_option("--opt-mode", opt_mode, "quasi-newton | vanilla-gd");
  auto* o_cap = run->add_option("--cap", cap, "hard cap on total evaluations");
  run->add_option("--config", config_path, "JSON config file (flags override it)");

  // --- summarize ---
  auto* summ = app.add_subcommand("summarize", "aggregate a directory of trial logs");
  std::string summ_dir, summ_format = "table", summ_out;
  summ->add_option("dir", summ_dir, "directory containing trial_*.csv")->required();
  summ->add_option("--format", summ_format, "table | csv");
  summ->add_option("--out", summ_out, "write to file instead of stdout");

  // --- selftest ---
  auto* self = app.add_subcommand("selftest", "run the smoke property set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      mahabo::ExperimentConfig cfg;
      if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f.good()) {
          std::cerr << "cannot open config file: " << config_path << "\n";
          return 2;
        }
        nlohmann::json j;
        f >> j;
        cfg = mahabo::ExperimentConfig::from_json(j);
      }
      if (o_function->count()) cfg.function = function;
      if (o_dim->count()) cfg.dim = dim;
      if (o_embed->count()) cfg.embed_dim = embed_dim;
      if (o_method->count()) cfg.method = method;
      if (o_init->count()) cfg.n_init = n_init;
      if (o_batch->count()) cfg.n_batch = n_batch;
      if (o_budget->count()) cfg.budget = budget;
      if (o_seeds->count() || config_path.empty()) cfg.seeds = parse_seeds(seeds_text);
      if (o_acq->count()) cfg.acquisition = acquisition;
      if (o_beta->count()) cfg.fixed_beta = fixed_beta;
      if (o_cands->count()) cfg.est_candidates = est_candidates;
      if (o_noise->count()) cfg.noise_sd = noise_sd;
      if (o_out->count()) cfg.out_dir = out_dir;
      if (o_threads->count()) cfg.threads = threads;
      if (o_ext->count()) cfg.external_cmd = external_cmd;
      if (o_ai->count()) cfg.adam.iterations = adam_iters;
      if (o_ar->count()) cfg.adam.restarts = adam_restarts;
      if (o_or->count()) cfg.opt.restarts = opt_restarts;
      if (o_om->count())
        cfg.opt.mode = opt_mode == "vanilla-gd"
                           ? mahabo::OptimizerConfig::Mode::kVanillaGd
                           : mahabo::OptimizerConfig::Mode::kQuasiNewton;
      if (o_cap->count()) cfg.hard_cap = cap;

      try {
        cfg.validate();
      } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
      return cmd_run(cfg);
    }
    if (summ->parsed()) {
      if (summ_format != "table" && summ_format != "csv") {
        std::cerr << "config error: --format must be table or csv\n";
        return 2;
      }
      return cmd_summarize(summ_dir, summ_format, summ_out);
    }
    if (self->parsed()) return cmd_selftest();
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
