#ifndef MAHABO_HARNESS_HPP
#define MAHABO_HARNESS_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mahabo/batch_dpp.hpp"
#include "mahabo/benchmarks.hpp"
#include "mahabo/external_objective.hpp"
#include "mahabo/fit.hpp"
#include "mahabo/sobol.hpp"
#include "mahabo/two_step.hpp"

namespace mahabo {

inline constexpr int kSchemaVersion = 1;

enum class Method { kOneStep, kPinv, kRandomized, kRbfArd };

inline Method method_from_string(const std::string& s) {
  if (s == "maha-one-step") return Method::kOneStep;
  if (s == "maha-pinv") return Method::kPinv;
  if (s == "maha-random") return Method::kRandomized;
  if (s == "rbf-ard") return Method::kRbfArd;
  throw std::invalid_argument("unknown method: " + s +
                              " (expected maha-one-step|maha-pinv|maha-random|rbf-ard)");
}

//! Full configuration of one experiment (all seeds of one method on one
//! problem).
struct ExperimentConfig {
  std::string function = "branin";  // benchmark name or "external"
  std::string external_cmd;         // required when function == "external"
  int dim = 100;                    // D
  int embed_dim = 2;                // d (ignored by rbf-ard)
  std::string method = "maha-one-step";
  int n_init = 10;
  int n_batch = 1;
  int budget = 50;  // rounds T
  std::vector<std::uint64_t> seeds = {0};
  std::string acquisition = "est";  // est | lcb
  double fixed_beta = 2.0;
  int est_candidates = 512;
  double noise_sd = 0.0;
  int hard_cap = 5000;
  bool variance_exploration = false;
  AdamConfig adam;
  int warm_fresh_restarts = 1;  // fresh Adam restarts on warm-started rounds
  OptimizerConfig opt;
  DppConfig dpp;
  std::string out_dir = "runs";
  int threads = 0;  // 0 = hardware concurrency

  void validate() const {
    require(dim >= 1, "config: --dim must be positive");
    require(embed_dim >= 1, "config: --embed-dim must be positive");
    require(embed_dim <= dim, "config: --embed-dim must not exceed --dim");
    require(n_init >= 1, "config: --init must be positive");
    require(n_batch >= 1, "config: --batch must be positive");
    require(budget >= 0, "config: --budget must be >= 0");
    require(!seeds.empty(), "config: at least one seed required");
    require(budget * n_batch + n_init <= hard_cap,
            "config: budget*batch + init exceeds the evaluation cap");
    require(acquisition == "est" || acquisition == "lcb",
            "config: --acquisition must be est or lcb");
    method_from_string(method);
    if (function == "external") {
      require(!external_cmd.empty(), "config: external function needs --external-cmd");
    } else {
      const auto base = base_function_by_name<double>(function);
      require(dim >= base.d_true, "config: --dim must be >= the function's true dimension");
    }
  }

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

inline nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["function"] = function;
  j["external_cmd"] = external_cmd;
  j["dim"] = dim;
  j["embed_dim"] = embed_dim;
  j["method"] = method;
  j["n_init"] = n_init;
  j["n_batch"] = n_batch;
  j["budget"] = budget;
  j["seeds"] = seeds;
  j["acquisition"] = acquisition;
  j["fixed_beta"] = fixed_beta;
  j["est_candidates"] = est_candidates;
  j["noise_sd"] = noise_sd;
  j["hard_cap"] = hard_cap;
  j["variance_exploration"] = variance_exploration;
  j["adam"] = {{"step", adam.step},
               {"beta1", adam.beta1},
               {"beta2", adam.beta2},
               {"iterations", adam.iterations},
               {"restarts", adam.restarts},
               {"min_noise_var", adam.min_noise_var}};
  j["warm_fresh_restarts"] = warm_fresh_restarts;
  j["opt"] = {{"restarts", opt.restarts},
              {"mode", opt.mode == OptimizerConfig::Mode::kQuasiNewton ? "quasi-newton"
                                                                       : "vanilla-gd"},
              {"gd_step", opt.gd_step},
              {"grad_tol", opt.grad_tol},
              {"max_steps", opt.max_steps}};
  j["dpp"] = {{"gibbs_steps", dpp.gibbs_steps},
              {"lambda_init", dpp.lambda_init},
              {"lambda_growth", dpp.lambda_growth},
              {"rejection_budget", dpp.rejection_budget},
              {"lambda_max", dpp.lambda_max},
              {"init_attempts", dpp.init_attempts}};
  j["out_dir"] = out_dir;
  j["threads"] = threads;
  return j;
}

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("function", c.function);
  get("external_cmd", c.external_cmd);
  get("dim", c.dim);
  get("embed_dim", c.embed_dim);
  get("method", c.method);
  get("n_init", c.n_init);
  get("n_batch", c.n_batch);
  get("budget", c.budget);
  get("seeds", c.seeds);
  get("acquisition", c.acquisition);
  get("fixed_beta", c.fixed_beta);
  get("est_candidates", c.est_candidates);
  get("noise_sd", c.noise_sd);
  get("hard_cap", c.hard_cap);
  get("variance_exploration", c.variance_exploration);
  get("warm_fresh_restarts", c.warm_fresh_restarts);
  get("out_dir", c.out_dir);
  get("threads", c.threads);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    if (a.contains("step")) c.adam.step = a.at("step").get<double>();
    if (a.contains("beta1")) c.adam.beta1 = a.at("beta1").get<double>();
    if (a.contains("beta2")) c.adam.beta2 = a.at("beta2").get<double>();
    if (a.contains("iterations")) c.adam.iterations = a.at("iterations").get<int>();
    if (a.contains("restarts")) c.adam.restarts = a.at("restarts").get<int>();
    if (a.contains("min_noise_var")) c.adam.min_noise_var = a.at("min_noise_var").get<double>();
  }
  if (j.contains("opt")) {
    const auto& o = j.at("opt");
    if (o.contains("restarts")) c.opt.restarts = o.at("restarts").get<int>();
    if (o.contains("mode"))
      c.opt.mode = o.at("mode").get<std::string>() == "vanilla-gd"
                       ? OptimizerConfig::Mode::kVanillaGd
                       : OptimizerConfig::Mode::kQuasiNewton;
    if (o.contains("gd_step")) c.opt.gd_step = o.at("gd_step").get<double>();
    if (o.contains("grad_tol")) c.opt.grad_tol = o.at("grad_tol").get<double>();
    if (o.contains("max_steps")) c.opt.max_steps = o.at("max_steps").get<int>();
  }
  if (j.contains("dpp")) {
    const auto& d = j.at("dpp");
    if (d.contains("gibbs_steps")) c.dpp.gibbs_steps = d.at("gibbs_steps").get<int>();
    if (d.contains("lambda_init")) c.dpp.lambda_init = d.at("lambda_init").get<double>();
    if (d.contains("lambda_growth")) c.dpp.lambda_growth = d.at("lambda_growth").get<double>();
    if (d.contains("rejection_budget"))
      c.dpp.rejection_budget = d.at("rejection_budget").get<int>();
    if (d.contains("lambda_max")) c.dpp.lambda_max = d.at("lambda_max").get<double>();
    if (d.contains("init_attempts")) c.dpp.init_attempts = d.at("init_attempts").get<int>();
  }
  return c;
}

struct TrialRecord {
  std::uint64_t seed = 0;
  int round = 0;        // 0 = initialization
  int batch_index = 0;  // position within the round
  std::string x_digest;
  double y = 0;
  double best_so_far = 0;
  double wall_ms = 0;
  std::string flags;
  Eigen::VectorXd x;
};

namespace detail {

inline std::string fnv1a_digest(const Eigen::VectorXd& x) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &x[i], sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace detail

//! Per-trial evaluation log. best_so_far is nonincreasing in record order.
struct TrialLog {
  std::uint64_t seed = 0;
  ExperimentConfig config;
  std::vector<TrialRecord> records;

  //! CSV rendering; timing fields can be excluded for replay comparison.
  std::string to_csv(bool include_timing = true) const {
    std::ostringstream os;
    os << "# mahabo-trial schema_version=" << kSchemaVersion << "\n";
    os << "seed,round,batch_index,y,best_so_far";
    if (include_timing) os << ",wall_ms";
    os << ",flags\n";
    for (const auto& r : records) {
      os << r.seed << ',' << r.round << ',' << r.batch_index << ','
         << detail::format_double(r.y) << ',' << detail::format_double(r.best_so_far);
      if (include_timing) os << ',' << detail::format_double(r.wall_ms);
      os << ',' << r.flags << '\n';
    }
    return os.str();
  }

  nlohmann::json to_json(bool include_timing = true) const {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "mahabo-trial";
    j["seed"] = seed;
    j["config"] = config.to_json();
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) {
      nlohmann::json e;
      e["round"] = r.round;
      e["batch_index"] = r.batch_index;
      e["x_digest"] = r.x_digest;
      e["y"] = r.y;
      e["best_so_far"] = r.best_so_far;
      if (include_timing) e["wall_ms"] = r.wall_ms;
      e["flags"] = r.flags;
      e["x"] = std::vector<double>(r.x.data(), r.x.data() + r.x.size());
      recs.push_back(std::move(e));
    }
    j["records"] = std::move(recs);
    return j;
  }

  //! Best value seen by the end of each round, indexed 0..T.
  std::vector<double> best_by_round() const {
    std::vector<double> out;
    for (const auto& r : records) {
      while (static_cast<int>(out.size()) <= r.round)
        out.push_back(out.empty() ? r.best_so_far : out.back());
      out[r.round] = r.best_so_far;
    }
    return out;
  }

  void write(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string stem = dir + "/trial_" + std::to_string(seed);
    std::ofstream csv(stem + ".csv");
    csv << to_csv();
    std::ofstream js(stem + ".json");
    js << to_json().dump(2) << '\n';
  }
};

namespace detail {

template <typename Evaluator>
void append_evaluation(TrialLog& log, Dataset<double>& data, Evaluator&& evaluate,
                       const Eigen::VectorXd& x, int round, int batch_index,
                       const std::string& flags, RngStream& noise_rng, double& best) {
  const double y = evaluate(x, noise_rng);
  data.append(x, y);
  best = std::min(best, y);
  TrialRecord rec;
  rec.seed = log.seed;
  rec.round = round;
  rec.batch_index = batch_index;
  rec.x_digest = fnv1a_digest(x);
  rec.y = y;
  rec.best_so_far = best;
  rec.flags = flags;
  rec.x = x;
  log.records.push_back(std::move(rec));
}

}  // namespace detail

//! One seeded trial: Sobol initialization, then `budget` rounds of
//! fit / select / evaluate. Deterministic given (config, seed): all random
//! streams are derived hierarchically from the seed (trial -> round ->
//! purpose), so methods and rounds never perturb each other's draws. A round
//! that fails numerically falls back to uniform random queries, flagged, so
//! trials always complete.
inline TrialLog run_trial(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const bool external = cfg.function == "external";
  const Method method = method_from_string(cfg.method);

  RngStream root(splitmix64(seed ^ 0x6d61686142'6full));
  RngStream emb_rng = root.child(1);
  RngStream noise_rng = root.child(2);

  std::optional<EmbeddedProblem<double>> problem;
  std::unique_ptr<ExternalObjective> ext;
  BoxDomain<double> domain = BoxDomain<double>::unit_symmetric(cfg.dim);
  if (external) {
    ext = std::make_unique<ExternalObjective>(cfg.external_cmd);
  } else {
    problem = make_embedded_problem(base_function_by_name<double>(cfg.function), cfg.dim,
                                    cfg.noise_sd, emb_rng);
    domain = problem->domain;
  }
  auto evaluate = [&](const Eigen::VectorXd& x, RngStream& rng) {
    if (!external) return eval_objective(*problem, x, rng);
    double y = ext->eval(x);
    if (cfg.noise_sd > 0) y += cfg.noise_sd * rng.normal();
    return y;
  };

  TrialLog log;
  log.seed = seed;
  log.config = cfg;

  Dataset<double> data(domain);
  double best = std::numeric_limits<double>::infinity();

  // Initial design, shared across seeds and methods (offset 0).
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::MatrixXd X0 = sobol_init(domain, cfg.n_init, 0);
  for (int i = 0; i < cfg.n_init; ++i)
    detail::append_evaluation(log, data, evaluate, X0.row(i).transpose(), 0, i, "", noise_rng,
                              best);
  const double init_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  for (auto& r : log.records) r.wall_ms = init_ms;

  std::optional<MahaKernelParams<double>> prev_params;
  for (int t = 1; t <= cfg.budget; ++t) {
    const auto round_start = std::chrono::steady_clock::now();
    RngStream round_rng = root.child(1000 + static_cast<std::uint64_t>(t));
    BatchSelection<double> selection;
    bool failed = false;

    try {
      // Standardize observations for fitting; selection is invariant to the
      // affine change, logged values stay raw.
      const Eigen::VectorXd& ys = data.values();
      const double mu = ys.mean();
      const double sd = std::max(
          std::sqrt((ys.array() - mu).square().sum() / std::max<double>(ys.size() - 1, 1.0)),
          1e-12);
      Dataset<double> std_data = data.with_values((ys.array() - mu) / sd);

      AdamConfig acfg = cfg.adam;
      std::vector<MahaKernelParams<double>> warm;
      if (prev_params) {
        warm.push_back(*prev_params);
        acfg.restarts = cfg.warm_fresh_restarts;
      }
      const int d_method = method == Method::kRbfArd ? cfg.dim : cfg.embed_dim;
      acfg.constrain_diagonal = method == Method::kRbfArd;
      RngStream fit_rng = round_rng.child(1);
      auto fit = fit_hyperparameters(std_data, d_method, acfg, fit_rng, warm);
      prev_params = fit.params;

      const GPPosterior<double> post = fit_posterior(std_data, fit.params);

      AcquisitionSpec<double> spec;
      if (cfg.acquisition == "est") {
        RngStream est_rng = round_rng.child(2);
        spec = est_beta(post, domain, cfg.est_candidates, est_rng);
      } else {
        spec.beta = cfg.fixed_beta;
      }
      spec.variance_exploration = cfg.variance_exploration;

      RngStream select_rng = round_rng.child(3);
      if (method == Method::kOneStep || method == Method::kRbfArd) {
        BatchConfig bcfg{cfg.opt, cfg.dpp};
        selection = select_batch(post, domain, cfg.n_batch, spec, bcfg, select_rng);
      } else {
        TwoStepConfig tcfg;
        tcfg.opt = cfg.opt;
        tcfg.dpp = cfg.dpp;
        tcfg.acq_mode = cfg.acquisition == "est" ? AcquisitionMode::kEst
                                                 : AcquisitionMode::kFixedBeta;
        tcfg.fixed_beta = cfg.fixed_beta;
        tcfg.est_candidates = cfg.est_candidates;
        tcfg.variance_exploration = cfg.variance_exploration;
        selection = two_step_select(std_data, fit.params, domain, cfg.n_batch,
                                    method == Method::kPinv
                                        ? ReconstructionStrategy::kPseudoInverse
                                        : ReconstructionStrategy::kRandomized,
                                    tcfg, select_rng);
      }
    } catch (const std::exception&) {
      failed = true;
      selection.points.clear();
      selection.flags.clear();
      RngStream fb_rng = round_rng.child(9);
      for (int b = 0; b < cfg.n_batch; ++b) {
        selection.points.push_back(domain.sample(fb_rng));
        selection.flags.push_back("round_fallback_random");
      }
    }
    (void)failed;

    const std::size_t first_record = log.records.size();
    for (int b = 0; b < cfg.n_batch; ++b)
      detail::append_evaluation(log, data, evaluate, selection.points[b], t, b,
                                selection.flags[b], noise_rng, best);
    const double round_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - round_start)
                                .count();
    for (std::size_t i = first_record; i < log.records.size(); ++i)
      log.records[i].wall_ms = round_ms;
  }
  return log;
}

//! All seeds of an experiment; trials run in parallel when threads > 1.
inline std::vector<TrialLog> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(cfg.seeds.size());
  std::vector<TrialLog> logs(n);
  int threads = cfg.threads > 0 ? cfg.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));

  if (threads == 1) {
    for (int i = 0; i < n; ++i) logs[i] = run_trial(cfg, cfg.seeds[i]);
    return logs;
  }

  std::atomic<int> next{0};
  std::vector<std::string> errors(n);
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        logs[i] = run_trial(cfg, cfg.seeds[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int tIdx = 0; tIdx < threads; ++tIdx) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (const auto& err : errors)
    if (!err.empty()) throw std::runtime_error("trial failed: " + err);
  return logs;
}

struct SummaryRow {
  int round = 0;
  double mean_best = 0;
  double se_best = 0;
};

//! Per-round aggregate across trials: mean of best-so-far, standard error
//! sd/sqrt(n), and the mean +/- 1 se band implied by them.
struct Summary {
  std::vector<SummaryRow> rows;
  int n_trials = 0;

  std::string to_csv() const {
    std::ostringstream os;
    os << "# mahabo-summary schema_version=" << kSchemaVersion << "\n";
    os << "round,mean_best,se_best\n";
    for (const auto& r : rows)
      os << r.round << ',' << detail::format_double(r.mean_best) << ','
         << detail::format_double(r.se_best) << '\n';
    return os.str();
  }

  //! Final row in table form, e.g. "9.55 ± 0.30".
  std::string final_cell() const {
    require(!rows.empty(), "Summary: empty");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", rows.back().mean_best,
                  rows.back().se_best);
    return std::string(buf);
  }
};

inline Summary summarize_best_by_round(const std::vector<std::vector<double>>& per_trial) {
  require(!per_trial.empty(), "summarize: at least one trial required");
  std::size_t rounds = per_trial.front().size();
  for (const auto& t : per_trial)
    require(t.size() == rounds, "summarize: trials have differing round counts");

  Summary s;
  s.n_trials = static_cast<int>(per_trial.size());
  const double n = static_cast<double>(per_trial.size());
  for (std::size_t r = 0; r < rounds; ++r) {
    double mean = 0;
    for (const auto& t : per_trial) mean += t[r];
    mean /= n;
    double var = 0;
    for (const auto& t : per_trial) var += (t[r] - mean) * (t[r] - mean);
    const double sd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    s.rows.push_back({static_cast<int>(r), mean, n > 1 ? sd / std::sqrt(n) : 0.0});
  }
  return s;
}

inline Summary summarize(const std::vector<TrialLog>& logs) {
  std::vector<std::vector<double>> per_trial;
  per_trial.reserve(logs.size());
  for (const auto& log : logs) per_trial.push_back(log.best_by_round());
  return summarize_best_by_round(per_trial);
}

//! Minimal reader for trial CSV files written by TrialLog::write.
inline std::vector<double> read_trial_best_by_round(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open trial log");
  std::string line;
  std::vector<double> best_by_round;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < 5) continue;
    const int round = std::stoi(cells[1]);
    const double best = std::stod(cells[4]);
    while (static_cast<int>(best_by_round.size()) <= round)
      best_by_round.push_back(best_by_round.empty() ? best : best_by_round.back());
    best_by_round[round] = best;
  }
  require(!best_by_round.empty(), "trial log contains no records");
  return best_by_round;
}

}  // namespace mahabo

#endif  // MAHABO_HARNESS_HPP
