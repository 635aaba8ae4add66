#ifndef MAHABO_BATCH_DPP_HPP
#define MAHABO_BATCH_DPP_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mahabo/acquisition.hpp"
#include "mahabo/gp.hpp"

namespace mahabo {

//! k-DPP batch completion settings.
struct DppConfig {
  int k = 1;                    // completion size (batch size - 1)
  int gibbs_steps = 0;          // 0 = auto: 4 k^2
  double lambda_init = 2.0;
  double lambda_growth = 1.5;
  int rejection_budget = 5000;  // consecutive rejections before lambda grows
  double lambda_max = 1e6;
  int init_attempts = 50;       // nonsingular initial sets

  int effective_gibbs_steps() const { return gibbs_steps > 0 ? gibbs_steps : 4 * k * k; }

  void validate() const {
    require(k >= 1, "DppConfig: k must be >= 1");
    require(gibbs_steps == 0 || gibbs_steps >= k * k,
            "DppConfig: gibbs_steps must be >= k^2");
    require(lambda_init >= 1.0, "DppConfig: lambda_init must be >= 1");
    require(lambda_growth > 1.0, "DppConfig: lambda_growth must be > 1");
    require(rejection_budget >= 1, "DppConfig: rejection_budget must be >= 1");
  }
};

//! Sub-level filter {x : mu(x) - lambda beta sd(x) <= ucb_min} over the
//! pre-batch posterior. Membership is monotone in lambda: growing lambda
//! only enlarges the region.
template <typename Scalar>
class RelevantRegion {
 public:
  RelevantRegion(const GPPosterior<Scalar>& post, const AcquisitionSpec<Scalar>& spec,
                 Scalar lambda, Scalar ucb_min)
      : post_(&post), spec_(spec), lambda_(lambda), ucb_min_(ucb_min) {
    require(lambda >= Scalar(1), "RelevantRegion: lambda must be >= 1");
  }

  bool contains(const VectorX<Scalar>& x) const {
    const auto [m, v] = post_->mean_var(x);
    return m - lambda_ * spec_.beta * exploration_term(spec_, v) <= ucb_min_;
  }

  Scalar lambda() const { return lambda_; }
  Scalar beta() const { return spec_.beta; }
  Scalar ucb_min() const { return ucb_min_; }
  void escalate(Scalar growth) { lambda_ *= growth; }

 private:
  const GPPosterior<Scalar>* post_;
  AcquisitionSpec<Scalar> spec_;
  Scalar lambda_;
  Scalar ucb_min_;
};

//! Best value of the upper confidence bound found by multi-start
//! quasi-Newton minimization (an upper bound on the true minimum). The best
//! observed input joins the uniform starts.
template <typename Scalar>
Scalar min_ucb(const GPPosterior<Scalar>& post, const AcquisitionSpec<Scalar>& spec,
               const BoxDomain<Scalar>& domain, const OptimizerConfig& cfg, RngStream& rng) {
  BoxLbfgsOptions opt;
  opt.max_iterations = cfg.max_steps;
  opt.grad_tol = cfg.grad_tol;
  auto objective = [&](const VectorX<Scalar>& x, VectorX<Scalar>& grad) {
    grad = ucb_gradient(post, spec, x).grad;
    return ucb_value(post, spec, x);
  };

  std::vector<VectorX<Scalar>> starts;
  for (int r = 0; r < cfg.restarts; ++r) starts.push_back(domain.sample(rng));
  if (post.size() > 0) {
    Index best_i = 0;
    post.train_targets().minCoeff(&best_i);
    starts.push_back(post.train_inputs().row(best_i).transpose());
  }

  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (const auto& s : starts) {
    const auto res = box_lbfgs_minimize<Scalar>(objective, s, domain, opt);
    best = std::min(best, res.value);
  }
  return best;
}

//! DPP kernel value: the posterior covariance after conditioning on the
//! pending point (small-noise-limit kernel). The diagonal is clamped
//! nonnegative.
template <typename Scalar>
Scalar dpp_kernel_eval(const ConditionedCovariance<Scalar>& cond, const VectorX<Scalar>& x,
                       const VectorX<Scalar>& x2) {
  if (&x == &x2 || x == x2) return cond.var(x);
  return cond.cov(x, x2);
}

//! Uniform sample from the relevant region by rejection from the box. After
//! rejection_budget consecutive rejections lambda is escalated; past
//! lambda_max the region is declared degenerate.
template <typename Scalar>
VectorX<Scalar> sample_relevant_region(RelevantRegion<Scalar>& region,
                                       const BoxDomain<Scalar>& domain, const DppConfig& cfg,
                                       RngStream& rng) {
  int consecutive = 0;
  for (;;) {
    VectorX<Scalar> x = domain.sample(rng);
    if (region.contains(x)) return x;
    if (++consecutive >= cfg.rejection_budget) {
      region.escalate(Scalar(cfg.lambda_growth));
      consecutive = 0;
      if (region.lambda() > Scalar(cfg.lambda_max))
        throw RegionDegenerateError("relevant region degenerate: lambda exceeded " +
                                    std::to_string(cfg.lambda_max));
    }
  }
}

//! Log determinant of the kernel minor over the given points;
//! -infinity when the minor is numerically singular or not PD.
template <typename Scalar, typename Kernel>
Scalar kdpp_log_det(Kernel&& kernel, const std::vector<VectorX<Scalar>>& pts) {
  const Index k = static_cast<Index>(pts.size());
  MatrixX<Scalar> L(k, k);
  for (Index i = 0; i < k; ++i) {
    L(i, i) = kernel(pts[i], pts[i]);
    for (Index j = i + 1; j < k; ++j) L(i, j) = L(j, i) = kernel(pts[i], pts[j]);
  }
  Eigen::LDLT<MatrixX<Scalar>> ldlt(L);
  if (ldlt.info() != Eigen::Success) return -std::numeric_limits<Scalar>::infinity();
  Scalar log_det = Scalar(0);
  for (Index i = 0; i < k; ++i) {
    const Scalar d = ldlt.vectorD()[i];
    if (!(d > Scalar(0))) return -std::numeric_limits<Scalar>::infinity();
    log_det += std::log(d);
  }
  return log_det;
}

//! Probability of accepting the Gibbs move that replaces element i of S by
//! the proposal: min(1, det(L_{S_i->x'}) / det(L_S)).
template <typename Scalar, typename Kernel>
Scalar kdpp_accept_probability(Kernel&& kernel, std::vector<VectorX<Scalar>> S, Index i,
                               const VectorX<Scalar>& proposal) {
  const Scalar ld_old = kdpp_log_det<Scalar>(kernel, S);
  S[static_cast<std::size_t>(i)] = proposal;
  const Scalar ld_new = kdpp_log_det<Scalar>(kernel, S);
  if (ld_new == -std::numeric_limits<Scalar>::infinity()) return Scalar(0);
  return std::min(Scalar(1), std::exp(ld_new - ld_old));
}

template <typename Scalar>
struct KdppResult {
  std::vector<VectorX<Scalar>> points;
  //! No nonsingular initial set was found within budget; points are plain
  //! independent ground samples.
  bool degraded = false;
};

//! Metropolis-within-Gibbs sampler for a continuous k-DPP. Initializes with
//! k ground samples (resampling until the kernel minor is nonsingular), then
//! for each step replaces a uniformly chosen index by a fresh ground sample
//! with the determinant-ratio acceptance probability.
template <typename Scalar, typename Kernel, typename GroundSampler>
KdppResult<Scalar> sample_kdpp_gibbs(Kernel&& kernel, GroundSampler&& ground, const DppConfig& cfg,
                                     RngStream& rng) {
  cfg.validate();
  const int k = cfg.k;
  constexpr Scalar kSingular = Scalar(-690.77552789821368);  // log(1e-300)

  KdppResult<Scalar> out;
  out.points.reserve(k);
  Scalar log_det = -std::numeric_limits<Scalar>::infinity();
  for (int attempt = 0; attempt < cfg.init_attempts; ++attempt) {
    out.points.clear();
    for (int i = 0; i < k; ++i) out.points.push_back(ground(rng));
    log_det = kdpp_log_det<Scalar>(kernel, out.points);
    if (log_det > kSingular) break;
  }
  if (!(log_det > kSingular)) {
    out.points.clear();
    for (int i = 0; i < k; ++i) out.points.push_back(ground(rng));
    out.degraded = true;
    return out;
  }

  const int steps = cfg.effective_gibbs_steps();
  std::vector<VectorX<Scalar>> candidate = out.points;
  for (int step = 0; step < steps; ++step) {
    const auto i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(k)));
    VectorX<Scalar> proposal = ground(rng);
    candidate = out.points;
    candidate[i] = proposal;
    const Scalar ld_new = kdpp_log_det<Scalar>(kernel, candidate);
    const Scalar accept =
        ld_new == -std::numeric_limits<Scalar>::infinity()
            ? Scalar(0)
            : std::min(Scalar(1), std::exp(ld_new - log_det));
    if (Scalar(rng.uniform()) < accept) {
      out.points[i] = std::move(proposal);
      log_det = ld_new;
    }
  }
  return out;
}

template <typename Scalar>
struct BatchSelection {
  std::vector<VectorX<Scalar>> points;
  std::vector<std::string> flags;  // per-point, empty when clean
  Scalar final_lambda = Scalar(1);
  //! Low-dimensional queries (two-step methods only; empty otherwise).
  std::vector<VectorX<Scalar>> z_queries;
};

struct BatchConfig {
  OptimizerConfig opt;
  DppConfig dpp;
};

//! One round of batch selection: the first point minimizes the acquisition;
//! the remaining n_batch - 1 points are Gibbs-sampled from the k-DPP whose
//! kernel is the posterior covariance conditioned on the first point,
//! restricted to the relevant region.
template <typename Scalar>
BatchSelection<Scalar> select_batch(const GPPosterior<Scalar>& post,
                                    const BoxDomain<Scalar>& domain, int n_batch,
                                    const AcquisitionSpec<Scalar>& spec, const BatchConfig& cfg,
                                    RngStream& rng) {
  require(n_batch >= 1, "select_batch: n_batch must be >= 1");
  BatchSelection<Scalar> out;

  auto uniform_prior = [&](RngStream& r) { return domain.sample(r); };
  RngStream acq_rng = rng.child(1);
  const auto first = optimize_acquisition(post, spec, domain, cfg.opt, uniform_prior, acq_rng);
  out.points.push_back(first.x);
  out.flags.push_back(first.degraded ? "acq_degraded" : "");
  if (n_batch == 1) return out;

  RngStream ucb_rng = rng.child(2);
  const Scalar ucb_min = min_ucb(post, spec, domain, cfg.opt, ucb_rng);
  const auto cond = condition_on_pending(post, first.x);
  RelevantRegion<Scalar> region(post, spec, Scalar(cfg.dpp.lambda_init), ucb_min);

  DppConfig dpp = cfg.dpp;
  dpp.k = n_batch - 1;
  auto kernel = [&](const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
    return dpp_kernel_eval(cond, a, b);
  };
  auto ground = [&](RngStream& r) { return sample_relevant_region(region, domain, dpp, r); };
  RngStream gibbs_rng = rng.child(3);
  auto kres = sample_kdpp_gibbs<Scalar>(kernel, ground, dpp, gibbs_rng);

  std::string dpp_flag = kres.degraded ? "dpp_init_fallback" : "";
  if (region.lambda() > Scalar(cfg.dpp.lambda_init)) {
    if (!dpp_flag.empty()) dpp_flag += "|";
    dpp_flag += "lambda_escalated";
  }
  for (auto& p : kres.points) {
    out.points.push_back(std::move(p));
    out.flags.push_back(dpp_flag);
  }
  out.final_lambda = region.lambda();
  return out;
}

}  // namespace mahabo

#endif  // MAHABO_BATCH_DPP_HPP
