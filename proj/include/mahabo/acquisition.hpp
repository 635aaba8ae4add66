#ifndef MAHABO_ACQUISITION_HPP
#define MAHABO_ACQUISITION_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mahabo/gp.hpp"
#include "mahabo/lbfgsb.hpp"
#include "mahabo/sobol.hpp"

namespace mahabo {

enum class AcquisitionMode { kFixedBeta, kEst };

//! Confidence-bound acquisition settings. The exploration term defaults to
//! the posterior standard deviation; variance_exploration switches to the
//! raw posterior variance.
template <typename Scalar>
struct AcquisitionSpec {
  Scalar beta = Scalar(2);
  AcquisitionMode mode = AcquisitionMode::kFixedBeta;
  Scalar min_estimate = -std::numeric_limits<Scalar>::infinity();  // EST only
  bool variance_exploration = false;

  void validate() const { require(beta >= Scalar(0), "AcquisitionSpec: beta must be >= 0"); }
};

template <typename Scalar>
Scalar exploration_term(const AcquisitionSpec<Scalar>& spec, Scalar variance) {
  return spec.variance_exploration ? variance : std::sqrt(variance);
}

//! Lower confidence bound mu(x) - beta * sd(x).
template <typename Scalar>
Scalar lcb_value(const GPPosterior<Scalar>& post, const AcquisitionSpec<Scalar>& spec,
                 const VectorX<Scalar>& x) {
  const auto [m, v] = post.mean_var(x);
  return m - spec.beta * exploration_term(spec, v);
}

//! Upper confidence bound mu(x) + beta * sd(x).
template <typename Scalar>
Scalar ucb_value(const GPPosterior<Scalar>& post, const AcquisitionSpec<Scalar>& spec,
                 const VectorX<Scalar>& x) {
  const auto [m, v] = post.mean_var(x);
  return m + spec.beta * exploration_term(spec, v);
}

template <typename Scalar>
struct AcquisitionGradient {
  VectorX<Scalar> grad;
  //! Standard deviation at x fell below 1e-12: the sd term is singular and
  //! only the mean gradient is returned.
  bool mean_only = false;
};

namespace detail {

//! Mean and variance gradients in one pass. Both lie in the row space of B:
//!   grad mu  = -2 B^T sum_i alpha_i k_i (Bx - z_i)
//!   grad var = +4 B^T sum_i u_i     k_i (Bx - z_i),  u = C^{-1} k.
template <typename Scalar>
void mean_var_gradients(const GPPosterior<Scalar>& post, const VectorX<Scalar>& x, Scalar& mean,
                        Scalar& var, VectorX<Scalar>& d_mean, VectorX<Scalar>& d_var) {
  const auto& params = post.params();
  const Index D = params.input_dim();
  const Scalar g2 = params.gamma * params.gamma;
  if (post.size() == 0) {
    mean = Scalar(0);
    var = g2;
    d_mean = VectorX<Scalar>::Zero(D);
    d_var = VectorX<Scalar>::Zero(D);
    return;
  }
  const VectorX<Scalar> zx = post.project(x);
  const MatrixX<Scalar> diffs = (-post.train_projected()).rowwise() + zx.transpose();  // N x d
  const VectorX<Scalar> k =
      (g2 * (-diffs.rowwise().squaredNorm().array()).exp()).matrix();
  const VectorX<Scalar> u = post.solve(k);
  mean = k.dot(post.alpha());
  var = detail::clamp_variance(g2 - k.dot(u), params.gamma);
  const VectorX<Scalar> amk = post.alpha().cwiseProduct(k);
  const VectorX<Scalar> umk = u.cwiseProduct(k);
  d_mean = Scalar(-2) * params.embedding.transpose() * (diffs.transpose() * amk);
  d_var = Scalar(4) * params.embedding.transpose() * (diffs.transpose() * umk);
}

}  // namespace detail

//! Analytic LCB gradient. Below sd = 1e-12 the square-root term is singular
//! and the mean gradient alone is returned, flagged.
template <typename Scalar>
AcquisitionGradient<Scalar> lcb_gradient(const GPPosterior<Scalar>& post,
                                         const AcquisitionSpec<Scalar>& spec,
                                         const VectorX<Scalar>& x) {
  Scalar mean, var;
  VectorX<Scalar> d_mean, d_var;
  detail::mean_var_gradients(post, x, mean, var, d_mean, d_var);
  AcquisitionGradient<Scalar> out;
  if (spec.variance_exploration) {
    out.grad = d_mean - spec.beta * d_var;
    return out;
  }
  const Scalar sd = std::sqrt(var);
  if (sd < Scalar(1e-12)) {
    out.grad = std::move(d_mean);
    out.mean_only = true;
    return out;
  }
  out.grad = d_mean - spec.beta * d_var / (Scalar(2) * sd);
  return out;
}

template <typename Scalar>
AcquisitionGradient<Scalar> ucb_gradient(const GPPosterior<Scalar>& post,
                                         const AcquisitionSpec<Scalar>& spec,
                                         const VectorX<Scalar>& x) {
  AcquisitionSpec<Scalar> flipped = spec;
  flipped.beta = -spec.beta;
  auto out = lcb_gradient(post, flipped, x);
  return out;
}

struct OptimizerConfig {
  enum class Mode { kVanillaGd, kQuasiNewton };
  int restarts = 5;
  Mode mode = Mode::kQuasiNewton;
  double gd_step = 0;  // 0 = auto: 1 / (||B||^2 * Lhat)
  double grad_tol = 1e-8;
  int max_steps = 1000;

  void validate() const {
    require(restarts >= 1, "OptimizerConfig: restarts must be >= 1");
    require(grad_tol > 0, "OptimizerConfig: grad_tol must be positive");
    require(max_steps >= 1, "OptimizerConfig: max_steps must be >= 1");
  }
};

template <typename Scalar>
struct AcqOptResult {
  VectorX<Scalar> x;
  Scalar value = std::numeric_limits<Scalar>::infinity();
  //! Initialization of the restart that produced x.
  VectorX<Scalar> init;
  //! Every descent left the box; x is the best boundary-clipped exit point.
  bool degraded = false;
};

namespace detail {

//! Fixed step size for vanilla gradient descent: 1 / (||B||_2^2 * Lhat) with
//! Lhat = 2 gamma^2 sum|alpha_i| + 4 beta gamma, a smoothness estimate of the
//! projected acquisition.
template <typename Scalar>
Scalar auto_gd_step(const GPPosterior<Scalar>& post, const AcquisitionSpec<Scalar>& spec) {
  const Scalar gamma = post.params().gamma;
  Scalar lhat = Scalar(4) * spec.beta * gamma;
  if (post.size() > 0)
    lhat += Scalar(2) * gamma * gamma * post.alpha().cwiseAbs().sum();
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(post.params().embedding);
  const Scalar bnorm2 = svd.singularValues()[0] * svd.singularValues()[0];
  return Scalar(1) / std::max(bnorm2 * std::max(lhat, Scalar(1e-12)), Scalar(1e-12));
}

}  // namespace detail

//! Multi-start acquisition minimization over the box.
//!
//! Each restart starts from a prior sample. Vanilla mode runs plain gradient
//! descent with a fixed step; a descent ends when the gradient is small, the
//! iterate leaves the box (that restart is discarded), or a step fails to
//! decrease the value. Since every gradient lies in the row space of B, the
//! null-space component of the iterate never changes. Quasi-Newton mode runs
//! the box-bounded L-BFGS instead and cannot leave the box. The best
//! converged candidate wins; if every vanilla descent exits the box, the
//! best boundary-clipped exit point is returned with the degraded flag set.
template <typename Scalar, typename PriorSampler>
AcqOptResult<Scalar> optimize_acquisition(const GPPosterior<Scalar>& post,
                                          const AcquisitionSpec<Scalar>& spec,
                                          const BoxDomain<Scalar>& domain,
                                          const OptimizerConfig& cfg, PriorSampler&& prior_sampler,
                                          RngStream& rng) {
  spec.validate();
  cfg.validate();

  AcqOptResult<Scalar> best;
  AcqOptResult<Scalar> best_exited;
  bool have_any = false, have_exited = false;

  for (int r = 0; r < cfg.restarts; ++r) {
    RngStream restart_rng = rng.child(static_cast<std::uint64_t>(r));
    VectorX<Scalar> x0 = prior_sampler(restart_rng);

    if (cfg.mode == OptimizerConfig::Mode::kQuasiNewton) {
      BoxLbfgsOptions opt;
      opt.max_iterations = cfg.max_steps;
      opt.grad_tol = cfg.grad_tol;
      auto objective = [&](const VectorX<Scalar>& x, VectorX<Scalar>& grad) {
        const auto g = lcb_gradient(post, spec, x);
        grad = g.grad;
        return lcb_value(post, spec, x);
      };
      auto res = box_lbfgs_minimize<Scalar>(objective, x0, domain, opt);
      if (!have_any || res.value < best.value) {
        best.x = res.x;
        best.value = res.value;
        best.init = x0;
        have_any = true;
      }
      continue;
    }

    // Vanilla gradient descent with fixed step.
    const Scalar step = cfg.gd_step > 0 ? Scalar(cfg.gd_step) : detail::auto_gd_step(post, spec);
    VectorX<Scalar> x = x0;
    Scalar fx = lcb_value(post, spec, x);
    bool exited = false;
    VectorX<Scalar> exit_point;
    for (int k = 0; k < cfg.max_steps; ++k) {
      const auto g = lcb_gradient(post, spec, x);
      if (g.grad.norm() < Scalar(cfg.grad_tol)) break;
      VectorX<Scalar> x_next = x - step * g.grad;
      if (!domain.contains(x_next)) {
        exited = true;
        exit_point = std::move(x_next);
        break;
      }
      const Scalar f_next = lcb_value(post, spec, x_next);
      if (f_next > fx + Scalar(1e-12)) break;  // fixed step overshoots: stop here
      x = std::move(x_next);
      fx = f_next;
    }
    if (exited) {
      VectorX<Scalar> clipped = domain.clip(exit_point);
      const Scalar fc = lcb_value(post, spec, clipped);
      if (!have_exited || fc < best_exited.value) {
        best_exited.x = std::move(clipped);
        best_exited.value = fc;
        best_exited.init = x0;
        have_exited = true;
      }
    } else if (!have_any || fx < best.value) {
      best.x = x;
      best.value = fx;
      best.init = x0;
      have_any = true;
    }
  }

  if (have_any) return best;
  best_exited.degraded = true;
  return best_exited;
}

//! EST quantities computed over an explicit candidate set: the minimum
//! estimate is min(mu - 3 sd) clipped to the best observed value, and beta
//! is the smallest ratio (mu - m_hat) / sd over the same candidates.
template <typename Scalar>
AcquisitionSpec<Scalar> est_spec_from_candidates(const GPPosterior<Scalar>& post,
                                                 const std::vector<VectorX<Scalar>>& candidates) {
  require(!candidates.empty(), "est_spec_from_candidates: empty candidate set");

  std::vector<std::pair<Scalar, Scalar>> stats;
  stats.reserve(candidates.size());
  Scalar m_hat =
      post.size() > 0 ? post.best_observed() : std::numeric_limits<Scalar>::infinity();
  for (const auto& c : candidates) {
    const auto [m, v] = post.mean_var(c);
    const Scalar sd = std::sqrt(v);
    stats.emplace_back(m, sd);
    m_hat = std::min(m_hat, m - Scalar(3) * sd);
  }
  Scalar beta = std::numeric_limits<Scalar>::infinity();
  for (const auto& [m, sd] : stats)
    beta = std::min(beta, (m - m_hat) / std::max(sd, Scalar(1e-12)));

  AcquisitionSpec<Scalar> spec;
  spec.mode = AcquisitionMode::kEst;
  spec.beta = std::max(beta, Scalar(0));
  spec.min_estimate = m_hat;
  return spec;
}

//! Adaptive beta per EST: candidates are a Sobol design over the domain, the
//! observed points, and a few multi-start minimizers of the posterior mean.
template <typename Scalar>
AcquisitionSpec<Scalar> est_beta(const GPPosterior<Scalar>& post, const BoxDomain<Scalar>& domain,
                                 Index candidates, RngStream& rng) {
  require(candidates >= 1, "est_beta: candidate count must be positive");
  std::vector<VectorX<Scalar>> cands;
  cands.reserve(static_cast<std::size_t>(candidates) + post.size() + 3);

  const MatrixX<Scalar> quasi = sobol_init(domain, candidates, 0);
  for (Index i = 0; i < quasi.rows(); ++i) cands.push_back(quasi.row(i).transpose());
  for (Index i = 0; i < post.size(); ++i)
    cands.push_back(post.train_inputs().row(i).transpose());

  // mean minimizers from a few quasi-Newton starts
  BoxLbfgsOptions opt;
  opt.max_iterations = 100;
  opt.grad_tol = 1e-6;
  auto mean_objective = [&](const VectorX<Scalar>& x, VectorX<Scalar>& grad) {
    Scalar mean, var;
    VectorX<Scalar> d_mean, d_var;
    detail::mean_var_gradients(post, x, mean, var, d_mean, d_var);
    grad = std::move(d_mean);
    return mean;
  };
  for (int r = 0; r < 3; ++r) {
    auto res = box_lbfgs_minimize<Scalar>(mean_objective, domain.sample(rng), domain, opt);
    cands.push_back(std::move(res.x));
  }
  return est_spec_from_candidates(post, cands);
}

}  // namespace mahabo

#endif  // MAHABO_ACQUISITION_HPP
