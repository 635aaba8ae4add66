#ifndef MAHABO_FIT_HPP
#define MAHABO_FIT_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mahabo/likelihood.hpp"
#include "mahabo/rng.hpp"

namespace mahabo {

//! Adam settings for marginal-likelihood maximization.
struct AdamConfig {
  double step = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int iterations = 500;
  int restarts = 4;
  double min_noise_var = 1e-8;
  //! Constrain the embedding to be diagonal (requires embed dim == input
  //! dim); this reproduces RBF-ARD fitting.
  bool constrain_diagonal = false;
  //! Record the LML value at every iterate of every run (diagnostics).
  bool record_trace = false;
};

template <typename Scalar>
struct FitResult {
  MahaKernelParams<Scalar> params;
  Scalar lml = -std::numeric_limits<Scalar>::infinity();
  //! LML at each initialization actually evaluated (warm starts first,
  //! then random restarts in order).
  std::vector<Scalar> init_lml;
  //! Per-iteration LML values of every run, concatenated in run order;
  //! filled only when cfg.record_trace is set.
  std::vector<Scalar> trace;
  //! A rank-deficiency perturb-and-refit pass was taken.
  bool rank_refit = false;
};

namespace detail {

// theta layout: [log gamma, log noise_var, vec(B) row-major].
template <typename Scalar>
VectorX<Scalar> pack_params(const MahaKernelParams<Scalar>& p) {
  const Index d = p.embed_dim(), D = p.input_dim();
  VectorX<Scalar> theta(2 + d * D);
  theta[0] = std::log(p.gamma);
  theta[1] = std::log(p.noise_var);
  for (Index i = 0; i < d; ++i)
    theta.segment(2 + i * D, D) = p.embedding.row(i).transpose();
  return theta;
}

template <typename Scalar>
MahaKernelParams<Scalar> unpack_params(const VectorX<Scalar>& theta, Index d, Index D,
                                       Scalar noise_var_fallback) {
  MahaKernelParams<Scalar> p;
  p.gamma = std::exp(theta[0]);
  p.noise_var = std::exp(theta[1]);
  if (!(p.noise_var > Scalar(0))) p.noise_var = noise_var_fallback;
  p.embedding.resize(d, D);
  for (Index i = 0; i < d; ++i)
    p.embedding.row(i) = theta.segment(2 + i * D, D).transpose();
  return p;
}

template <typename Scalar>
VectorX<Scalar> pack_gradient(const LogMarginalLikelihood<Scalar>& g, Index d, Index D) {
  VectorX<Scalar> grad(2 + d * D);
  grad[0] = g.d_log_gamma;
  grad[1] = g.d_log_noise_var;
  for (Index i = 0; i < d; ++i)
    grad.segment(2 + i * D, D) = g.d_embedding.row(i).transpose();
  return grad;
}

//! One Adam ascent run. Tracks the best iterate seen; numerical failures end
//! the run early (the best iterate so far, if any, survives).
template <typename Scalar>
bool adam_run(const MatrixX<Scalar>& X, const VectorX<Scalar>& y,
              MahaKernelParams<Scalar> start, const AdamConfig& cfg,
              MahaKernelParams<Scalar>& best_params, Scalar& best_lml,
              Scalar* init_lml_out, std::vector<Scalar>* trace) {
  const Index d = start.embedding.rows(), D = start.embedding.cols();
  VectorX<Scalar> theta = pack_params(start);
  VectorX<Scalar> m = VectorX<Scalar>::Zero(theta.size());
  VectorX<Scalar> v = VectorX<Scalar>::Zero(theta.size());
  const Scalar log_min_noise = std::log(Scalar(cfg.min_noise_var));

  bool any = false;
  for (int it = 0; it < cfg.iterations; ++it) {
    MahaKernelParams<Scalar> p = unpack_params(theta, d, D, Scalar(cfg.min_noise_var));
    LogMarginalLikelihood<Scalar> g;
    try {
      g = log_marginal_likelihood(X, y, p);
    } catch (const NumericalError&) {
      break;
    }
    if (!std::isfinite(g.value)) break;
    any = true;
    if (it == 0 && init_lml_out) *init_lml_out = g.value;
    if (trace) trace->push_back(g.value);
    if (g.value > best_lml) {
      best_lml = g.value;
      best_params = p;
    }

    VectorX<Scalar> grad = pack_gradient(g, d, D);
    if (cfg.constrain_diagonal) {
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < D; ++j)
          if (i != j) grad[2 + i * D + j] = Scalar(0);
    }

    const Scalar b1 = Scalar(cfg.beta1), b2 = Scalar(cfg.beta2);
    m = b1 * m + (Scalar(1) - b1) * grad;
    v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
    const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(it + 1));
    const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(it + 1));
    // ascent step
    theta += Scalar(cfg.step) *
             (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + Scalar(cfg.eps)).matrix());
    theta[1] = std::max(theta[1], log_min_noise);
  }

  // Score the final iterate too.
  MahaKernelParams<Scalar> p = unpack_params(theta, d, D, Scalar(cfg.min_noise_var));
  try {
    const auto g = log_marginal_likelihood(X, y, p);
    if (std::isfinite(g.value)) {
      any = true;
      if (trace) trace->push_back(g.value);
      if (g.value > best_lml) {
        best_lml = g.value;
        best_params = p;
      }
    }
  } catch (const NumericalError&) {
  }
  return any;
}

template <typename Scalar>
MahaKernelParams<Scalar> random_init(const VectorX<Scalar>& y, Index d, Index D,
                                     const AdamConfig& cfg, RngStream& rng) {
  MahaKernelParams<Scalar> p;
  const Scalar n = Scalar(y.size());
  const Scalar sd = std::sqrt((y.array() - y.mean()).square().sum() / std::max(n - 1, Scalar(1)));
  p.gamma = sd > Scalar(1e-12) ? sd : Scalar(1);
  p.noise_var = std::max(Scalar(1e-2) * p.gamma * p.gamma, Scalar(cfg.min_noise_var));
  p.embedding = MatrixX<Scalar>::Zero(d, D);
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(D));
  if (cfg.constrain_diagonal) {
    for (Index i = 0; i < d; ++i) p.embedding(i, i) = Scalar(rng.normal()) * scale;
  } else {
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < D; ++j) p.embedding(i, j) = Scalar(rng.normal()) * scale;
  }
  return p;
}

}  // namespace detail

//! Maximize the log marginal likelihood with Adam over (log gamma,
//! log noise_var, B). Runs cfg.restarts random initializations (embedding
//! entries i.i.d. Gaussian scaled by 1/sqrt(D)) plus any supplied warm
//! starts, and returns the parameters with the highest LML seen across all
//! iterates of all runs. A rank-deficient winning embedding is perturbed at
//! scale 1e-6 and refit once.
template <typename Scalar>
FitResult<Scalar> fit_hyperparameters(const MatrixX<Scalar>& X, const VectorX<Scalar>& y,
                                      Index embed_dim, const AdamConfig& cfg, RngStream& rng,
                                      const std::vector<MahaKernelParams<Scalar>>& warm_starts = {}) {
  require(X.rows() >= 2, "fit_hyperparameters: at least two observations required");
  require(embed_dim >= 1, "fit_hyperparameters: embed dim must be positive");
  require(embed_dim <= X.cols(), "fit_hyperparameters: embed dim exceeds input dim");
  require(!cfg.constrain_diagonal || embed_dim == X.cols(),
          "fit_hyperparameters: diagonal constraint requires embed dim == input dim");
  require(cfg.restarts + static_cast<int>(warm_starts.size()) >= 1,
          "fit_hyperparameters: no starts configured");

  const Index D = X.cols();
  FitResult<Scalar> result;
  bool any = false;

  auto run_from = [&](const MahaKernelParams<Scalar>& start) {
    Scalar init = -std::numeric_limits<Scalar>::infinity();
    const bool ok = detail::adam_run(X, y, start, cfg, result.params, result.lml, &init,
                                     cfg.record_trace ? &result.trace : nullptr);
    result.init_lml.push_back(init);
    any = any || ok;
  };

  for (const auto& w : warm_starts) run_from(w);
  for (int r = 0; r < cfg.restarts; ++r)
    run_from(detail::random_init(y, embed_dim, D, cfg, rng));

  if (!any) throw NumericalError("fit_hyperparameters: every start failed numerically");

  if (!result.params.has_full_row_rank(Scalar(1e-10))) {
    MahaKernelParams<Scalar> perturbed = result.params;
    for (Index i = 0; i < perturbed.embedding.rows(); ++i)
      for (Index j = 0; j < perturbed.embedding.cols(); ++j) {
        if (cfg.constrain_diagonal && i != j) continue;
        perturbed.embedding(i, j) += Scalar(1e-6) * Scalar(rng.normal());
      }
    result.rank_refit = true;
    detail::adam_run(X, y, perturbed, cfg, result.params, result.lml,
                     static_cast<Scalar*>(nullptr),
                     cfg.record_trace ? &result.trace : nullptr);
    if (!result.params.has_full_row_rank(Scalar(1e-10)))
      result.params = perturbed;  // perturbation itself restores generic rank
  }
  return result;
}

template <typename Scalar>
FitResult<Scalar> fit_hyperparameters(const Dataset<Scalar>& data, Index embed_dim,
                                      const AdamConfig& cfg, RngStream& rng,
                                      const std::vector<MahaKernelParams<Scalar>>& warm_starts = {}) {
  return fit_hyperparameters(data.points(), data.values(), embed_dim, cfg, rng, warm_starts);
}

}  // namespace mahabo

#endif  // MAHABO_FIT_HPP
