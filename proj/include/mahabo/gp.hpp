#ifndef MAHABO_GP_HPP
#define MAHABO_GP_HPP

#include <cmath>
#include <utility>

#include "mahabo/dataset.hpp"
#include "mahabo/kernel.hpp"
#include "mahabo/types.hpp"

namespace mahabo {

namespace detail {

//! Cholesky of C = K + noise_var I with escalating relative jitter
//! (0, then 1e-10 up to 1e-6 in decade steps). Returns the lower factor and
//! the jitter level that succeeded; throws NumericalError when even the
//! largest jitter fails.
template <typename Scalar>
std::pair<MatrixX<Scalar>, Scalar> cholesky_with_jitter(MatrixX<Scalar> C) {
  const Index n = C.rows();
  const Scalar scale = C.diagonal().mean();
  Scalar jitter = Scalar(0);
  for (int level = 0; level <= 5; ++level) {
    MatrixX<Scalar> Cj = C;
    if (jitter > Scalar(0)) Cj.diagonal().array() += jitter * scale;
    Eigen::LLT<MatrixX<Scalar>> llt(Cj);
    if (llt.info() == Eigen::Success) {
      MatrixX<Scalar> L = llt.matrixL();
      if (L.diagonal().minCoeff() > Scalar(0) && L.allFinite())
        return {std::move(L), jitter};
    }
    jitter = (level == 0) ? Scalar(1e-10) : jitter * Scalar(10);
  }
  throw NumericalError("Gram matrix not positive definite after jitter escalation (n=" +
                       std::to_string(n) + ")");
}

//! Clamp a computed posterior variance: small negative values from rounding
//! are truncated to zero, anything below the tolerance is a genuine failure.
template <typename Scalar>
Scalar clamp_variance(Scalar var, Scalar gamma) {
  if (var >= Scalar(0)) return var;
  const Scalar tol = Scalar(1e-10) * std::max(Scalar(1), gamma * gamma);
  if (var >= -tol) return Scalar(0);
  throw NumericalError("posterior variance negative beyond tolerance");
}

}  // namespace detail

//! Posterior covariance model over augmented inputs; carries no observed
//! values because the posterior covariance does not depend on them. Used as
//! the DPP kernel after conditioning on a pending query.
template <typename Scalar>
class ConditionedCovariance {
 public:
  ConditionedCovariance(MahaKernelParams<Scalar> params, MatrixX<Scalar> projected)
      : params_(std::move(params)), projected_(std::move(projected)) {
    MatrixX<Scalar> C = gram_projected(params_.gamma, projected_);
    C.diagonal().array() += params_.noise_var;
    auto [L, jitter] = detail::cholesky_with_jitter(std::move(C));
    chol_ = std::move(L);
    jitter_ = jitter;
  }

  const MahaKernelParams<Scalar>& params() const { return params_; }
  Index size() const { return projected_.rows(); }
  Scalar jitter() const { return jitter_; }

  VectorX<Scalar> project(const VectorX<Scalar>& x) const {
    require(x.size() == params_.input_dim(), "ConditionedCovariance: dimension mismatch");
    return params_.embedding * x;
  }

  //! Posterior covariance kappa(x, x2) given the conditioning inputs.
  Scalar cov(const VectorX<Scalar>& x, const VectorX<Scalar>& x2) const {
    const VectorX<Scalar> zx = project(x);
    const VectorX<Scalar> zy = project(x2);
    const Scalar prior = kernel_eval_projected(params_.gamma, zx, zy);
    const VectorX<Scalar> v1 = solve_lower(kernel_vector_projected(params_.gamma, projected_, zx));
    const VectorX<Scalar> v2 = solve_lower(kernel_vector_projected(params_.gamma, projected_, zy));
    return prior - v1.dot(v2);
  }

  Scalar var(const VectorX<Scalar>& x) const {
    const VectorX<Scalar> zx = project(x);
    const VectorX<Scalar> v = solve_lower(kernel_vector_projected(params_.gamma, projected_, zx));
    return detail::clamp_variance(params_.gamma * params_.gamma - v.squaredNorm(),
                                  params_.gamma);
  }

 private:
  VectorX<Scalar> solve_lower(const VectorX<Scalar>& b) const {
    return chol_.template triangularView<Eigen::Lower>().solve(b);
  }

  MahaKernelParams<Scalar> params_;
  MatrixX<Scalar> projected_;
  MatrixX<Scalar> chol_;
  Scalar jitter_ = Scalar(0);
};

//! Fitted Gaussian-process posterior. Immutable after construction; all
//! queries are const and safe to share across threads.
template <typename Scalar>
class GPPosterior {
 public:
  GPPosterior() = default;

  //! Fit from raw inputs (one row per point). With n = 0 the posterior is
  //! the prior: mean 0 and variance gamma^2 everywhere.
  GPPosterior(MahaKernelParams<Scalar> params, MatrixX<Scalar> inputs, VectorX<Scalar> targets)
      : params_(std::move(params)),
        train_inputs_(std::move(inputs)),
        train_targets_(std::move(targets)) {
    params_.validate();
    require(train_inputs_.rows() == train_targets_.size(),
            "GPPosterior: inputs/targets size mismatch");
    if (train_inputs_.rows() > 0) {
      require(train_inputs_.cols() == params_.input_dim(),
              "GPPosterior: input dimension mismatch");
      projected_ = train_inputs_ * params_.embedding.transpose();
      MatrixX<Scalar> C = gram_projected(params_.gamma, projected_);
      C.diagonal().array() += params_.noise_var;
      auto [L, jitter] = detail::cholesky_with_jitter(std::move(C));
      chol_ = std::move(L);
      jitter_ = jitter;
      alpha_ = chol_.template triangularView<Eigen::Lower>()
                   .transpose()
                   .solve(chol_.template triangularView<Eigen::Lower>().solve(train_targets_));
    } else {
      projected_.resize(0, params_.embed_dim());
    }
  }

  Index size() const { return train_inputs_.rows(); }
  const MahaKernelParams<Scalar>& params() const { return params_; }
  const MatrixX<Scalar>& train_inputs() const { return train_inputs_; }
  const MatrixX<Scalar>& train_projected() const { return projected_; }
  const VectorX<Scalar>& train_targets() const { return train_targets_; }
  const MatrixX<Scalar>& chol() const { return chol_; }
  const VectorX<Scalar>& alpha() const { return alpha_; }
  Scalar jitter() const { return jitter_; }

  VectorX<Scalar> project(const VectorX<Scalar>& x) const {
    require(x.size() == params_.input_dim(), "GPPosterior: dimension mismatch");
    return params_.embedding * x;
  }

  //! Posterior mean and variance at x.
  std::pair<Scalar, Scalar> mean_var(const VectorX<Scalar>& x) const {
    const Scalar g2 = params_.gamma * params_.gamma;
    if (size() == 0) return {Scalar(0), g2};
    const VectorX<Scalar> k = kernel_vector_projected(params_.gamma, projected_, project(x));
    const VectorX<Scalar> v = solve_lower(k);
    const Scalar mean = k.dot(alpha_);
    const Scalar var = detail::clamp_variance(g2 - v.squaredNorm(), params_.gamma);
    return {mean, var};
  }

  Scalar mean(const VectorX<Scalar>& x) const { return mean_var(x).first; }
  Scalar var(const VectorX<Scalar>& x) const { return mean_var(x).second; }
  Scalar sd(const VectorX<Scalar>& x) const { return std::sqrt(mean_var(x).second); }

  //! Posterior covariance kappa(x, x2).
  Scalar covariance(const VectorX<Scalar>& x, const VectorX<Scalar>& x2) const {
    const VectorX<Scalar> zx = project(x);
    const VectorX<Scalar> zy = project(x2);
    const Scalar prior = kernel_eval_projected(params_.gamma, zx, zy);
    if (size() == 0) return prior;
    const VectorX<Scalar> v1 = solve_lower(kernel_vector_projected(params_.gamma, projected_, zx));
    const VectorX<Scalar> v2 = solve_lower(kernel_vector_projected(params_.gamma, projected_, zy));
    return prior - v1.dot(v2);
  }

  Scalar best_observed() const {
    require(size() > 0, "GPPosterior::best_observed: empty posterior");
    return train_targets_.minCoeff();
  }

  VectorX<Scalar> solve_lower(const VectorX<Scalar>& b) const {
    return chol_.template triangularView<Eigen::Lower>().solve(b);
  }

  //! Full solve (K + noise I)^{-1} b through the factorization.
  VectorX<Scalar> solve(const VectorX<Scalar>& b) const {
    return chol_.template triangularView<Eigen::Lower>()
        .transpose()
        .solve(solve_lower(b));
  }

 private:
  MahaKernelParams<Scalar> params_;
  MatrixX<Scalar> train_inputs_;   // N x D
  MatrixX<Scalar> projected_;      // N x d
  VectorX<Scalar> train_targets_;  // N
  MatrixX<Scalar> chol_;           // lower factor of K + noise I
  VectorX<Scalar> alpha_;          // (K + noise I)^{-1} y
  Scalar jitter_ = Scalar(0);
};

template <typename Scalar>
GPPosterior<Scalar> fit_posterior(const Dataset<Scalar>& data,
                                  const MahaKernelParams<Scalar>& params) {
  return GPPosterior<Scalar>(params, data.points(), data.values());
}

template <typename Scalar>
GPPosterior<Scalar> fit_posterior(const MatrixX<Scalar>& inputs, const VectorX<Scalar>& targets,
                                  const MahaKernelParams<Scalar>& params) {
  return GPPosterior<Scalar>(params, inputs, targets);
}

template <typename Scalar>
std::pair<Scalar, Scalar> posterior_mean_var(const GPPosterior<Scalar>& post,
                                             const VectorX<Scalar>& x) {
  return post.mean_var(x);
}

//! Covariance model after committing to a pending query whose value is not
//! yet observed: the pending input joins the conditioning set with the same
//! noise variance, which requires no observed value.
template <typename Scalar>
ConditionedCovariance<Scalar> condition_on_pending(const GPPosterior<Scalar>& post,
                                                   const VectorX<Scalar>& x_pending) {
  const Index n = post.size();
  MatrixX<Scalar> projected(n + 1, post.params().embed_dim());
  if (n > 0) projected.topRows(n) = post.train_projected();
  projected.row(n) = (post.params().embedding * x_pending).transpose();
  return ConditionedCovariance<Scalar>(post.params(), std::move(projected));
}

}  // namespace mahabo

#endif  // MAHABO_GP_HPP
