#ifndef MAHABO_LIKELIHOOD_HPP
#define MAHABO_LIKELIHOOD_HPP

#include <cmath>

#include "mahabo/dataset.hpp"
#include "mahabo/gp.hpp"
#include "mahabo/kernel.hpp"

namespace mahabo {

//! Log marginal likelihood of the data under the kernel, together with its
//! analytic gradient. gamma and noise_var are differentiated in log space,
//! embedding entries directly.
template <typename Scalar>
struct LogMarginalLikelihood {
  Scalar value = Scalar(0);
  Scalar d_log_gamma = Scalar(0);
  Scalar d_log_noise_var = Scalar(0);
  MatrixX<Scalar> d_embedding;  // d x D
};

//! value = -1/2 y^T (K + s2 I)^{-1} y - 1/2 log det(K + s2 I) - N/2 log(2 pi).
//! Gradients follow the trace identity d/dt = 1/2 tr((aa^T - C^{-1}) dC/dt).
template <typename Scalar>
LogMarginalLikelihood<Scalar> log_marginal_likelihood(const MatrixX<Scalar>& inputs,
                                                      const VectorX<Scalar>& targets,
                                                      const MahaKernelParams<Scalar>& params) {
  params.validate();
  const Index n = inputs.rows();
  require(n >= 1, "log_marginal_likelihood: at least one observation required");
  require(inputs.cols() == params.input_dim(), "log_marginal_likelihood: dimension mismatch");
  require(targets.size() == n, "log_marginal_likelihood: targets size mismatch");

  const MatrixX<Scalar> Z = inputs * params.embedding.transpose();  // N x d
  const MatrixX<Scalar> K = gram_projected(params.gamma, Z);
  MatrixX<Scalar> C = K;
  C.diagonal().array() += params.noise_var;
  auto [L, jitter] = detail::cholesky_with_jitter(std::move(C));
  (void)jitter;

  const VectorX<Scalar> alpha =
      L.template triangularView<Eigen::Lower>().transpose().solve(
          L.template triangularView<Eigen::Lower>().solve(targets));

  constexpr Scalar log_two_pi = Scalar(1.8378770664093454835606594728112L);
  LogMarginalLikelihood<Scalar> out;
  out.value = Scalar(-0.5) * targets.dot(alpha) -
              L.diagonal().array().log().sum() - Scalar(0.5) * Scalar(n) * log_two_pi;

  // M = alpha alpha^T - C^{-1}; W = M .* K drives all kernel gradients.
  MatrixX<Scalar> Cinv = MatrixX<Scalar>::Identity(n, n);
  L.template triangularView<Eigen::Lower>().solveInPlace(Cinv);
  L.template triangularView<Eigen::Lower>().transpose().solveInPlace(Cinv);

  const MatrixX<Scalar> M = alpha * alpha.transpose() - Cinv;
  const MatrixX<Scalar> W = M.cwiseProduct(K);

  out.d_log_gamma = W.sum();  // dK/dlog(gamma) = 2K
  out.d_log_noise_var = Scalar(0.5) * params.noise_var * (alpha.squaredNorm() - Cinv.trace());
  const VectorX<Scalar> s = W.rowwise().sum();
  out.d_embedding =
      Scalar(-2) * Z.transpose() * (s.asDiagonal() * inputs - W * inputs);
  return out;
}

template <typename Scalar>
LogMarginalLikelihood<Scalar> log_marginal_likelihood(const Dataset<Scalar>& data,
                                                      const MahaKernelParams<Scalar>& params) {
  return log_marginal_likelihood(data.points(), data.values(), params);
}

}  // namespace mahabo

#endif  // MAHABO_LIKELIHOOD_HPP
