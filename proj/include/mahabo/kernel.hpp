#ifndef MAHABO_KERNEL_HPP
#define MAHABO_KERNEL_HPP

#include "mahabo/types.hpp"

namespace mahabo {

//! Hyperparameters of the Mahalanobis squared-exponential kernel
//!
//!   k(x, x') = gamma^2 exp( -(x - x')^T B^T B (x - x') ),
//!
//! with signal scale gamma > 0, embedding B (d x D) and observation noise
//! variance noise_var > 0. With d = D and diagonal B this is the RBF kernel
//! with automatic relevance determination; for any B it equals the
//! unit-lengthscale RBF kernel evaluated at the projected inputs Bx.
template <typename Scalar>
struct MahaKernelParams {
  Scalar gamma = Scalar(1);
  MatrixX<Scalar> embedding;  // B, d x D
  Scalar noise_var = Scalar(1e-2);

  Index input_dim() const { return embedding.cols(); }
  Index embed_dim() const { return embedding.rows(); }

  void validate() const {
    require(gamma > Scalar(0), "MahaKernelParams: gamma must be positive");
    require(noise_var > Scalar(0), "MahaKernelParams: noise_var must be positive");
    require(embedding.rows() >= 1 && embedding.cols() >= 1,
            "MahaKernelParams: embedding must be nonempty");
    require(embedding.rows() <= embedding.cols(),
            "MahaKernelParams: embed dim exceeds input dim");
  }

  //! Row rank check with relative tolerance on singular values.
  bool has_full_row_rank(Scalar rel_tol = Scalar(1e-10)) const {
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(embedding);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] <= Scalar(0)) return false;
    return sv[sv.size() - 1] > rel_tol * sv[0];
  }
};

//! Kernel value for already-projected inputs z = Bx, z' = Bx'.
template <typename Scalar, typename DerivedA, typename DerivedB>
Scalar kernel_eval_projected(Scalar gamma, const Eigen::MatrixBase<DerivedA>& z,
                             const Eigen::MatrixBase<DerivedB>& z2) {
  return gamma * gamma * std::exp(-(z - z2).squaredNorm());
}

//! Kernel value k(x, x2) = gamma^2 exp(-||B(x - x2)||^2). Symmetric in its
//! arguments and bounded by gamma^2.
template <typename Scalar, typename DerivedA, typename DerivedB>
Scalar kernel_eval(const MahaKernelParams<Scalar>& params,
                   const Eigen::MatrixBase<DerivedA>& x,
                   const Eigen::MatrixBase<DerivedB>& x2) {
  require(x.size() == params.input_dim() && x2.size() == params.input_dim(),
          "kernel_eval: dimension mismatch");
  return Scalar(params.gamma * params.gamma) *
         std::exp(-(params.embedding * (x - x2)).squaredNorm());
}

//! Gram matrix of projected inputs: projected is N x d with rows z_i = Bx_i,
//! result(i, j) = gamma^2 exp(-||z_i - z_j||^2).
template <typename Scalar>
MatrixX<Scalar> gram_projected(Scalar gamma, const MatrixX<Scalar>& projected) {
  const Index n = projected.rows();
  const VectorX<Scalar> sq = projected.rowwise().squaredNorm();
  MatrixX<Scalar> dist2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                          Scalar(2) * (projected * projected.transpose());
  dist2 = dist2.cwiseMax(Scalar(0));  // guard tiny negative from cancellation
  return (gamma * gamma) * (-dist2).array().exp().matrix();
}

//! Kernel vector between projected training rows and one projected query.
template <typename Scalar, typename Derived>
VectorX<Scalar> kernel_vector_projected(Scalar gamma, const MatrixX<Scalar>& projected,
                                        const Eigen::MatrixBase<Derived>& z) {
  return (gamma * gamma) *
         (-(projected.rowwise() - z.transpose()).rowwise().squaredNorm().array())
             .exp()
             .matrix();
}

}  // namespace mahabo

#endif  // MAHABO_KERNEL_HPP
