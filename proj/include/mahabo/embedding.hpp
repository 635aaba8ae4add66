#ifndef MAHABO_EMBEDDING_HPP
#define MAHABO_EMBEDDING_HPP

#include <utility>

#include "mahabo/box_domain.hpp"
#include "mahabo/rng.hpp"
#include "mahabo/types.hpp"

namespace mahabo {

//! A full-row-rank linear embedding B (d x D) with its Moore-Penrose
//! pseudo-inverse B+ = B^T (B B^T)^{-1} and null-space projector I - B+ B.
template <typename Scalar>
class LinearEmbedding {
 public:
  explicit LinearEmbedding(MatrixX<Scalar> B) : matrix_(std::move(B)) {
    require(matrix_.rows() >= 1 && matrix_.cols() >= matrix_.rows(),
            "LinearEmbedding: need 1 <= d <= D");
    const MatrixX<Scalar> gram = matrix_ * matrix_.transpose();  // d x d
    Eigen::LLT<MatrixX<Scalar>> llt(gram);
    if (llt.info() != Eigen::Success)
      throw NumericalError("LinearEmbedding: B B^T not positive definite (rank deficient?)");
    pinv_ = llt.solve(matrix_).transpose();  // D x d
    null_projector_ =
        MatrixX<Scalar>::Identity(matrix_.cols(), matrix_.cols()) - pinv_ * matrix_;
  }

  Index embed_dim() const { return matrix_.rows(); }
  Index input_dim() const { return matrix_.cols(); }
  const MatrixX<Scalar>& matrix() const { return matrix_; }
  const MatrixX<Scalar>& pseudo_inverse() const { return pinv_; }
  const MatrixX<Scalar>& null_projector() const { return null_projector_; }

 private:
  MatrixX<Scalar> matrix_;          // B
  MatrixX<Scalar> pinv_;            // B+
  MatrixX<Scalar> null_projector_;  // I - B+ B
};

//! B+ z. The result satisfies B (B+ z) = z but is not guaranteed to lie in
//! any particular box; callers clip and flag as needed.
template <typename Scalar, typename Derived>
VectorX<Scalar> pseudo_inverse_map(const LinearEmbedding<Scalar>& emb,
                                   const Eigen::MatrixBase<Derived>& z) {
  require(z.size() == emb.embed_dim(), "pseudo_inverse_map: dimension mismatch");
  return emb.pseudo_inverse() * z;
}

//! w = (I - B+ B) x, the part of x invisible to the embedding. Satisfies
//! B w = 0 and x = B+ (B x) + w.
template <typename Scalar, typename Derived>
VectorX<Scalar> null_space_component(const LinearEmbedding<Scalar>& emb,
                                     const Eigen::MatrixBase<Derived>& x) {
  require(x.size() == emb.input_dim(), "null_space_component: dimension mismatch");
  return x - emb.pseudo_inverse() * (emb.matrix() * x);
}

template <typename Scalar>
struct ReconstructionResult {
  VectorX<Scalar> x;
  bool converged = false;      // half squared residual reached tol
  bool used_fallback = false;  // init budget exhausted; clipped pseudo-inverse
  bool clipped = false;        // fallback output left the box and was clipped
  int starts_used = 0;
};

//! Randomized reconstruction of a preimage of z_q: gradient descent on
//! 1/2 ||B x - z_q||^2 with the exact line step
//! gamma = ||B^T r||^2 / ||B B^T r||^2, restarted from a fresh prior sample
//! whenever an iterate leaves the box. Each gradient lies in the row space
//! of B, so the null-space component of the output equals that of the
//! successful start. After init_budget failed starts the clipped
//! pseudo-inverse is returned, flagged.
template <typename Scalar, typename PriorSampler>
ReconstructionResult<Scalar> randomized_reconstruct(const LinearEmbedding<Scalar>& emb,
                                                    const VectorX<Scalar>& z_q,
                                                    PriorSampler&& prior_sampler,
                                                    const BoxDomain<Scalar>& domain,
                                                    RngStream& rng, Scalar tol = Scalar(1e-12),
                                                    int init_budget = 100) {
  require(z_q.size() == emb.embed_dim(), "randomized_reconstruct: dimension mismatch");
  const MatrixX<Scalar>& B = emb.matrix();
  constexpr int kMaxInner = 500;

  ReconstructionResult<Scalar> out;
  for (int attempt = 1; attempt <= init_budget; ++attempt) {
    VectorX<Scalar> x = prior_sampler(rng);
    int inner = 0;
    while (domain.contains(x)) {
      const VectorX<Scalar> r = B * x - z_q;
      if (Scalar(0.5) * r.squaredNorm() <= tol) {
        out.x = std::move(x);
        out.converged = true;
        out.starts_used = attempt;
        return out;
      }
      if (++inner > kMaxInner) break;  // stalled (ill-conditioned B); new start
      const VectorX<Scalar> bt_r = B.transpose() * r;
      const Scalar denom = (B * bt_r).squaredNorm();
      if (!(denom > Scalar(0))) break;
      const Scalar step = bt_r.squaredNorm() / denom;
      x -= step * bt_r;
    }
  }

  out.x = domain.clip(pseudo_inverse_map(emb, z_q));
  out.used_fallback = true;
  out.clipped = !domain.contains(pseudo_inverse_map(emb, z_q));
  out.converged = Scalar(0.5) * (B * out.x - z_q).squaredNorm() <= tol;
  out.starts_used = init_budget;
  return out;
}

//! Axis-aligned bounding box of the zonotope B X: per output axis i the
//! interval B c_i +/- sum_j |B_ij| hw_j, with c the box center and hw its
//! half-widths.
template <typename Scalar>
BoxDomain<Scalar> zonotope_bounding_box(const MatrixX<Scalar>& B,
                                        const BoxDomain<Scalar>& domain) {
  require(B.cols() == domain.dim(), "zonotope_bounding_box: dimension mismatch");
  const VectorX<Scalar> center = B * domain.center();
  const VectorX<Scalar> radius = B.cwiseAbs() * domain.half_width();
  require((radius.array() > Scalar(0)).all(),
          "zonotope_bounding_box: embedding has a zero row");
  return BoxDomain<Scalar>(center - radius, center + radius);
}

}  // namespace mahabo

#endif  // MAHABO_EMBEDDING_HPP
