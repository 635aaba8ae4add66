#ifndef MAHABO_BOX_DOMAIN_HPP
#define MAHABO_BOX_DOMAIN_HPP

#include "mahabo/rng.hpp"
#include "mahabo/types.hpp"

namespace mahabo {

//! Axis-aligned box in R^D. Membership is exact: lower <= x <= upper
//! componentwise, boundary included.
template <typename Scalar>
class BoxDomain {
 public:
  BoxDomain() = default;

  BoxDomain(VectorX<Scalar> lower, VectorX<Scalar> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    require(lower_.size() == upper_.size(), "BoxDomain: bound sizes differ");
    require(lower_.size() > 0, "BoxDomain: empty bounds");
    require((lower_.array() < upper_.array()).all(),
            "BoxDomain: lower[i] < upper[i] required");
  }

  //! The box [-1, +1]^dim.
  static BoxDomain unit_symmetric(Index dim) {
    return BoxDomain(VectorX<Scalar>::Constant(dim, Scalar(-1)),
                     VectorX<Scalar>::Constant(dim, Scalar(1)));
  }

  Index dim() const { return lower_.size(); }
  const VectorX<Scalar>& lower() const { return lower_; }
  const VectorX<Scalar>& upper() const { return upper_; }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != lower_.size()) return false;
    return (x.array() >= lower_.array()).all() &&
           (x.array() <= upper_.array()).all();
  }

  VectorX<Scalar> clip(const VectorX<Scalar>& x) const {
    require(x.size() == lower_.size(), "BoxDomain::clip: dimension mismatch");
    return x.array().max(lower_.array()).min(upper_.array());
  }

  VectorX<Scalar> center() const { return (lower_ + upper_) / Scalar(2); }
  VectorX<Scalar> half_width() const { return (upper_ - lower_) / Scalar(2); }

  //! Uniform sample; consumes exactly dim() draws from the stream.
  VectorX<Scalar> sample(RngStream& rng) const {
    VectorX<Scalar> x(dim());
    for (Index i = 0; i < dim(); ++i)
      x[i] = static_cast<Scalar>(rng.uniform(static_cast<double>(lower_[i]),
                                             static_cast<double>(upper_[i])));
    return x;
  }

 private:
  VectorX<Scalar> lower_;
  VectorX<Scalar> upper_;
};

}  // namespace mahabo

#endif  // MAHABO_BOX_DOMAIN_HPP
