#ifndef MAHABO_DATASET_HPP
#define MAHABO_DATASET_HPP

#include "mahabo/box_domain.hpp"
#include "mahabo/types.hpp"

namespace mahabo {

//! Ordered observations {(x_i, y_i)}. Append-only; every stored point is
//! validated against the domain on insertion and the insertion order is
//! preserved.
template <typename Scalar>
class Dataset {
 public:
  explicit Dataset(BoxDomain<Scalar> domain) : domain_(std::move(domain)) {
    points_.resize(0, domain_.dim());
    values_.resize(0);
  }

  Dataset(BoxDomain<Scalar> domain, MatrixX<Scalar> points, VectorX<Scalar> values)
      : domain_(std::move(domain)) {
    require(points.rows() == values.size(), "Dataset: points/values size mismatch");
    require(points.cols() == domain_.dim(), "Dataset: point dimension mismatch");
    for (Index i = 0; i < points.rows(); ++i)
      require(domain_.contains(points.row(i).transpose()),
              "Dataset: point outside domain");
    points_ = std::move(points);
    values_ = std::move(values);
  }

  const BoxDomain<Scalar>& domain() const { return domain_; }
  Index size() const { return points_.rows(); }
  Index dim() const { return domain_.dim(); }

  //! N x D matrix of points, one row per observation.
  const MatrixX<Scalar>& points() const { return points_; }
  const VectorX<Scalar>& values() const { return values_; }

  VectorX<Scalar> point(Index i) const { return points_.row(i).transpose(); }
  Scalar value(Index i) const { return values_[i]; }

  void append(const VectorX<Scalar>& x, Scalar y) {
    require(x.size() == domain_.dim(), "Dataset::append: dimension mismatch");
    require(domain_.contains(x), "Dataset::append: point outside domain");
    points_.conservativeResize(points_.rows() + 1, Eigen::NoChange);
    points_.row(points_.rows() - 1) = x.transpose();
    values_.conservativeResize(values_.size() + 1);
    values_[values_.size() - 1] = y;
  }

  //! Copy with values replaced (same points and domain); used e.g. for
  //! fitting against standardized observations.
  Dataset with_values(VectorX<Scalar> values) const {
    require(values.size() == values_.size(), "Dataset::with_values: size mismatch");
    Dataset out(domain_);
    out.points_ = points_;
    out.values_ = std::move(values);
    return out;
  }

 private:
  BoxDomain<Scalar> domain_;
  MatrixX<Scalar> points_;
  VectorX<Scalar> values_;
};

}  // namespace mahabo

#endif  // MAHABO_DATASET_HPP
