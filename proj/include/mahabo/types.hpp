#ifndef MAHABO_TYPES_HPP
#define MAHABO_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mahabo {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

//! Linear-algebra step that cannot be completed (non-PD Gram matrix after
//! jitter escalation, singular embedding, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

//! The relevant region collapsed: lambda exceeded its cap during rejection
//! sampling.
class RegionDegenerateError : public NumericalError {
 public:
  explicit RegionDegenerateError(const std::string& what) : NumericalError(what) {}
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace mahabo

#endif  // MAHABO_TYPES_HPP
