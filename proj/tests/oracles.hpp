// Test-only oracles, kept independent of the library's computation paths:
// dense (factorization-free) GP solves from the textbook formulas, central
// finite differences, Kolmogorov-Smirnov and total-variation statistics, and
// principal angles between subspaces.
#ifndef MAHABO_TESTS_ORACLES_HPP
#define MAHABO_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mahabo/kernel.hpp"

namespace oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

//! Kernel matrix straight from the definition (no projection shortcut).
inline MatrixXd dense_gram(const mahabo::MahaKernelParams<double>& p, const MatrixXd& X) {
  const Eigen::Index n = X.rows();
  MatrixXd K(n, n);
  const MatrixXd M = p.embedding.transpose() * p.embedding;  // D x D
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const VectorXd d = (X.row(i) - X.row(j)).transpose();
      K(i, j) = p.gamma * p.gamma * std::exp(-d.dot(M * d));
    }
  return K;
}

inline VectorXd dense_kvec(const mahabo::MahaKernelParams<double>& p, const MatrixXd& X,
                           const VectorXd& x) {
  const Eigen::Index n = X.rows();
  VectorXd k(n);
  const MatrixXd M = p.embedding.transpose() * p.embedding;
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd d = X.row(i).transpose() - x;
    k(i) = p.gamma * p.gamma * std::exp(-d.dot(M * d));
  }
  return k;
}

//! Posterior mean/variance via an explicit dense inverse (no Cholesky).
struct DensePosterior {
  mahabo::MahaKernelParams<double> params;
  MatrixXd X;
  VectorXd y;
  MatrixXd Cinv;

  DensePosterior(const mahabo::MahaKernelParams<double>& p, const MatrixXd& X_in,
                 const VectorXd& y_in)
      : params(p), X(X_in), y(y_in) {
    MatrixXd C = dense_gram(p, X);
    C.diagonal().array() += p.noise_var;
    Cinv = C.inverse();
  }

  double mean(const VectorXd& x) const { return dense_kvec(params, X, x).dot(Cinv * y); }

  double var(const VectorXd& x) const {
    const VectorXd k = dense_kvec(params, X, x);
    return params.gamma * params.gamma - k.dot(Cinv * k);
  }

  double cov(const VectorXd& a, const VectorXd& b) const {
    const VectorXd ka = dense_kvec(params, X, a);
    const VectorXd kb = dense_kvec(params, X, b);
    const VectorXd d = (params.embedding * (a - b));
    const double prior = params.gamma * params.gamma * std::exp(-d.squaredNorm());
    return prior - ka.dot(Cinv * kb);
  }
};

//! Central finite difference of a scalar function of one coordinate.
template <typename F>
double central_difference(F&& f, double h = 1e-5) {
  return (f(h) - f(-h)) / (2.0 * h);
}

inline double relative_error(double approx, double exact) {
  const double denom = std::max({std::abs(approx), std::abs(exact), 1e-8});
  return std::abs(approx - exact) / denom;
}

//! One-sample Kolmogorov-Smirnov statistic against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max(d, std::abs((i + 1) / n - F));
    d = std::max(d, std::abs(i / n - F));
  }
  return d;
}

//! Asymptotic KS critical value at significance alpha.
inline double ks_critical(double alpha, std::size_t n) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

//! Total variation distance between two discrete distributions.
inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

//! Largest principal angle (radians) between the row spaces of A and B.
inline double principal_angle(const MatrixXd& A, const MatrixXd& B) {
  const auto qa = Eigen::HouseholderQR<MatrixXd>(A.transpose())
                      .householderQ() *
                  MatrixXd::Identity(A.cols(), A.rows());
  const auto qb = Eigen::HouseholderQR<MatrixXd>(B.transpose())
                      .householderQ() *
                  MatrixXd::Identity(B.cols(), B.rows());
  Eigen::JacobiSVD<MatrixXd> svd(qa.transpose() * qb);
  const double c = std::min(1.0, svd.singularValues().minCoeff());
  return std::acos(c);
}

}  // namespace oracles

#endif  // MAHABO_TESTS_ORACLES_HPP
