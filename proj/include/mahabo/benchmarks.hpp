#ifndef MAHABO_BENCHMARKS_HPP
#define MAHABO_BENCHMARKS_HPP

#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "mahabo/box_domain.hpp"
#include "mahabo/rng.hpp"
#include "mahabo/types.hpp"

namespace mahabo {

//! A low-dimensional benchmark objective on its native box domain, plus a
//! normalized view on [-1, +1]^d obtained by an affine rescale.
template <typename Scalar>
struct BaseFunction {
  std::string name;
  Index d_true = 0;
  BoxDomain<Scalar> native_domain;
  std::function<Scalar(const VectorX<Scalar>&)> eval;  // native coordinates

  //! Evaluate at z in [-1, +1]^d_true mapped affinely onto the native box.
  Scalar eval_normalized(const VectorX<Scalar>& z) const {
    require(z.size() == d_true, "BaseFunction: dimension mismatch");
    const VectorX<Scalar> x =
        native_domain.center().array() + native_domain.half_width().array() * z.array();
    return eval(x);
  }
};

template <typename Scalar = double>
BaseFunction<Scalar> branin() {
  BaseFunction<Scalar> f;
  f.name = "branin";
  f.d_true = 2;
  f.native_domain = BoxDomain<Scalar>((VectorX<Scalar>(2) << -5, 0).finished(),
                                      (VectorX<Scalar>(2) << 10, 15).finished());
  f.eval = [](const VectorX<Scalar>& x) {
    const Scalar pi = Scalar(3.14159265358979323846L);
    const Scalar a = 1, b = Scalar(5.1) / (4 * pi * pi), c = 5 / pi;
    const Scalar r = 6, s = 10, t = 1 / (8 * pi);
    const Scalar u = x[1] - b * x[0] * x[0] + c * x[0] - r;
    return a * u * u + s * (1 - t) * std::cos(x[0]) + s;
  };
  return f;
}

template <typename Scalar = double>
BaseFunction<Scalar> colville() {
  BaseFunction<Scalar> f;
  f.name = "colville";
  f.d_true = 4;
  f.native_domain = BoxDomain<Scalar>(VectorX<Scalar>::Constant(4, -10),
                                      VectorX<Scalar>::Constant(4, 10));
  f.eval = [](const VectorX<Scalar>& x) {
    const Scalar x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3];
    return 100 * std::pow(x1 * x1 - x2, Scalar(2)) + std::pow(x1 - 1, Scalar(2)) +
           std::pow(x3 - 1, Scalar(2)) + 90 * std::pow(x3 * x3 - x4, Scalar(2)) +
           Scalar(10.1) * (std::pow(x2 - 1, Scalar(2)) + std::pow(x4 - 1, Scalar(2))) +
           Scalar(19.8) * (x2 - 1) * (x4 - 1);
  };
  return f;
}

template <typename Scalar = double>
BaseFunction<Scalar> goldstein_price() {
  BaseFunction<Scalar> f;
  f.name = "goldstein-price";
  f.d_true = 2;
  f.native_domain =
      BoxDomain<Scalar>(VectorX<Scalar>::Constant(2, -2), VectorX<Scalar>::Constant(2, 2));
  f.eval = [](const VectorX<Scalar>& x) {
    const Scalar x1 = x[0], x2 = x[1];
    const Scalar u = x1 + x2 + 1;
    const Scalar v = 2 * x1 - 3 * x2;
    const Scalar t1 =
        1 + u * u * (19 - 14 * x1 + 3 * x1 * x1 - 14 * x2 + 6 * x1 * x2 + 3 * x2 * x2);
    const Scalar t2 =
        30 + v * v * (18 - 32 * x1 + 12 * x1 * x1 + 48 * x2 - 36 * x1 * x2 + 27 * x2 * x2);
    return t1 * t2;
  };
  return f;
}

template <typename Scalar = double>
BaseFunction<Scalar> hartmann6() {
  BaseFunction<Scalar> f;
  f.name = "hartmann6";
  f.d_true = 6;
  f.native_domain =
      BoxDomain<Scalar>(VectorX<Scalar>::Constant(6, 0), VectorX<Scalar>::Constant(6, 1));
  f.eval = [](const VectorX<Scalar>& x) {
    static const Scalar alpha[4] = {Scalar(1.0), Scalar(1.2), Scalar(3.0), Scalar(3.2)};
    static const Scalar A[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                   {0.05, 10, 17, 0.1, 8, 14},
                                   {3, 3.5, 1.7, 10, 17, 8},
                                   {17, 8, 0.05, 10, 0.1, 14}};
    static const Scalar P[4][6] = {
        {0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
        {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
        {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
        {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
    Scalar sum = 0;
    for (int i = 0; i < 4; ++i) {
      Scalar inner = 0;
      for (int j = 0; j < 6; ++j) {
        const Scalar d = x[j] - P[i][j];
        inner += A[i][j] * d * d;
      }
      sum += alpha[i] * std::exp(-inner);
    }
    return -sum;
  };
  return f;
}

template <typename Scalar = double>
BaseFunction<Scalar> six_hump_camel() {
  BaseFunction<Scalar> f;
  f.name = "six-hump-camel";
  f.d_true = 2;
  f.native_domain = BoxDomain<Scalar>((VectorX<Scalar>(2) << -3, -2).finished(),
                                      (VectorX<Scalar>(2) << 3, 2).finished());
  f.eval = [](const VectorX<Scalar>& x) {
    const Scalar x1 = x[0], x2 = x[1];
    return (4 - Scalar(2.1) * x1 * x1 + std::pow(x1, Scalar(4)) / 3) * x1 * x1 + x1 * x2 +
           (-4 + 4 * x2 * x2) * x2 * x2;
  };
  return f;
}

template <typename Scalar = double>
BaseFunction<Scalar> base_function_by_name(const std::string& name) {
  if (name == "branin") return branin<Scalar>();
  if (name == "colville") return colville<Scalar>();
  if (name == "goldstein-price") return goldstein_price<Scalar>();
  if (name == "hartmann6") return hartmann6<Scalar>();
  if (name == "six-hump-camel") return six_hump_camel<Scalar>();
  throw std::invalid_argument("unknown benchmark function: " + name);
}

//! High-dimensional objective f(x) = f_base(A x) on [-1, +1]^D, where the
//! rows of A are normalized to unit 1-norm so that A maps the box into
//! [-1, +1]^d_true exactly.
template <typename Scalar>
struct EmbeddedProblem {
  MatrixX<Scalar> A;  // d_true x D, row-normalized
  BaseFunction<Scalar> base;
  Scalar noise_sd = 0;
  BoxDomain<Scalar> domain;  // [-1, +1]^D

  Index dim() const { return A.cols(); }
};

//! Draw A with i.i.d. standard Gaussian entries and normalize each row by
//! its 1-norm. The domain is fixed to [-1, +1]^D.
template <typename Scalar>
EmbeddedProblem<Scalar> make_embedded_problem(BaseFunction<Scalar> base, Index D,
                                              Scalar noise_sd, RngStream& rng) {
  require(D >= base.d_true, "make_embedded_problem: D must be >= d_true");
  require(noise_sd >= Scalar(0), "make_embedded_problem: noise_sd must be >= 0");
  EmbeddedProblem<Scalar> p;
  p.A.resize(base.d_true, D);
  for (Index i = 0; i < base.d_true; ++i) {
    for (Index j = 0; j < D; ++j) p.A(i, j) = Scalar(rng.normal());
    const Scalar norm1 = p.A.row(i).cwiseAbs().sum();
    if (norm1 > Scalar(0)) p.A.row(i) /= norm1;
  }
  p.base = std::move(base);
  p.noise_sd = noise_sd;
  p.domain = BoxDomain<Scalar>::unit_symmetric(D);
  return p;
}

//! Noisy evaluation f_base(A x) + eps, eps ~ N(0, noise_sd^2). With
//! noise_sd = 0 the evaluation is deterministic and consumes no draws.
template <typename Scalar>
Scalar eval_objective(const EmbeddedProblem<Scalar>& problem, const VectorX<Scalar>& x,
                      RngStream& rng) {
  require(x.size() == problem.dim(), "eval_objective: dimension mismatch");
  require(problem.domain.contains(x), "eval_objective: point outside domain");
  const Scalar value = problem.base.eval_normalized(problem.A * x);
  if (problem.noise_sd == Scalar(0)) return value;
  return value + problem.noise_sd * Scalar(rng.normal());
}

}  // namespace mahabo

#endif  // MAHABO_BENCHMARKS_HPP
