#ifndef MAHABO_LBFGSB_HPP
#define MAHABO_LBFGSB_HPP

#include <deque>
#include <utility>

#include "mahabo/box_domain.hpp"
#include "mahabo/types.hpp"

namespace mahabo {

struct BoxLbfgsOptions {
  int max_iterations = 200;
  int memory = 8;
  double grad_tol = 1e-8;   // on the inf-norm of the projected gradient
  int max_line_search = 40;
  double armijo_c1 = 1e-4;
};

template <typename Scalar>
struct BoxLbfgsResult {
  VectorX<Scalar> x;
  Scalar value = Scalar(0);
  int iterations = 0;
  bool converged = false;
};

//! Limited-memory quasi-Newton minimization over a box: two-loop L-BFGS
//! direction, iterates projected onto the bounds, Armijo backtracking along
//! the projected path. Convergence is tested on the projected gradient
//! (components pointing out of an active bound are zeroed).
//!
//! Objective signature: Scalar f(const VectorX<Scalar>& x, VectorX<Scalar>& grad).
template <typename Scalar, typename Objective>
BoxLbfgsResult<Scalar> box_lbfgs_minimize(Objective&& f, VectorX<Scalar> x0,
                                          const BoxDomain<Scalar>& box,
                                          const BoxLbfgsOptions& opt = {}) {
  const Index n = x0.size();
  require(n == box.dim(), "box_lbfgs_minimize: dimension mismatch");

  auto projected_gradient = [&](const VectorX<Scalar>& x, const VectorX<Scalar>& g) {
    VectorX<Scalar> pg = g;
    for (Index i = 0; i < n; ++i) {
      if (x[i] <= box.lower()[i] && g[i] > Scalar(0)) pg[i] = Scalar(0);
      if (x[i] >= box.upper()[i] && g[i] < Scalar(0)) pg[i] = Scalar(0);
    }
    return pg;
  };

  BoxLbfgsResult<Scalar> res;
  res.x = box.clip(std::move(x0));
  VectorX<Scalar> g(n);
  res.value = f(res.x, g);

  std::deque<std::pair<VectorX<Scalar>, VectorX<Scalar>>> history;  // (s, y)

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it;
    const VectorX<Scalar> pg = projected_gradient(res.x, g);
    if (pg.template lpNorm<Eigen::Infinity>() <= Scalar(opt.grad_tol)) {
      res.converged = true;
      return res;
    }

    // Two-loop recursion on the raw gradient.
    VectorX<Scalar> q = g;
    std::vector<Scalar> alpha_hist(history.size());
    for (Index i = Index(history.size()) - 1; i >= 0; --i) {
      const auto& [s, yv] = history[i];
      const Scalar rho = Scalar(1) / s.dot(yv);
      alpha_hist[i] = rho * s.dot(q);
      q -= alpha_hist[i] * yv;
    }
    if (!history.empty()) {
      const auto& [s, yv] = history.back();
      q *= s.dot(yv) / yv.squaredNorm();
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto& [s, yv] = history[i];
      const Scalar rho = Scalar(1) / s.dot(yv);
      const Scalar beta = rho * yv.dot(q);
      q += (alpha_hist[i] - beta) * s;
    }
    VectorX<Scalar> dir = -q;
    if (dir.dot(g) >= Scalar(0)) dir = -pg;  // enforce descent

    // Backtracking along the projected path.
    Scalar t = Scalar(1);
    bool accepted = false;
    VectorX<Scalar> x_new, g_new;
    Scalar f_new = res.value;
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      x_new = box.clip(res.x + t * dir);
      const VectorX<Scalar> step = x_new - res.x;
      if (step.squaredNorm() == Scalar(0)) break;
      g_new.resize(n);
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) &&
          f_new <= res.value + Scalar(opt.armijo_c1) * g.dot(step)) {
        accepted = true;
        break;
      }
      t *= Scalar(0.5);
    }
    if (!accepted) {
      res.converged = pg.template lpNorm<Eigen::Infinity>() <= Scalar(10) * Scalar(opt.grad_tol);
      return res;
    }

    const VectorX<Scalar> s = x_new - res.x;
    const VectorX<Scalar> yv = g_new - g;
    const Scalar sy = s.dot(yv);
    if (sy > Scalar(1e-10) * s.norm() * yv.norm()) {
      history.emplace_back(s, yv);
      if (Index(history.size()) > opt.memory) history.pop_front();
    }
    res.x = std::move(x_new);
    g = std::move(g_new);
    res.value = f_new;
  }
  return res;
}

}  // namespace mahabo

#endif  // MAHABO_LBFGSB_HPP
