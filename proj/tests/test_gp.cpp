#include <doctest.h>

#include <cmath>

#include "mahabo/dataset.hpp"
#include "mahabo/fit.hpp"
#include "mahabo/gp.hpp"
#include "mahabo/likelihood.hpp"
#include "oracles.hpp"

using namespace mahabo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MahaKernelParams<double> random_params(RngStream& rng, Index d, Index D, double gamma = 0,
                                       double noise_var = 0) {
  MahaKernelParams<double> p;
  p.gamma = gamma > 0 ? gamma : rng.uniform(0.5, 2.0);
  p.noise_var = noise_var > 0 ? noise_var : rng.uniform(1e-3, 1e-1);
  p.embedding = MatrixXd::NullaryExpr(
      d, D, [&](Eigen::Index) { return rng.normal() / std::sqrt(double(D)); });
  return p;
}

MatrixXd random_points(RngStream& rng, Index n, Index D, double lo = -1, double hi = 1) {
  return MatrixXd::NullaryExpr(n, D, [&](Eigen::Index) { return rng.uniform(lo, hi); });
}

VectorXd random_vector(RngStream& rng, Index n) {
  return VectorXd::NullaryExpr(n, [&](Eigen::Index) { return rng.normal(); });
}

}  // namespace

TEST_SUITE_BEGIN("gp");

TEST_CASE("kernel: zero distance gives gamma squared") {
  RngStream rng(1);
  MahaKernelParams<double> p = random_params(rng, 2, 6, 1.5);
  const VectorXd x = random_vector(rng, 6);
  CHECK(kernel_eval(p, x, x) == doctest::Approx(2.25).epsilon(1e-14));
}

TEST_CASE("kernel: degenerate zero embedding gives constant one") {
  RngStream rng(2);
  MahaKernelParams<double> p;
  p.gamma = 1.0;
  p.noise_var = 1e-2;
  p.embedding = MatrixXd::Zero(2, 4);
  const VectorXd x = random_vector(rng, 4);
  const VectorXd x2 = random_vector(rng, 4);
  CHECK(kernel_eval(p, x, x2) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("kernel: hand-evaluated projection") {
  // B = [1 0 0] keeps only the first coordinate of the difference.
  MahaKernelParams<double> p;
  p.gamma = 1.0;
  p.noise_var = 1e-2;
  p.embedding = (MatrixXd(1, 3) << 1, 0, 0).finished();
  VectorXd x(3), x2(3);
  x << 0.5, 7.0, -3.0;
  x2.setZero();
  CHECK(kernel_eval(p, x, x2) == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));
  CHECK(kernel_eval(p, x, x2) == doctest::Approx(0.7788008).epsilon(1e-6));
  CHECK(kernel_eval(p, x, x2) == doctest::Approx(kernel_eval(p, x2, x)).epsilon(1e-15));
}

TEST_CASE("kernel: dimension mismatch is rejected") {
  RngStream rng(3);
  MahaKernelParams<double> p = random_params(rng, 1, 3);
  CHECK_THROWS_AS((void)kernel_eval(p, random_vector(rng, 4), random_vector(rng, 4)),
                  std::invalid_argument);
}

TEST_CASE("kernel: gram matrices are symmetric PSD") {
  RngStream rng(4);
  for (int rep = 0; rep < 5; ++rep) {
    MahaKernelParams<double> p = random_params(rng, 2, 8);
    const MatrixXd X = random_points(rng, 10, 8);
    const MatrixXd K = gram_projected(p.gamma, MatrixXd(X * p.embedding.transpose()));
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(K);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * es.eigenvalues().maxCoeff());
    CHECK(K.maxCoeff() <= p.gamma * p.gamma * (1 + 1e-12));
  }
}

TEST_CASE("posterior: empty dataset recovers the prior") {
  RngStream rng(5);
  MahaKernelParams<double> p = random_params(rng, 2, 5, 1.7);
  auto post = fit_posterior<double>(MatrixXd(0, 5), VectorXd(0), p);
  for (int i = 0; i < 10; ++i) {
    const auto [m, v] = post.mean_var(random_vector(rng, 5));
    CHECK(m == doctest::Approx(0.0));
    CHECK(v == doctest::Approx(1.7 * 1.7).epsilon(1e-14));
  }
}

TEST_CASE("posterior: single observation closed form") {
  RngStream rng(6);
  MahaKernelParams<double> p = random_params(rng, 1, 4, 1.3, 0.05);
  const MatrixXd X = random_points(rng, 1, 4);
  VectorXd y(1);
  y << 0.8;
  auto post = fit_posterior(X, y, p);
  const double g2 = p.gamma * p.gamma;
  const auto [m, v] = post.mean_var(X.row(0).transpose());
  CHECK(m == doctest::Approx(g2 / (g2 + p.noise_var) * y[0]).epsilon(1e-12));
  CHECK(v == doctest::Approx(g2 - g2 * g2 / (g2 + p.noise_var)).epsilon(1e-12));
}

TEST_CASE("posterior: factorized solve matches a dense inverse") {
  RngStream rng(7);
  for (Index n : {20, 50}) {
    MahaKernelParams<double> p = random_params(rng, 2, 10);
    const MatrixXd X = random_points(rng, n, 10);
    const VectorXd y = random_vector(rng, n);
    auto post = fit_posterior(X, y, p);
    oracles::DensePosterior dense(p, X, y);
    for (int q = 0; q < 20; ++q) {
      const VectorXd x = random_points(rng, 1, 10).row(0).transpose();
      const auto [m, v] = post.mean_var(x);
      CHECK(std::abs(m - dense.mean(x)) < 1e-8);
      CHECK(std::abs(v - dense.var(x)) < 1e-8);
    }
  }
}

TEST_CASE("posterior: cholesky factor reconstructs the gram matrix") {
  RngStream rng(8);
  MahaKernelParams<double> p = random_params(rng, 3, 12);
  const Index n = 25;
  const MatrixXd X = random_points(rng, n, 12);
  auto post = fit_posterior(X, random_vector(rng, n), p);
  MatrixXd C = oracles::dense_gram(p, X);
  C.diagonal().array() += p.noise_var;
  const MatrixXd recon = post.chol() * post.chol().transpose();
  CHECK((recon - C).norm() / C.norm() < 1e-8);
}

TEST_CASE("posterior: variance at training points is at most the noise") {
  RngStream rng(9);
  MahaKernelParams<double> p = random_params(rng, 2, 6, 1.0, 1e-2);
  // well separated points
  MatrixXd X(5, 6);
  for (int i = 0; i < 5; ++i)
    X.row(i) = (3.0 * i) * VectorXd::Ones(6).transpose() / 6.0;
  auto post = fit_posterior(X, random_vector(rng, 5), p);
  for (int i = 0; i < 5; ++i)
    CHECK(post.var(X.row(i).transpose()) <= p.noise_var + 1e-6);
}

TEST_CASE("posterior: projected-space equivalence of mean and covariance") {
  // The flagship identity: the high-dimensional posterior equals the
  // low-dimensional RBF posterior at projected inputs.
  RngStream rng(10);
  for (int rep = 0; rep < 10; ++rep) {
    const Index D = 1 + Index(rng.below(40)), d = 1 + Index(rng.below(4));
    if (d > D) continue;
    const Index n = 2 + Index(rng.below(25));
    MahaKernelParams<double> p = random_params(rng, d, D);
    const MatrixXd X = random_points(rng, n, D);
    const VectorXd y = random_vector(rng, n);
    auto post = fit_posterior(X, y, p);

    MahaKernelParams<double> zp;
    zp.gamma = p.gamma;
    zp.noise_var = p.noise_var;
    zp.embedding = MatrixXd::Identity(d, d);
    auto z_post = fit_posterior<double>(X * p.embedding.transpose(), y, zp);

    for (int q = 0; q < 10; ++q) {
      const VectorXd a = random_points(rng, 1, D).row(0).transpose();
      const VectorXd b = random_points(rng, 1, D).row(0).transpose();
      const VectorXd za = p.embedding * a, zb = p.embedding * b;
      CHECK(std::abs(post.mean(a) - z_post.mean(za)) < 1e-8);
      CHECK(std::abs(post.var(a) - z_post.var(za)) < 1e-8);
      CHECK(std::abs(post.covariance(a, b) - z_post.covariance(za, zb)) < 1e-8);
    }
  }
}

TEST_CASE("posterior: non-PD failure after jitter escalation throws") {
  // An overflowed signal scale produces a non-finite Gram matrix that no
  // jitter level can factorize.
  MahaKernelParams<double> p;
  p.gamma = 1e200;
  p.noise_var = 1e-2;
  p.embedding = MatrixXd::Identity(2, 2);
  MatrixXd X = MatrixXd::Random(6, 2);
  VectorXd y = VectorXd::Zero(6);
  CHECK_THROWS_AS((void)fit_posterior(X, y, p), NumericalError);
}

TEST_CASE("lml: scalar closed form") {
  MahaKernelParams<double> p;
  p.gamma = 1.0;
  p.noise_var = 1.0;
  p.embedding = MatrixXd::Identity(1, 1);
  MatrixXd X(1, 1);
  X << 0.3;
  VectorXd y(1);
  y << 2.0;
  const auto lml = log_marginal_likelihood(X, y, p);
  constexpr double pi = 3.14159265358979323846;
  CHECK(lml.value == doctest::Approx(-1.0 - 0.5 * std::log(4.0 * pi)).epsilon(1e-12));
}

TEST_CASE("lml: analytic gradient matches central differences") {
  RngStream rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    const Index d = 2, D = 5, n = 10;
    MahaKernelParams<double> p = random_params(rng, d, D);
    const MatrixXd X = random_points(rng, n, D);
    const VectorXd y = random_vector(rng, n);
    const auto g = log_marginal_likelihood(X, y, p);

    auto value_at = [&](const MahaKernelParams<double>& q) {
      return log_marginal_likelihood(X, y, q).value;
    };

    const double fd_lg = oracles::central_difference([&](double h) {
      MahaKernelParams<double> q = p;
      q.gamma = std::exp(std::log(p.gamma) + h);
      return value_at(q);
    });
    CHECK(oracles::relative_error(fd_lg, g.d_log_gamma) < 1e-4);

    const double fd_ln = oracles::central_difference([&](double h) {
      MahaKernelParams<double> q = p;
      q.noise_var = std::exp(std::log(p.noise_var) + h);
      return value_at(q);
    });
    CHECK(oracles::relative_error(fd_ln, g.d_log_noise_var) < 1e-4);

    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < D; ++j) {
        const double fd = oracles::central_difference([&](double h) {
          MahaKernelParams<double> q = p;
          q.embedding(i, j) += h;
          return value_at(q);
        });
        CHECK(oracles::relative_error(fd, g.d_embedding(i, j)) < 1e-4);
      }
  }
}

TEST_CASE("lml: stays finite when an observation matches the mean at huge noise") {
  RngStream rng(12);
  MahaKernelParams<double> p = random_params(rng, 1, 3, 1.0, 1e6);
  MatrixXd X = random_points(rng, 4, 3);
  VectorXd y = random_vector(rng, 4);
  auto post = fit_posterior(X, y, p);

  const VectorXd x_new = random_points(rng, 1, 3).row(0).transpose();
  const double y_new = post.mean(x_new);
  MatrixXd X2(5, 3);
  X2 << X, x_new.transpose();
  VectorXd y2(5);
  y2 << y, y_new;

  const auto before = log_marginal_likelihood(X, y, p);
  const auto after = log_marginal_likelihood(X2, y2, p);
  CHECK(std::isfinite(before.value));
  CHECK(std::isfinite(after.value));
  CHECK(after.d_embedding.allFinite());
}

TEST_CASE("fit: recovers a planted one-dimensional embedding") {
  RngStream rng(13);
  const Index D = 6, n = 60;
  MatrixXd A(1, D);
  for (Index j = 0; j < D; ++j) A(0, j) = rng.normal();
  A /= A.cwiseAbs().sum();

  const MatrixXd X = random_points(rng, n, D);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const double z = (A * X.row(i).transpose())[0];
    y[i] = 9.0 * z * z + std::sin(6.0 * z);
  }

  AdamConfig cfg;
  RngStream fit_rng = rng.child(99);
  const auto fit = fit_hyperparameters(X, y, 1, cfg, fit_rng);
  CHECK(fit.params.has_full_row_rank());
  const double angle_deg = oracles::principal_angle(A, fit.params.embedding) * 180.0 /
                           3.14159265358979323846;
  CHECK(angle_deg < 10.0);

  // argmax property: the returned parameters beat every initialization
  for (const double init : fit.init_lml) CHECK(fit.lml >= init - 1e-12);
}

TEST_CASE("fit: diagonal constraint reproduces a dedicated ARD path") {
  RngStream rng(14);
  const Index D = 4, n = 14;
  const MatrixXd X = random_points(rng, n, D);
  const VectorXd y = random_vector(rng, n);

  MahaKernelParams<double> start;
  start.gamma = 1.1;
  start.noise_var = 0.05;
  start.embedding = MatrixXd::Zero(D, D);
  for (Index i = 0; i < D; ++i) start.embedding(i, i) = 0.2 + 0.1 * double(i);

  AdamConfig cfg;
  cfg.iterations = 60;
  cfg.restarts = 0;
  cfg.constrain_diagonal = true;
  cfg.record_trace = true;
  RngStream fit_rng(77);
  const auto fit = fit_hyperparameters(X, y, D, cfg, fit_rng, {start});

  // Dedicated ARD path: Adam over (log gamma, log noise, diag entries) only.
  VectorXd theta(2 + D);
  theta[0] = std::log(start.gamma);
  theta[1] = std::log(start.noise_var);
  for (Index i = 0; i < D; ++i) theta[2 + i] = start.embedding(i, i);
  VectorXd m = VectorXd::Zero(theta.size()), v = VectorXd::Zero(theta.size());
  std::vector<double> trace;
  double best = -std::numeric_limits<double>::infinity();
  auto unpack = [&](const VectorXd& th) {
    MahaKernelParams<double> q;
    q.gamma = std::exp(th[0]);
    q.noise_var = std::exp(th[1]);
    q.embedding = MatrixXd::Zero(D, D);
    for (Index i = 0; i < D; ++i) q.embedding(i, i) = th[2 + i];
    return q;
  };
  for (int it = 0; it <= cfg.iterations; ++it) {
    const auto g = log_marginal_likelihood(X, y, unpack(theta));
    trace.push_back(g.value);
    best = std::max(best, g.value);
    if (it == cfg.iterations) break;
    VectorXd grad(2 + D);
    grad[0] = g.d_log_gamma;
    grad[1] = g.d_log_noise_var;
    for (Index i = 0; i < D; ++i) grad[2 + i] = g.d_embedding(i, i);
    m = cfg.beta1 * m + (1 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1 - cfg.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(cfg.beta1, it + 1);
    const double c2 = 1 - std::pow(cfg.beta2, it + 1);
    theta += cfg.step * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + cfg.eps).matrix());
    theta[1] = std::max(theta[1], std::log(cfg.min_noise_var));
  }

  REQUIRE(fit.trace.size() == trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i)
    CHECK(fit.trace[i] == doctest::Approx(trace[i]).epsilon(1e-8));
  CHECK(fit.lml == doctest::Approx(best).epsilon(1e-8));
  // off-diagonal entries never move
  for (Index i = 0; i < D; ++i)
    for (Index j = 0; j < D; ++j)
      if (i != j) CHECK(fit.params.embedding(i, j) == 0.0);
}

TEST_CASE("fit: requires at least two observations") {
  RngStream rng(15);
  AdamConfig cfg;
  CHECK_THROWS_AS(
      (void)fit_hyperparameters<double>(MatrixXd::Zero(1, 3), VectorXd::Zero(1), 1, cfg, rng),
      std::invalid_argument);
}

TEST_SUITE_END();
