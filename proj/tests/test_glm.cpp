#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "mirem/glm.hpp"

using namespace mirem;

namespace {

// Zooming grid search: evaluate a (2r+1)^d lattice, recentre on the best point, shrink.
Eigen::VectorXd grid_maximize(const std::function<double(const Eigen::VectorXd&)>& f, int d, double radius,
                              int r, int levels) {
  Eigen::VectorXd centre = Eigen::VectorXd::Zero(d);
  for (int level = 0; level < levels; ++level) {
    const double step = radius / r;
    Eigen::VectorXd best = centre;
    double best_f = f(centre);
    std::vector<int> idx(d, -r);
    while (true) {
      Eigen::VectorXd x = centre;
      for (int k = 0; k < d; ++k) x[k] += idx[k] * step;
      const double v = f(x);
      if (v > best_f) {
        best_f = v;
        best = x;
      }
      int k = 0;
      while (k < d && ++idx[k] > r) idx[k++] = -r;
      if (k == d) break;
    }
    centre = best;
    radius = 2.0 * step;
  }
  return centre;
}

struct Toy {
  Eigen::MatrixXd X;
  Eigen::VectorXd y, w;
};

Toy binary_toy() {
  Toy t;
  t.X.resize(8, 2);
  t.X.col(0).setOnes();
  t.X.col(1) << -1.5, -0.7, -0.2, 0.0, 0.4, 0.9, 1.3, 2.0;
  t.y.resize(8);
  t.y << 0, 0, 1, 0, 1, 0, 1, 1;
  t.w = Eigen::VectorXd::Ones(8);
  return t;
}

}  // namespace

TEST_CASE("binary ridge fit matches a grid-search maximizer") {
  const Toy t = binary_toy();
  for (double lambda : {0.0, 0.5, 3.0}) {
    FitOptions o;
    o.lambda = lambda;
    o.tol = 1e-12;
    const FitResult fit = fit_weighted_ridge_binary(t.X, t.y, t.w, o);
    REQUIRE(fit.converged);
    const auto f = [&](const Eigen::VectorXd& b) { return binary_penalized_loglik(t.X, t.y, t.w, b, lambda); };
    const Eigen::VectorXd oracle = grid_maximize(f, 2, 8.0, 40, 10);
    CHECK(std::abs(fit.coefficients[0] - oracle[0]) < 1e-4);
    CHECK(std::abs(fit.coefficients[1] - oracle[1]) < 1e-4);
  }
}

TEST_CASE("trinomial ridge fit matches a grid-search maximizer") {
  Eigen::MatrixXd X(3, 2);
  X << 1, -1.0, 1, 0.3, 1, 1.2;
  Eigen::VectorXd y(3), w = Eigen::VectorXd::Ones(3);
  y << 0, 2, 1;
  const double lambda = 1.0;
  FitOptions o;
  o.lambda = lambda;
  o.tol = 1e-12;
  const FitResult fit = fit_weighted_ridge_trinomial(X, y, w, o);
  REQUIRE(fit.converged);
  const auto f = [&](const Eigen::VectorXd& b) { return trinomial_penalized_loglik(X, y, w, b, lambda); };
  const Eigen::VectorXd oracle = grid_maximize(f, 4, 4.0, 8, 12);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(fit.coefficients[k] - oracle[k]) < 1e-3);
}

TEST_CASE("analytic gradients and information agree with finite differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const int n = 30, d = 4;
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd yb(n), yt(n), w(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (int j = 1; j < d; ++j) X(i, j) = nd(rng);
    yb[i] = i % 3 == 0;
    yt[i] = i % 3;
    w[i] = 0.2 + std::abs(nd(rng));
  }
  const double lambda = 0.7, h = 1e-6;
  Eigen::VectorXd b(d), bt(2 * d);
  for (int j = 0; j < d; ++j) b[j] = 0.3 * nd(rng);
  for (int j = 0; j < 2 * d; ++j) bt[j] = 0.3 * nd(rng);

  const Eigen::VectorXd g = binary_gradient(X, yb, w, b, lambda);
  const Eigen::MatrixXd I = binary_information(X, w, b, lambda);
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd up = b, dn = b;
    up[j] += h;
    dn[j] -= h;
    const double fd = (binary_penalized_loglik(X, yb, w, up, lambda) - binary_penalized_loglik(X, yb, w, dn, lambda)) / (2 * h);
    CHECK(std::abs(fd - g[j]) < 1e-6);
    const Eigen::VectorXd dg = (binary_gradient(X, yb, w, up, lambda) - binary_gradient(X, yb, w, dn, lambda)) / (2 * h);
    CHECK((dg + I.col(j)).cwiseAbs().maxCoeff() < 1e-6);
  }

  const Eigen::VectorXd gt = trinomial_gradient(X, yt, w, bt, lambda);
  const Eigen::MatrixXd It = trinomial_information(X, w, bt, lambda);
  for (int j = 0; j < 2 * d; ++j) {
    Eigen::VectorXd up = bt, dn = bt;
    up[j] += h;
    dn[j] -= h;
    const double fd =
        (trinomial_penalized_loglik(X, yt, w, up, lambda) - trinomial_penalized_loglik(X, yt, w, dn, lambda)) / (2 * h);
    CHECK(std::abs(fd - gt[j]) < 1e-6);
    const Eigen::VectorXd dg =
        (trinomial_gradient(X, yt, w, up, lambda) - trinomial_gradient(X, yt, w, dn, lambda)) / (2 * h);
    CHECK((dg + It.col(j)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("duplicated rows and doubled weights give the same fit") {
  const Toy t = binary_toy();
  Eigen::MatrixXd X2(16, 2);
  X2 << t.X, t.X;
  Eigen::VectorXd y2(16), w2 = Eigen::VectorXd::Ones(16);
  y2 << t.y, t.y;
  FitOptions o;
  o.lambda = 0.4;
  o.tol = 1e-12;
  const FitResult dup = fit_weighted_ridge_binary(X2, y2, w2, o);
  const FitResult dbl = fit_weighted_ridge_binary(t.X, t.y, 2.0 * t.w, o);
  CHECK((dup.coefficients - dbl.coefficients).cwiseAbs().maxCoeff() < 1e-10);

  // Half weights on two copies equal unit weights on one.
  const FitResult half = fit_weighted_ridge_binary(X2, y2, 0.5 * w2, o);
  const FitResult one = fit_weighted_ridge_binary(t.X, t.y, t.w, o);
  CHECK((half.coefficients - one.coefficients).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("very large lambda shrinks slopes to zero") {
  const Toy t = binary_toy();
  FitOptions o;
  o.lambda = 1e9;
  const FitResult fit = fit_weighted_ridge_binary(t.X, t.y, t.w, o);
  CHECK(std::abs(fit.coefficients[1]) < 1e-7);
  // Intercept is unpenalized: the marginal logit.
  CHECK(fit.coefficients[0] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("intercept-only Firth estimate is the Jeffreys-adjusted logit") {
  for (auto [k, n] : {std::pair{0, 10}, std::pair{1, 20}, std::pair{3, 7}, std::pair{12, 12}}) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n), w = Eigen::VectorXd::Ones(n);
    for (int i = 0; i < k; ++i) y[i] = 1;
    const FitResult fit = fit_firth_binary(X, y, w);
    REQUIRE(fit.converged);
    const double p = (k + 0.5) / (n + 1.0);
    CHECK(fit.coefficients[0] == doctest::Approx(std::log(p / (1 - p))).epsilon(1e-8));
  }
}

TEST_CASE("Firth shrinks towards zero and stays finite under separation") {
  // Imbalanced 20-row toy with a modest effect.
  Eigen::MatrixXd X(20, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(20), w = Eigen::VectorXd::Ones(20);
  X.col(0).setOnes();
  for (int i = 0; i < 20; ++i) X(i, 1) = i < 10 ? 0.0 : 1.0;
  y[0] = 1;
  y[10] = y[11] = y[12] = 1;
  FitOptions o;
  o.tol = 1e-12;
  const FitResult mle = fit_weighted_ridge_binary(X, y, w, o);
  const FitResult firth = fit_firth_binary(X, y, w, o);
  CHECK(std::abs(firth.coefficients[1]) < std::abs(mle.coefficients[1]));
  // 2x2 table closed form: Firth adds 1/2 to each cell.
  CHECK(firth.coefficients[1] == doctest::Approx(std::log((3.5 / 7.5) / (1.5 / 9.5))).epsilon(1e-8));

  // Complete separation: the MLE diverges, Firth does not.
  Eigen::VectorXd ys = X.col(1);
  const FitResult sep = fit_weighted_ridge_binary(X, ys, w, o);
  CHECK(sep.separated);
  const FitResult fs = fit_firth_binary(X, ys, w, o);
  CHECK(fs.converged);
  CHECK(std::isfinite(fs.coefficients[1]));
  CHECK(fs.coefficients[1] == doctest::Approx(std::log((10.5 / 0.5) / (0.5 / 10.5))).epsilon(1e-8));
}
