#include <doctest.h>

#include <cmath>
#include <random>

#include "mirem/em.hpp"
#include "mirem/glm.hpp"
#include "mirem/tuning.hpp"
#include "oracles.hpp"

using namespace mirem;

namespace {

using namespace oracle;

EmConfig enum_config() {
  EmConfig c;
  c.enum_cap = 81;
  c.firth_min = 0;
  c.firth_on_failure = false;
  return c;
}

}  // namespace

TEST_CASE("enumeration yields 3^nu candidates, doubled when the phenotype is missing") {
  const Dataset d = random_dataset(5, 60, 4, 3, 0.4, 0.2);
  EmConfig cfg = enum_config();
  const ModelSystem sys = random_system(d, 1);
  Rng rng(1);
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (d.individual_complete(i)) continue;
    const auto imp = candidate_completions(d, i, CompletionMode::Enumerate, sys, cfg, rng);
    std::size_t expect = 1;
    for (std::size_t t = 0; t < imp.missing_x.size(); ++t) expect *= 3;
    if (imp.phenotype_missing) expect *= 2;
    CHECK(imp.candidates.size() == expect);
  }
}

TEST_CASE("imputation weights match brute-force normalization") {
  double worst = 0.0;
  int instances = 0;
  for (std::uint64_t s = 0; instances < 200; ++s) {
    const Dataset d = random_dataset(100 + s, 12, 4, 3, 0.5, 0.15);
    const ModelSystem sys = random_system(d, 200 + s, 1.0);
    Rng rng(s);
    for (std::size_t i = 0; i < d.n() && instances < 200; ++i) {
      if (d.individual_complete(i)) continue;
      const auto imp = candidate_completions(d, i, CompletionMode::Enumerate, sys, enum_config(), rng);
      const auto w = compute_weights(d, imp, sys);
      const auto o = oracle_weights(d, sys, i, imp);
      double tv = 0;
      for (std::size_t c = 0; c < w.size(); ++c) tv += std::abs(w[c] - o[c]);
      worst = std::max(worst, 0.5 * tv);
      ++instances;
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("weight truncation") {
  CHECK(truncate_weights({0.5, 0.5}, 0.6) == std::vector<double>{1.0, 0.0});
  const auto w = truncate_weights({0.05, 0.6, 0.35}, 0.1);
  CHECK(w[0] == 0.0);
  CHECK(w[1] == doctest::Approx(0.6 / 0.95));
  CHECK(w[2] == doctest::Approx(0.35 / 0.95));
  CHECK(truncate_weights({0.2, 0.8}, 0.0) == std::vector<double>{0.2, 0.8});
}

TEST_CASE("flat theta gives uniform weights over three completions") {
  GenotypeMatrix g(4, {"a"}, {0, 1, 2, kMissing});
  const Dataset d = make_dataset(g, PhenotypeVector({0, 1, 0, 1}));
  const ModelSystem sys = make_system(d.layout, full_structure(d.layout));
  const EStepResult e = e_step(d, sys, enum_config(), 0);
  REQUIRE(e.imputations.individuals.size() == 1);
  CHECK(e.wcd.rows() == 6);
  for (std::size_t r = 0; r < e.wcd.rows(); ++r) {
    CHECK(e.wcd.weight[r] == doctest::Approx(e.wcd.individual[r] == 3 ? 1.0 / 3.0 : 1.0));
  }
}

TEST_CASE("complete data: no imputations and rows equal the input") {
  const Dataset d = random_dataset(9, 30, 3, 0, 0.0);
  CHECK(d.layout.p() == 0);
  const ModelSystem sys = make_system(d.layout, full_structure(d.layout));
  const EStepResult e = e_step(d, sys, enum_config(), 0);
  CHECK(e.imputations.individuals.empty());
  CHECK(e.wcd.rows() == d.n());
  for (double w : e.wcd.weight) CHECK(w == 1.0);
}

TEST_CASE("Gibbs weights approach enumeration weights") {
  const Dataset d = random_dataset(17, 40, 4, 3, 0.9, 0.0, 3);
  const ModelSystem sys = random_system(d, 4, 0.8);
  std::size_t i = 0;
  while (d.missing_x(i).size() != 3) ++i;
  EmConfig cfg = enum_config();
  Rng rng(0);
  const auto full = candidate_completions(d, i, CompletionMode::Enumerate, sys, cfg, rng);
  const auto exact = compute_weights(d, full, sys);
  double mean_tv = 0;
  for (int s = 0; s < 10; ++s) {
    EmConfig gc = cfg;
    gc.gibbs_draws = 2000;
    gc.gibbs_burnin = 50;
    Rng r(static_cast<std::uint64_t>(s) + 1);
    const auto imp = candidate_completions(d, i, CompletionMode::Gibbs, sys, gc, r);
    double tv = 0;
    for (std::size_t c = 0; c < full.candidates.size(); ++c) {
      double freq = 0;
      for (std::size_t t = 0; t < imp.candidates.size(); ++t)
        if (imp.candidates[t] == full.candidates[c]) freq = imp.multiplicity[t] / 2000.0;
      tv += std::abs(freq - exact[c]);
    }
    mean_tv += 0.5 * tv / 10.0;
  }
  CHECK(mean_tv < 0.05);
}

TEST_CASE("Ridge-EM never decreases the penalized observed log-likelihood") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dataset d = random_dataset(300 + s, 40, 3, 2, 0.25, 0.1, 2);
    EmConfig cfg = enum_config();
    cfg.lambda = s % 2 ? 0.5 : 0.1;
    cfg.max_iter = 15;
    cfg.tol = 0;
    const ModelSystem start = initial_system(d, full_structure(d.layout), cfg);
    const EmResult r = ridge_em(d, start, cfg);
    for (std::size_t t = 1; t < r.trace.size(); ++t) {
      REQUIRE(std::isfinite(r.trace[t].loglik));
      CHECK(r.trace[t].loglik >= r.trace[t - 1].loglik - 1e-8);
    }
  }
}

TEST_CASE("EM limit matches the observed-data maximizer of a separable toy") {
  // Intercept-only equations: the observed likelihood factorizes, so the genotype
  // equation's MLE is the observed class frequencies.
  GenotypeMatrix g(10, {"a"}, {0, 0, 1, 1, 1, 2, kMissing, kMissing, kMissing, 0});
  const Dataset d = make_dataset(g, PhenotypeVector({0, 1, 0, 1, 0, 1, 0, 1, 1, 0}));
  const Structure st(equation_count(d.layout));
  EmConfig cfg = enum_config();
  cfg.max_iter = 500;
  cfg.tol = 1e-12;
  const EmResult r = ridge_em(d, make_system(d.layout, st), cfg);
  CHECK(r.converged);
  const Eigen::VectorXd a = r.theta.equations[1].coef;
  CHECK(a[0] == doctest::Approx(std::log(3.0 / 3.0)).epsilon(1e-6));
  CHECK(a[1] == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-6));
  CHECK(r.theta.equations[2].coef[0] == doctest::Approx(std::log(3.0 / 7.0)).epsilon(1e-6));
}

TEST_CASE("NA-free data collapses to one direct penalized fit") {
  const Dataset d = random_dataset(41, 80, 3, 0, 0.0);
  EmConfig cfg = enum_config();
  cfg.lambda = 0.3;
  ModelSystem start = make_system(d.layout, full_structure(d.layout));
  const EmResult r = ridge_em(d, start, cfg);
  CHECK(r.trace.size() == 1);
  CHECK(r.converged);

  Eigen::MatrixXd X(80, 7);
  Eigen::VectorXd y(80), w = Eigen::VectorXd::Ones(80);
  for (std::size_t i = 0; i < 80; ++i) {
    X(i, 0) = 1;
    for (std::size_t j = 0; j < 3; ++j) {
      X(i, 1 + 2 * j) = d.g(i, j) == 1;
      X(i, 2 + 2 * j) = d.g(i, j) == 2;
    }
    y[i] = d.y[i];
  }
  FitOptions o;
  o.lambda = 0.3;
  o.tol = 1e-12;
  const FitResult direct = fit_weighted_ridge_binary(X, y, w, o);
  CHECK((r.theta.equations[0].coef - direct.coefficients).cwiseAbs().maxCoeff() < 1e-8);

  const LouisResult L = louis_variance(r.theta, r.last_e.wcd, 0.3);
  CHECK(L.score_variance.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd dcov = binary_information(X, w, r.theta.equations[0].coef, 0.3).inverse();
  CHECK((L.covariance - dcov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("conditional score variance matches direct summation") {
  GenotypeMatrix g(8, {"a", "b"}, {0, 1, 1, 2, 2, 0, kMissing, 1, 0, 0, 1, 1, 2, kMissing, 1, 2});
  const Dataset d = make_dataset(g, PhenotypeVector({0, 1, 1, 0, 1, 0, 1, 0}));
  const ModelSystem sys = random_system(d, 8);
  const EStepResult e = e_step(d, sys, enum_config(), 0);
  const Eigen::MatrixXd V = conditional_score_variance(sys, e.wcd);

  const auto P = static_cast<Eigen::Index>(sys.param_count());
  const auto off = sys.offsets();
  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(P, P);
  for (const auto& imp : e.imputations.individuals) {
    std::vector<Eigen::VectorXd> s;
    std::vector<double> w;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(P);
    for (std::size_t r = 0; r < e.wcd.rows(); ++r) {
      if (e.wcd.individual[r] != imp.individual) continue;
      Eigen::VectorXd v(P);
      for (std::size_t q = 0; q < sys.equations.size(); ++q) equation_score(sys.equations[q], e.wcd.row(r), v.data() + off[q]);
      s.push_back(v);
      w.push_back(e.wcd.weight[r]);
      mean += e.wcd.weight[r] * v;
    }
    CHECK(s.size() == 3);
    for (std::size_t t = 0; t < s.size(); ++t) oracle += w[t] * (s[t] - mean) * (s[t] - mean).transpose();
  }
  CHECK((V - oracle).cwiseAbs().maxCoeff() < 1e-12);

  // Missing information inflates the variance over the complete-data inverse.
  const LouisResult L = louis_variance(sys, e.wcd, 0.5);
  const Eigen::MatrixXd naive = L.information.inverse();
  for (Eigen::Index k = 0; k < P; ++k) CHECK(L.covariance(k, k) >= naive(k, k) - 1e-12);
}

TEST_CASE("EBIC tuning picks the argmin of an independently evaluated grid") {
  const Dataset d = random_dataset(77, 60, 3, 2, 0.2, 0.0, 2);
  EmConfig cfg = enum_config();
  cfg.max_iter = 3;
  const ModelSystem theta = ridge_em(d, initial_system(d, full_structure(d.layout), cfg), cfg).theta;
  TuneConfig tc;
  tc.method = TuneMethod::Ebic;
  tc.grid = log_grid(-3, 2, 50);
  const TuneResult r = tune_lambda(d, theta, cfg, tc, 5);

  // The same E-step, then per lambda: M-step, Q, Louis covariance, trace penalty.
  const EStepResult e = e_step(d, theta, cfg, derive_seed(5, {0x7e}));
  double best = INFINITY, arg = 0;
  for (double lam : tc.grid) {
    EmConfig c = cfg;
    c.lambda = lam;
    const ModelSystem next = m_step(d, e.wcd, theta, c);
    const EStepResult e2 = e_step(d, next, c, 0);
    const LouisResult L = louis_variance(next, e2.wcd, lam, false);
    const double v = ebic(q_value(next, e.wcd, lam), L.covariance, L.information, d.n(), d.layout.p());
    if (v < best) {
      best = v;
      arg = lam;
    }
  }
  CHECK(r.lambda_star == arg);
  CHECK(r.curve.size() == 50);

  tc.grid = {0.25};
  CHECK(tune_lambda(d, theta, cfg, tc, 5).lambda_star == 0.25);
}

TEST_CASE("EBIC pieces") {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(3, 3) * 0.5, info = Eigen::MatrixXd::Identity(3, 3);
  CHECK(effective_df(cov, info) == doctest::Approx(1.5));
  CHECK(ebic_penalty(100, 10, 2.0, EbicForm::Power) > ebic_penalty(100, 10, 1.0, EbicForm::Power));
  CHECK(ebic(-10.0, cov, info, 100, 10) == doctest::Approx(20.0 + 1.5 * ebic_penalty(100, 10, 2.0, EbicForm::Power)));
}
