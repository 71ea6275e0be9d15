#include "mirem/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mirem/error.hpp"
#include "mirem/glm.hpp"
#include "mirem/rng.hpp"

namespace mirem {

std::vector<double> log_grid(double lo, double hi, int points) {
  if (points < 1) throw ConfigError("grid needs at least one point");
  std::vector<double> g;
  for (int t = 0; t < points; ++t) {
    const double e = points == 1 ? lo : lo + (hi - lo) * t / (points - 1);
    g.push_back(std::pow(10.0, e));
  }
  return g;
}

namespace {

void pick(TuneResult& r) {
  std::size_t best = r.curve.size();
  for (std::size_t t = 0; t < r.curve.size(); ++t) {
    if (!r.curve[t].usable) continue;
    if (best == r.curve.size() || r.curve[t].value < r.curve[best].value) best = t;
  }
  if (best == r.curve.size()) throw NumericalError("no usable lambda in the tuning grid");
  r.lambda_min = r.curve[best].lambda;
  r.lambda_1se = r.lambda_min;
  const double bound = r.curve[best].value + r.curve[best].se;
  for (const auto& pt : r.curve) {
    if (pt.usable && pt.value <= bound && pt.lambda > r.lambda_1se) r.lambda_1se = pt.lambda;
  }
}

TuneResult tune_ebic(const Dataset& data, const ModelSystem& theta, const EmConfig& cfg, const TuneConfig& tc,
                     std::uint64_t stream) {
  TuneResult r;
  r.method = TuneMethod::Ebic;
  const EStepResult e = e_step(data, theta, cfg, derive_seed(stream, {0x7e}));
  for (double lam : tc.grid) {
    LambdaPoint pt;
    pt.lambda = lam;
    try {
      EmConfig c = cfg;
      c.lambda = lam;
      const ModelSystem next = m_step(data, e.wcd, theta, c);
      pt.q = q_value(next, e.wcd, lam);
      const EStepResult e2 = e_step(data, next, c, derive_seed(stream, {0x7f}));
      const LouisResult L = louis_variance(next, e2.wcd, lam, false);
      pt.df = effective_df(L.covariance, L.information);
      pt.value = -2.0 * pt.q + pt.df * ebic_penalty(data.n(), data.layout.p(), tc.xi, tc.form);
    } catch (const NumericalError&) {
      pt.usable = false;
      pt.value = std::numeric_limits<double>::quiet_NaN();
    }
    r.curve.push_back(pt);
  }
  pick(r);
  r.lambda_star = r.lambda_min;
  return r;
}

TuneResult tune_cv(const Dataset& data, const ModelSystem& theta, const EmConfig& cfg, const TuneConfig& tc,
                   std::uint64_t stream) {
  if (tc.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  TuneResult r;
  r.method = TuneMethod::Cv;
  const EStepResult e = e_step(data, theta, cfg, derive_seed(stream, {0xc0}));
  const WeightedCompleteData& wcd = e.wcd;

  // Stratified fold assignment over individuals with an observed phenotype.
  std::vector<int> fold(data.n(), -1);
  Rng rng(derive_seed(cfg.seed, {0xc1, stream}));
  for (std::uint8_t cls : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (!data.y.is_missing(i) && data.y[i] == cls) ids.push_back(i);
    }
    for (std::size_t t = ids.size(); t > 1; --t) std::swap(ids[t - 1], ids[uniform_index(rng, t)]);
    for (std::size_t t = 0; t < ids.size(); ++t) fold[ids[t]] = static_cast<int>(t % static_cast<std::size_t>(tc.folds));
  }

  const Equation& eq = theta.equations[0];
  const Eigen::MatrixXd X = build_design(eq, wcd);
  const Eigen::VectorXd y = build_response(eq, wcd);
  for (double lam : tc.grid) {
    LambdaPoint pt;
    pt.lambda = lam;
    std::vector<double> errs;
    for (int f = 0; f < tc.folds; ++f) {
      Eigen::VectorXd wtrain(X.rows());
      for (Eigen::Index t = 0; t < X.rows(); ++t) {
        wtrain[t] = fold[wcd.individual[static_cast<std::size_t>(t)]] == f ? 0.0 : wcd.weight[static_cast<std::size_t>(t)];
      }
      FitResult fit;
      try {
        FitOptions o;
        o.lambda = lam;
        fit = fit_weighted_ridge_binary(X, y, wtrain, o, eq.coef);
      } catch (const NumericalError&) {
        ++pt.folds_skipped;
        continue;
      }
      if (!fit.converged || fit.separated) {
        ++pt.folds_skipped;
        continue;
      }
      const Eigen::VectorXd eta = X * fit.coefficients;
      double wrong = 0.0, total = 0.0;
      for (Eigen::Index t = 0; t < X.rows(); ++t) {
        if (fold[wcd.individual[static_cast<std::size_t>(t)]] != f) continue;
        const double w = wcd.weight[static_cast<std::size_t>(t)];
        const double pred = eta[t] > 0.0 ? 1.0 : 0.0;
        wrong += w * (pred != y[t]);
        total += w;
      }
      if (total > 0.0) errs.push_back(wrong / total);
    }
    pt.folds_used = static_cast<int>(errs.size());
    pt.usable = !errs.empty();
    if (pt.usable) {
      double m = 0.0;
      for (double v : errs) m += v;
      m /= static_cast<double>(errs.size());
      double ss = 0.0;
      for (double v : errs) ss += (v - m) * (v - m);
      pt.value = m;
      pt.se = errs.size() > 1 ? std::sqrt(ss / static_cast<double>(errs.size() - 1) / static_cast<double>(errs.size())) : 0.0;
    } else {
      pt.value = std::numeric_limits<double>::quiet_NaN();
    }
    r.curve.push_back(pt);
  }
  pick(r);
  r.lambda_star = tc.rule == CvRule::Min ? r.lambda_min : r.lambda_1se;
  return r;
}

}  // namespace

TuneResult tune_lambda(const Dataset& data, const ModelSystem& theta, const EmConfig& cfg, const TuneConfig& tc,
                       std::uint64_t stream) {
  if (tc.grid.empty()) throw ConfigError("lambda grid is empty");
  for (double v : tc.grid) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("lambda grid values must be finite and non-negative");
  }
  return tc.method == TuneMethod::Ebic ? tune_ebic(data, theta, cfg, tc, stream) : tune_cv(data, theta, cfg, tc, stream);
}

}  // namespace mirem
