#include "mirem/em.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>

#include <lapacke.h>

#include "mirem/error.hpp"
#include "mirem/glm.hpp"

namespace mirem {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t pow3(std::size_t nu) {
  std::size_t r = 1;
  for (std::size_t t = 0; t < nu; ++t) {
    if (r > std::numeric_limits<std::size_t>::max() / 3) return std::numeric_limits<std::size_t>::max();
    r *= 3;
  }
  return r;
}

// Writes candidate values into the cells of `row` they complete.
void fill_row(const Dataset& data, const IndividualImputation& imp, const std::vector<std::uint8_t>& cand,
              std::vector<std::uint8_t>& row) {
  for (std::size_t t = 0; t < imp.missing_x.size(); ++t) row[data.layout.x_part[imp.missing_x[t]]] = cand[t];
  if (imp.phenotype_missing) row[data.layout.pheno_col()] = cand.back();
}

double log_sum_exp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (long t = 0; t < static_cast<long>(n); ++t) {
    try {
      body(static_cast<std::size_t>(t));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

double equation_lambda(const Equation& eq, double lambda) {
  if (eq.method == FitMethod::Firth) return 0.0;
  if (eq.method == FitMethod::RidgeFallback) return std::max(lambda, kFallbackLambda);
  return lambda;
}

std::size_t minority_count(const Dataset& data, const Equation& eq) {
  const Layout& L = data.layout;
  std::size_t ones = 0, total = 0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    std::uint8_t v;
    if (eq.response_col == L.pheno_col()) {
      if (data.y.is_missing(i)) continue;
      v = data.y[i];
    } else if (L.pheno_indicator && eq.response_col == L.pheno_indicator_col()) {
      v = data.mask.pheno_mask[i];
    } else {
      v = data.mask.snp(i, eq.response_col - L.m - 1);
    }
    ++total;
    ones += v;
  }
  return std::min(ones, total - ones);
}

std::vector<std::vector<std::uint8_t>> enumerate_completions(const Dataset& data, std::size_t i) {
  const std::size_t nu = data.missing_x(i).size();
  const bool ym = data.y.is_missing(i);
  std::vector<std::vector<std::uint8_t>> out;
  const std::size_t total = pow3(nu);
  for (std::size_t c = 0; c < total; ++c) {
    std::vector<std::uint8_t> cand(nu + (ym ? 1 : 0));
    std::size_t r = c;
    for (std::size_t t = nu; t-- > 0;) {
      cand[t] = static_cast<std::uint8_t>(r % 3);
      r /= 3;
    }
    if (ym) {
      cand[nu] = 0;
      out.push_back(cand);
      cand[nu] = 1;
    }
    out.push_back(std::move(cand));
  }
  return out;
}

IndividualImputation candidate_completions(const Dataset& data, std::size_t i, CompletionMode mode,
                                           const ModelSystem& theta, const EmConfig& cfg, Rng& rng) {
  IndividualImputation imp;
  imp.individual = i;
  imp.missing_x = data.missing_x(i);
  imp.phenotype_missing = data.y.is_missing(i);
  const std::size_t nu = imp.missing_x.size();
  if (nu == 0 && !imp.phenotype_missing) throw DataError("individual " + std::to_string(i) + " has no missing cells");
  if (mode == CompletionMode::Enumerate) {
    if (pow3(nu) > cfg.enum_cap) {
      throw ConfigError("enumeration of 3^" + std::to_string(nu) + " completions exceeds enum_cap; use Gibbs mode");
    }
    imp.candidates = enumerate_completions(data, i);
    imp.multiplicity.assign(imp.candidates.size(), 1);
    imp.mode = GenerationMode::Enumerated;
    return imp;
  }
  if (cfg.gibbs_draws < 1 || cfg.gibbs_burnin < 0) throw ConfigError("Gibbs draws must be >= 1 and burn-in >= 0");
  // Systematic-scan Gibbs over the missing cells; each full conditional is trinomial
  // (binary for the phenotype).
  std::vector<std::uint8_t> row = data.row_template(i);
  std::vector<std::size_t> cols;
  for (auto k : imp.missing_x) cols.push_back(data.layout.x_part[k]);
  if (imp.phenotype_missing) cols.push_back(data.layout.pheno_col());
  for (std::size_t t = 0; t < cols.size(); ++t) {
    const bool snp = t < nu;
    row[cols[t]] = static_cast<std::uint8_t>(uniform_index(rng, snp ? 3 : 2));
  }
  // Only equations touching a cell change with it; the rest cancel in its full conditional.
  std::vector<std::vector<const Equation*>> touching(cols.size());
  for (std::size_t t = 0; t < cols.size(); ++t) {
    for (const auto& eq : theta.equations) {
      if (eq.response_col == cols[t] || std::find(eq.predictors.begin(), eq.predictors.end(), cols[t]) != eq.predictors.end()) {
        touching[t].push_back(&eq);
      }
    }
  }
  std::map<std::vector<std::uint8_t>, int> seen;
  double ll[3];
  for (int sweep = 0; sweep < cfg.gibbs_burnin + cfg.gibbs_draws; ++sweep) {
    for (std::size_t t = 0; t < cols.size(); ++t) {
      const int levels = t < nu ? 3 : 2;
      for (int v = 0; v < levels; ++v) {
        row[cols[t]] = static_cast<std::uint8_t>(v);
        ll[v] = 0.0;
        for (const Equation* eq : touching[t]) ll[v] += equation_loglik(*eq, row.data());
      }
      const double mx = *std::max_element(ll, ll + levels);
      double s = 0.0;
      for (int v = 0; v < levels; ++v) s += (ll[v] = std::exp(ll[v] - mx));
      double u = uniform01(rng) * s;
      int pick = levels - 1;
      for (int v = 0; v < levels; ++v) {
        if (u < ll[v]) {
          pick = v;
          break;
        }
        u -= ll[v];
      }
      row[cols[t]] = static_cast<std::uint8_t>(pick);
    }
    if (sweep >= cfg.gibbs_burnin) {
      std::vector<std::uint8_t> cand(cols.size());
      for (std::size_t t = 0; t < cols.size(); ++t) cand[t] = row[cols[t]];
      ++seen[cand];
    }
  }
  for (auto& [cand, count] : seen) {
    imp.candidates.push_back(cand);
    imp.multiplicity.push_back(count);
  }
  imp.mode = GenerationMode::Gibbs;
  return imp;
}

std::vector<double> candidate_logliks(const Dataset& data, const IndividualImputation& imp, const ModelSystem& theta) {
  std::vector<std::uint8_t> row = data.row_template(imp.individual);
  std::vector<double> out;
  out.reserve(imp.candidates.size());
  for (const auto& cand : imp.candidates) {
    fill_row(data, imp, cand, row);
    out.push_back(joint_loglik(theta, row.data()));
  }
  return out;
}

std::vector<double> normalize_log_weights(const std::vector<double>& logw) {
  const double lse = log_sum_exp(logw);
  if (!std::isfinite(lse)) throw NumericalError("all candidate log-weights are -inf");
  std::vector<double> w(logw.size());
  for (std::size_t c = 0; c < w.size(); ++c) w[c] = std::exp(logw[c] - lse);
  return w;
}

std::vector<double> compute_weights(const Dataset& data, const IndividualImputation& imp, const ModelSystem& theta) {
  return normalize_log_weights(candidate_logliks(data, imp, theta));
}

std::vector<double> truncate_weights(std::vector<double> w, double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw ConfigError("eps must lie in [0, 1)");
  if (w.empty() || eps == 0.0) return w;
  const std::size_t best = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
  double s = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (c != best && w[c] < eps) w[c] = 0.0;
    s += w[c];
  }
  for (auto& x : w) x /= s;
  return w;
}

EStepResult e_step(const Dataset& data, const ModelSystem& theta, const EmConfig& cfg, std::uint64_t stream) {
  std::vector<std::size_t> incomplete;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (!data.individual_complete(i)) incomplete.push_back(i);
  }
  std::vector<IndividualImputation> imps(incomplete.size());
  std::vector<double> lse(incomplete.size(), kNaN);
  std::vector<char> exact(incomplete.size(), 0);
  parallel_for(incomplete.size(), [&](std::size_t t) {
    const std::size_t i = incomplete[t];
    Rng rng(derive_seed(cfg.seed, {0xe5, stream, i}));
    const std::size_t nu = data.missing_x(i).size();
    const auto mode = pow3(nu) <= cfg.enum_cap ? CompletionMode::Enumerate : CompletionMode::Gibbs;
    auto imp = candidate_completions(data, i, mode, theta, cfg, rng);
    const auto ll = candidate_logliks(data, imp, theta);
    imp.weights = normalize_log_weights(ll);
    exact[t] = mode == CompletionMode::Enumerate;
    if (exact[t]) lse[t] = log_sum_exp(ll);
    if (cfg.eps > 0.0) {
      const auto before = std::count_if(imp.weights.begin(), imp.weights.end(), [](double x) { return x > 0.0; });
      imp.weights = truncate_weights(std::move(imp.weights), cfg.eps);
      const auto after = std::count_if(imp.weights.begin(), imp.weights.end(), [](double x) { return x > 0.0; });
      if (after < before) {
        imp.mode = GenerationMode::Truncated;
        exact[t] = 0;
      }
    }
    imps[t] = std::move(imp);
  });
  EStepResult r;
  r.imputations.individuals = std::move(imps);
  r.wcd = expand_complete_data(data, r.imputations);
  double ll = 0.0;
  bool all_exact = true;
  std::size_t t = 0;
  std::vector<std::uint8_t> row;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (t < incomplete.size() && incomplete[t] == i) {
      all_exact = all_exact && exact[t];
      ll += lse[t];
      ++t;
    } else {
      row = data.row_template(i);
      ll += joint_loglik(theta, row.data());
    }
  }
  r.observed_loglik = all_exact ? ll : kNaN;
  return r;
}

namespace {

// EM can drift a coefficient towards infinity over many M-steps without any single
// Newton run crossing the eta guard; a huge standard error catches that drift.
bool well_posed(const FitResult& r) {
  return r.converged && !r.separated &&
         r.covariance.diagonal().maxCoeff() < kQuasiSeparationSe * kQuasiSeparationSe;
}

FitResult fit_binary(Equation& eq, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                     const EmConfig& cfg, std::size_t minority, std::vector<std::string>& notes,
                     const std::string& name) {
  const bool screened = eq.method == FitMethod::Screened;
  const auto label = [&](FitMethod m) { eq.method = screened ? FitMethod::Screened : m; };
  const Eigen::VectorXd start = eq.coef;
  FitOptions o;
  o.lambda = cfg.lambda;
  // A fallback taken earlier sticks, so successive M-steps maximize the same objective.
  if ((cfg.firth_min > 0 && minority < static_cast<std::size_t>(cfg.firth_min)) ||
      (eq.method == FitMethod::Firth && cfg.lambda == 0.0 && cfg.firth_on_failure)) {
    label(FitMethod::Firth);
    return fit_firth_binary(X, y, w, o, start);
  }
  try {
    FitResult r = fit_weighted_ridge_binary(X, y, w, o, start);
    if (well_posed(r)) {
      label(FitMethod::Ridge);
      return r;
    }
    if (cfg.lambda > 0.0 || !cfg.firth_on_failure) {
      if (!r.converged) notes.push_back(name + ": ridge fit did not converge");
      label(FitMethod::Ridge);
      return r;
    }
    notes.push_back(name + ": separation at lambda=0, Firth fallback");
  } catch (const NumericalError& e) {
    if (!cfg.firth_on_failure) throw;
    notes.push_back(name + ": " + e.what() + ", Firth fallback");
  }
  label(FitMethod::Firth);
  return fit_firth_binary(X, y, w, o, std::nullopt);
}

FitResult fit_trinomial(Equation& eq, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                        const EmConfig& cfg, std::vector<std::string>& notes, const std::string& name) {
  FitOptions o;
  o.lambda = cfg.lambda;
  if (eq.method == FitMethod::RidgeFallback && cfg.lambda < kFallbackLambda) {
    o.lambda = kFallbackLambda;
    return fit_weighted_ridge_trinomial(X, y, w, o, eq.coef);
  }
  try {
    FitResult r = fit_weighted_ridge_trinomial(X, y, w, o, eq.coef);
    if (well_posed(r) || cfg.lambda >= kFallbackLambda) {
      eq.method = FitMethod::Ridge;
      return r;
    }
    notes.push_back(name + ": trinomial fit failed, ridge fallback lambda=1e-3");
  } catch (const NumericalError& e) {
    notes.push_back(name + ": " + e.what() + ", ridge fallback lambda=1e-3");
  }
  o.lambda = kFallbackLambda;
  eq.method = FitMethod::RidgeFallback;
  return fit_weighted_ridge_trinomial(X, y, w, o, std::nullopt);
}

}  // namespace

ModelSystem m_step(const Dataset& data, const WeightedCompleteData& wcd, const ModelSystem& theta,
                   const EmConfig& cfg, MStepInfo* info) {
  ModelSystem next = theta;
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(wcd.weight.data(), static_cast<Eigen::Index>(wcd.rows()));
  std::vector<std::vector<std::string>> notes(next.equations.size());
  parallel_for(next.equations.size(), [&](std::size_t e) {
    Equation& eq = next.equations[e];
    const std::string name = next.equation_name(e);
    try {
      const Eigen::MatrixXd X = build_design(eq, wcd);
      const Eigen::VectorXd y = build_response(eq, wcd);
      FitResult r = eq.classes() == 3 ? fit_trinomial(eq, X, y, w, cfg, notes[e], name)
                                      : fit_binary(eq, X, y, w, cfg, minority_count(data, eq), notes[e], name);
      eq.coef = r.coefficients;
      eq.converged = r.converged;
    } catch (const NumericalError& err) {
      throw NumericalError("equation " + name + ": " + err.what());
    } catch (const DataError& err) {
      throw DataError("equation " + name + ": " + err.what());
    }
  });
  if (info) {
    for (auto& v : notes) info->notes.insert(info->notes.end(), v.begin(), v.end());
  }
  return next;
}

double q_value(const ModelSystem& theta, const WeightedCompleteData& wcd, double lambda) {
  double s = 0.0;
  for (std::size_t r = 0; r < wcd.rows(); ++r) s += wcd.weight[r] * joint_loglik(theta, wcd.row(r));
  return s - ridge_penalty(theta, lambda);
}

double observed_loglik(const Dataset& data, const ModelSystem& theta, double lambda) {
  double ll = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.individual_complete(i)) {
      const auto row = data.row_template(i);
      ll += joint_loglik(theta, row.data());
      continue;
    }
    IndividualImputation imp;
    imp.individual = i;
    imp.missing_x = data.missing_x(i);
    imp.phenotype_missing = data.y.is_missing(i);
    imp.candidates = enumerate_completions(data, i);
    ll += log_sum_exp(candidate_logliks(data, imp, theta));
  }
  return ll - ridge_penalty(theta, lambda);
}

ModelSystem initial_system(const Dataset& data, const Structure& structure, const EmConfig& cfg) {
  ModelSystem sys = make_system(data.layout, structure);
  const Layout& L = data.layout;
  for (std::size_t e = 0; e < sys.equations.size(); ++e) {
    Equation& eq = sys.equations[e];
    if (eq.kind != ResponseKind::Genotype) {
      // Marginal logit of the observed response, shrunk half a count toward 1/2.
      double ones = 0.0, total = 0.0;
      for (std::size_t i = 0; i < data.n(); ++i) {
        std::uint8_t v;
        if (eq.kind == ResponseKind::Phenotype) {
          if (data.y.is_missing(i)) continue;
          v = data.y[i];
        } else if (L.pheno_indicator && eq.response_col == L.pheno_indicator_col()) {
          v = data.mask.pheno_mask[i];
        } else {
          v = data.mask.snp(i, eq.response_col - L.m - 1);
        }
        ones += v;
        total += 1.0;
      }
      const double f = (ones + 0.5) / (total + 1.0);
      eq.coef[0] = std::log(f / (1.0 - f));
      continue;
    }
    // Genotype equation: complete cases on its response and predictors.
    WeightedCompleteData cc;
    cc.layout = L;
    cc.n_individuals = data.n();
    double counts[3] = {0.5, 0.5, 0.5};
    for (std::size_t i = 0; i < data.n(); ++i) {
      const auto row = data.row_template(i);
      const std::uint8_t v = row[eq.response_col];
      if (v == kMissing) continue;
      counts[v] += 1.0;
      bool ok = true;
      for (auto c : eq.predictors) ok = ok && row[c] != kMissing;
      if (!ok) continue;
      cc.individual.push_back(i);
      cc.weight.push_back(1.0);
      cc.provenance.push_back(Provenance::Observed);
      cc.cells.insert(cc.cells.end(), row.begin(), row.end());
    }
    bool fitted = false;
    if (cc.rows() > eq.block_size()) {
      const Eigen::MatrixXd X = build_design(eq, cc);
      const Eigen::VectorXd y = build_response(eq, cc);
      const Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(cc.rows()));
      for (double lam : {cfg.lambda, std::max(cfg.lambda, 1e-3), 1.0}) {
        try {
          FitOptions o;
          o.lambda = lam;
          const FitResult r = fit_weighted_ridge_trinomial(X, y, w, o);
          if (r.converged && !r.separated) {
            eq.coef = r.coefficients;
            fitted = true;
            break;
          }
        } catch (const NumericalError&) {
        }
      }
    }
    if (!fitted) {
      const auto bs = static_cast<Eigen::Index>(eq.block_size());
      eq.coef.setZero();
      eq.coef[0] = std::log(counts[1] / counts[0]);
      eq.coef[bs] = std::log(counts[2] / counts[0]);
    }
  }
  return sys;
}

EmResult ridge_em(const Dataset& data, const ModelSystem& start, const EmConfig& cfg) {
  if (cfg.max_iter < 1) throw ConfigError("max_iter must be >= 1");
  EmResult res;
  res.theta = start;
  for (int it = 0; it < cfg.max_iter; ++it) {
    EStepResult e = e_step(data, res.theta, cfg, static_cast<std::uint64_t>(it));
    MStepInfo info;
    ModelSystem next = m_step(data, e.wcd, res.theta, cfg, &info);
    for (auto& s : info.notes) res.notes.push_back("iteration " + std::to_string(it + 1) + ": " + s);
    const Eigen::VectorXd a = res.theta.flatten(), b = next.flatten();
    EmIteration rec;
    rec.iteration = it + 1;
    rec.lambda = cfg.lambda;
    rec.change = (b - a).lpNorm<Eigen::Infinity>();
    rec.q = q_value(next, e.wcd, cfg.lambda);
    rec.loglik = std::isnan(e.observed_loglik) ? kNaN : e.observed_loglik - ridge_penalty(res.theta, cfg.lambda);
    res.trace.push_back(rec);
    res.theta = std::move(next);
    if (e.imputations.individuals.empty()) {
      res.converged = true;
      res.last_e = std::move(e);
      return res;
    }
    if (rec.change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.last_e = e_step(data, res.theta, cfg, static_cast<std::uint64_t>(cfg.max_iter) + 1);
  return res;
}

Eigen::MatrixXd q_information(const ModelSystem& theta, const WeightedCompleteData& wcd, double lambda) {
  const auto P = static_cast<Eigen::Index>(theta.param_count());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(P, P);
  const auto off = theta.offsets();
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(wcd.weight.data(), static_cast<Eigen::Index>(wcd.rows()));
  parallel_for(theta.equations.size(), [&](std::size_t e) {
    const Equation& eq = theta.equations[e];
    const Eigen::MatrixXd X = build_design(eq, wcd);
    const auto k = static_cast<Eigen::Index>(eq.param_count());
    A.block(static_cast<Eigen::Index>(off[e]), static_cast<Eigen::Index>(off[e]), k, k) =
        eq.classes() == 3 ? trinomial_information(X, w, eq.coef, equation_lambda(eq, lambda))
                          : binary_information(X, w, eq.coef, equation_lambda(eq, lambda));
  });
  return A;
}

Eigen::MatrixXd conditional_score_variance(const ModelSystem& theta, const WeightedCompleteData& wcd) {
  const auto P = static_cast<Eigen::Index>(theta.param_count());
  const auto off = theta.offsets();
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(P, P);
  constexpr Eigen::Index kChunk = 256;
  Eigen::MatrixXd C(kChunk, P);
  Eigen::Index filled = 0;
  const auto flush = [&] {
    if (filled == 0) return;
    V.selfadjointView<Eigen::Lower>().rankUpdate(C.topRows(filled).transpose());
    filled = 0;
  };
  Eigen::MatrixXd S;
  std::size_t r = 0;
  while (r < wcd.rows()) {
    std::size_t end = r;
    while (end < wcd.rows() && wcd.individual[end] == wcd.individual[r]) ++end;
    const auto rows = static_cast<Eigen::Index>(end - r);
    if (rows > 1) {
      S.resize(rows, P);
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(P);
      for (Eigen::Index t = 0; t < rows; ++t) {
        Eigen::VectorXd s(P);
        for (std::size_t e = 0; e < theta.equations.size(); ++e) {
          equation_score(theta.equations[e], wcd.row(r + static_cast<std::size_t>(t)), s.data() + off[e]);
        }
        S.row(t) = s.transpose();
        mean += wcd.weight[r + static_cast<std::size_t>(t)] * s;
      }
      for (Eigen::Index t = 0; t < rows; ++t) {
        if (filled == kChunk) flush();
        C.row(filled++) = std::sqrt(wcd.weight[r + static_cast<std::size_t>(t)]) * (S.row(t) - mean.transpose());
      }
    }
    r = end;
  }
  flush();
  return V.selfadjointView<Eigen::Lower>();
}

LouisResult louis_variance(const ModelSystem& theta, const WeightedCompleteData& wcd, double lambda, bool strict) {
  LouisResult res;
  res.information = q_information(theta, wcd, lambda);
  res.score_variance = conditional_score_variance(theta, wcd);
  const Eigen::MatrixXd M = res.information - res.score_variance;
  const auto P = M.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() == Eigen::Success) {
    res.covariance = llt.solve(Eigen::MatrixXd::Identity(P, P));
    return res;
  }
  if (strict) throw NumericalError("observed information is not positive definite; try a larger lambda");
  // Divide-and-conquer LAPACK solver: several times faster than Eigen's at the sizes met here.
  Eigen::MatrixXd Q = M;
  Eigen::VectorXd eig(P);
  if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(P), Q.data(), static_cast<lapack_int>(P),
                     eig.data()) != 0) {
    throw NumericalError("eigendecomposition of the observed information failed");
  }
  const double floor = std::max(1e-8 * eig.cwiseAbs().maxCoeff(), 1e-12);
  // Indefinite directions are reflected rather than floored: a tiny floor would blow the
  // variance up along nearly unidentified genotype-model directions and leak into every block.
  const Eigen::VectorXd inv = eig.unaryExpr([floor](double v) { return 1.0 / std::max(std::abs(v), floor); });
  res.covariance = Q * inv.asDiagonal() * Q.transpose();
  res.regularized = true;
  return res;
}

double ebic_penalty(std::size_t n, std::size_t p, double xi, EbicForm form) {
  const double logN = std::log(static_cast<double>((2 * p + 1) * n));
  return form == EbicForm::Power ? std::pow(logN, xi) : xi * logN;
}

double effective_df(const Eigen::MatrixXd& covariance, const Eigen::MatrixXd& information) {
  return (covariance.cwiseProduct(information.transpose())).sum();
}

double ebic(double q, const Eigen::MatrixXd& covariance, const Eigen::MatrixXd& information, std::size_t n,
            std::size_t p, double xi, EbicForm form) {
  return -2.0 * q + effective_df(covariance, information) * ebic_penalty(n, p, xi, form);
}

}  // namespace mirem
