#include "mirem/cycles.hpp"

#include <algorithm>
#include <set>

#include "mirem/error.hpp"
#include "mirem/rng.hpp"

namespace mirem {

std::vector<std::pair<std::size_t, int>> SelectionReport::full_frequency(std::size_t e) const {
  std::vector<std::pair<std::size_t, int>> out;
  for (auto c : final_structure.at(e)) out.emplace_back(c, frequency[e][c]);
  return out;
}

FinalFit fit_structure(const Dataset& data, const ModelSystem& start, const EmConfig& em, int max_iter, double tol) {
  EmConfig c = em;
  c.max_iter = max_iter;
  c.tol = tol;
  EmResult res = ridge_em(data, start, c);
  FinalFit f;
  const LouisResult L = louis_variance(res.theta, res.last_e.wcd, c.lambda, false);
  f.theta = std::move(res.theta);
  f.covariance = L.covariance;
  f.regularized = L.regularized;
  f.converged = res.converged;
  f.trace = std::move(res.trace);
  f.expanded_rows = res.last_e.wcd.rows();
  f.notes = std::move(res.notes);
  if (f.regularized) f.notes.push_back("observed information not positive definite; negative eigenvalues reflected");
  return f;
}

namespace {

// Predictors kept by the frequency rule.
std::vector<std::size_t> final_set(const std::vector<int>& freq, const std::vector<std::size_t>& candidates, int freq_min,
                                   std::size_t top_frequencies) {
  std::vector<std::size_t> out;
  int bound = freq_min;
  if (top_frequencies > 0) {
    std::set<int, std::greater<>> levels;
    for (auto c : candidates) {
      if (freq[c] > 0) levels.insert(freq[c]);
    }
    if (levels.empty()) return out;
    auto it = levels.begin();
    for (std::size_t t = 1; t < top_frequencies && std::next(it) != levels.end(); ++t) ++it;
    bound = *it;
  }
  for (auto c : candidates) {
    if (freq[c] >= bound && freq[c] > 0) out.push_back(c);
  }
  return out;
}

}  // namespace

SelectionReport run_cycles(const Dataset& data, const CycleConfig& cfg) {
  if (cfg.tau < 1) throw ConfigError("tau must be >= 1");
  if (cfg.kappa < 1) throw ConfigError("kappa must be >= 1");
  const Layout& L = data.layout;
  const std::size_t E = equation_count(L);
  SelectionReport rep;
  rep.layout = L;
  rep.tau = cfg.tau;
  rep.freq_min = cfg.freq_min > 0 ? cfg.freq_min : cfg.tau;
  if (rep.freq_min > cfg.tau) throw ConfigError("freq_min exceeds tau");
  rep.frequency.assign(E, std::vector<int>(L.width(), 0));

  Structure structure = full_structure(L);
  ModelSystem theta = initial_system(data, structure, cfg.em);
  std::vector<bool> screened(E, false);
  for (std::size_t e = 0; e < E; ++e) {
    const Equation& eq = theta.equations[e];
    screened[e] = eq.kind == ResponseKind::Missingness &&
                  minority_count(data, eq) < static_cast<std::size_t>(std::max(cfg.screen_min, 0));
  }
  double lambda = cfg.em.lambda;
  if (cfg.tune) {
    TuneResult t = tune_lambda(data, theta, cfg.em, cfg.tuning, derive_seed(cfg.em.seed, {0x70}));
    lambda = t.lambda_star;
    rep.tuning.emplace_back("initial", std::move(t));
  }

  for (int c = 1; c <= cfg.tau; ++c) {
    CycleRecord rec;
    rec.cycle = c;
    rec.lambda = lambda;
    EmConfig emc = cfg.em;
    emc.lambda = lambda;
    emc.max_iter = cfg.kappa;
    emc.seed = derive_seed(cfg.em.seed, {0xc7, static_cast<std::uint64_t>(c)});
    WeightedCompleteData wcd;
    if (cfg.select_before_em && c == 1) {
      wcd = e_step(data, theta, emc, 0).wcd;
    } else {
      EmResult res = ridge_em(data, theta, emc);
      for (auto& n : res.notes) rep.notes.push_back("cycle " + std::to_string(c) + ", " + n);
      theta = std::move(res.theta);
      rec.trace = std::move(res.trace);
      wcd = std::move(res.last_e.wcd);
    }
    rec.expanded_rows = wcd.rows();
    Structure next(E);
    rec.equations.resize(E);
    for (std::size_t e = 0; e < E; ++e) {
      EquationCycle& ec = rec.equations[e];
      const auto sources = candidate_predictors(L, e);
      if (screened[e] || sources.empty()) {
        ec.screened = screened[e];
        continue;
      }
      ForestParams fp = cfg.forest;
      if (e > 0 && cfg.ntree_aux > 0) fp.ntree = cfg.ntree_aux;
      fp.seed = derive_seed(cfg.forest.seed, {0xf5, static_cast<std::uint64_t>(c), e});
      const ForestModel forest = grow_forest(wcd, theta.equations[e].response_col, sources, fp);
      ec.vimp = variable_importance(forest, wcd);
      ec.oob_error = oob_error(forest, wcd);
      ec.selected = select_variables(ec.vimp, e == 0 ? cfg.select : cfg.aux_select);
      for (auto col : ec.selected) ++rep.frequency[e][col];
      next[e] = ec.selected;
    }
    theta = restructure(theta, next);
    for (std::size_t e = 0; e < E; ++e) {
      if (screened[e]) theta.equations[e].method = FitMethod::Screened;
    }
    rep.cycles.push_back(std::move(rec));
    if (c == cfg.tau) rep.last_complete = std::move(wcd);
  }

  rep.final_structure.resize(E);
  for (std::size_t e = 0; e < E; ++e) {
    if (screened[e]) continue;
    rep.final_structure[e] = final_set(rep.frequency[e], candidate_predictors(L, e), rep.freq_min, cfg.top_frequencies);
  }
  theta = restructure(theta, rep.final_structure);
  for (std::size_t e = 0; e < E; ++e) {
    if (screened[e]) {
      theta.equations[e].method = FitMethod::Screened;
      rep.notes.push_back(theta.equation_name(e) + ": fewer than " + std::to_string(cfg.screen_min) +
                          " minority cases, intercept-only");
    } else if (rep.final_structure[e].empty()) {
      rep.notes.push_back(theta.equation_name(e) + ": no predictor reached the frequency bound, intercept-only");
    }
  }
  if (cfg.tune) {
    TuneResult t = tune_lambda(data, theta, cfg.em, cfg.tuning, derive_seed(cfg.em.seed, {0x71}));
    lambda = t.lambda_star;
    rep.tuning.emplace_back("final", std::move(t));
  }
  EmConfig emf = cfg.em;
  emf.lambda = lambda;
  emf.seed = derive_seed(cfg.em.seed, {0xf1});
  FinalFit fit = fit_structure(data, theta, emf, cfg.final_max_iter, cfg.final_tol);
  for (auto& n : fit.notes) rep.notes.push_back("final, " + n);
  rep.final_model = std::move(fit.theta);
  rep.covariance = std::move(fit.covariance);
  rep.covariance_regularized = fit.regularized;
  rep.final_converged = fit.converged;
  rep.final_trace = std::move(fit.trace);
  rep.final_lambda = lambda;
  rep.final_expanded_rows = fit.expanded_rows;
  rep.mechanism = mechanism_report(rep.final_model, rep.covariance, cfg.alpha);
  return rep;
}

}  // namespace mirem
