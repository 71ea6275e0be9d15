#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mirem/em.hpp"

// Test-only helpers shared by the unit tests and the acceptance runner.
namespace oracle {

using namespace mirem;

// n x m genotypes with NAs in the first `p` columns at rate `rate`; phenotype NA at `yrate`.
inline Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t m, std::size_t p, double rate,
                              double yrate = 0.0, std::size_t max_nu = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < m; ++j) names.push_back("s" + std::to_string(j));
  GenotypeMatrix g(n, names);
  std::vector<std::uint8_t> yv(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t nu = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double r = u(rng);
      g.set(i, j, r < 0.4 ? 0 : r < 0.8 ? 1 : 2);
      if (j < p && nu < max_nu && u(rng) < rate) {
        g.set(i, j, kMissing);
        ++nu;
      }
    }
    yv[i] = u(rng) < 0.4 ? 1 : 0;
    if (u(rng) < yrate) yv[i] = kMissing;
  }
  // Every missing-prone column keeps some observed values of each class.
  for (std::size_t j = 0; j < m; ++j)
    for (std::uint8_t v = 0; v < 3; ++v) g.set(v, j, v);
  yv[0] = 0;
  yv[1] = 1;
  return make_dataset(std::move(g), PhenotypeVector(std::move(yv)));
}

inline ModelSystem random_system(const Dataset& d, std::uint64_t seed, double scale = 0.6) {
  ModelSystem sys = make_system(d.layout, full_structure(d.layout));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& eq : sys.equations)
    for (Eigen::Index k = 0; k < eq.coef.size(); ++k) eq.coef[k] = nd(rng);
  return sys;
}

// Independent evaluator: design row and log-probability written out directly.
inline double oracle_eq_loglik(const Equation& eq, const std::vector<std::uint8_t>& row) {
  std::vector<double> x{1.0};
  for (auto c : eq.predictors) {
    if (c < eq.m) {
      x.push_back(row[c] == 1 ? 1.0 : 0.0);
      x.push_back(row[c] == 2 ? 1.0 : 0.0);
    } else {
      x.push_back(row[c]);
    }
  }
  const std::size_t b = x.size();
  auto eta = [&](std::size_t block) {
    double s = 0;
    for (std::size_t k = 0; k < b; ++k) s += eq.coef[static_cast<Eigen::Index>(block * b + k)] * x[k];
    return s;
  };
  const int v = row[eq.response_col];
  if (eq.classes() == 2) {
    const double e = eta(0);
    return v * e - std::log(1.0 + std::exp(e));
  }
  const double e1 = eta(0), e2 = eta(1);
  const double lse = std::log(1.0 + std::exp(e1) + std::exp(e2));
  return (v == 0 ? 0.0 : v == 1 ? e1 : e2) - lse;
}

inline std::vector<std::uint8_t> oracle_row(const Dataset& d, std::size_t i, const IndividualImputation& imp,
                                            const std::vector<std::uint8_t>& cand) {
  const Layout& L = d.layout;
  std::vector<std::uint8_t> row(L.width());
  for (std::size_t j = 0; j < L.m; ++j) row[j] = d.g(i, j);
  row[L.pheno_col()] = d.y[i];
  for (std::size_t k = 0; k < L.p(); ++k) row[L.indicator_col(k)] = d.g.is_missing(i, L.x_part[k]) ? 1 : 0;
  if (L.pheno_indicator) row[L.pheno_indicator_col()] = d.y.is_missing(i) ? 1 : 0;
  for (std::size_t t = 0; t < imp.missing_x.size(); ++t) row[L.x_part[imp.missing_x[t]]] = cand[t];
  if (imp.phenotype_missing) row[L.pheno_col()] = cand.back();
  return row;
}

inline std::vector<double> oracle_weights(const Dataset& d, const ModelSystem& sys, std::size_t i,
                                          const IndividualImputation& imp) {
  std::vector<double> lw;
  for (const auto& c : imp.candidates) {
    const auto row = oracle_row(d, i, imp, c);
    double s = 0;
    for (const auto& eq : sys.equations) s += oracle_eq_loglik(eq, row);
    lw.push_back(s);
  }
  double mx = lw[0];
  for (double v : lw) mx = std::max(mx, v);
  double z = 0;
  for (double& v : lw) z += (v = std::exp(v - mx));
  for (double& v : lw) v /= z;
  return lw;
}

}  // namespace oracle
