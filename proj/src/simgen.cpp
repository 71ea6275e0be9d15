#include "mirem/simgen.hpp"

#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "mirem/error.hpp"
#include "mirem/rng.hpp"

namespace mirem {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

std::vector<std::string> default_snp_names(std::size_t m) {
  std::vector<std::string> names;
  names.reserve(m);
  for (std::size_t j = 0; j < m; ++j) names.push_back("snp_" + std::to_string(j + 1));
  return names;
}

}  // namespace

void CorrelationSpec::validate() const {
  if (m == 0) throw ConfigError("m must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");
  if (!(maf_low > 0.0 && maf_low <= maf_high && maf_high < 0.5)) {
    throw ConfigError("MAF bounds must satisfy 0 < maf_low <= maf_high < 0.5");
  }
}

GenotypeMatrix gen_correlated_snps(std::size_t n, const CorrelationSpec& spec, std::vector<double>* mafs_out) {
  spec.validate();
  if (n < 2) throw ConfigError("n must be at least 2");
  Rng rng(derive_seed(spec.seed, {0x5eed}));
  const boost::math::normal_distribution<double> std_normal;

  std::vector<double> maf(spec.m), cut1(spec.m), cut2(spec.m);
  for (std::size_t j = 0; j < spec.m; ++j) {
    maf[j] = spec.maf_low + (spec.maf_high - spec.maf_low) * uniform01(rng);
    const double q = 1.0 - maf[j];
    cut1[j] = boost::math::quantile(std_normal, q * q);              // P(g=0) = (1-maf)^2
    cut2[j] = boost::math::quantile(std_normal, 1.0 - maf[j] * maf[j]);  // P(g=2) = maf^2
  }

  GenotypeMatrix g(n, default_snp_names(spec.m));
  // Inverse-CDF draws from 53 raw bits keep the stream identical across standard libraries.
  const auto normal = [&](Rng& r) {
    return boost::math::quantile(std_normal, (static_cast<double>(r() >> 11) + 0.5) * 0x1.0p-53);
  };
  const double innov = std::sqrt(1.0 - spec.rho * spec.rho);
  for (std::size_t i = 0; i < n; ++i) {
    double z = normal(rng);
    for (std::size_t j = 0; j < spec.m; ++j) {
      if (j > 0) z = spec.rho * z + innov * normal(rng);
      g.set(i, j, z > cut2[j] ? 2 : (z > cut1[j] ? 1 : 0));
    }
  }
  if (mafs_out) *mafs_out = maf;
  return g;
}

double linear_predictor(const PhenotypeModelSpec& spec, const GenotypeMatrix& g, std::size_t i) {
  double eta = spec.intercept;
  for (const auto& t : spec.terms) {
    if (t.snp >= g.cols()) throw ConfigError("phenotype term references SNP beyond m");
    const auto v = g(i, t.snp);
    if (v == kMissing) throw DataError("phenotype model references an NA genotype");
    if (t.coding == TermCoding::Numeric) {
      eta += t.coef1 * v;
    } else {
      eta += v == 1 ? t.coef1 : (v == 2 ? t.coef2 : 0.0);
    }
  }
  return eta;
}

PhenotypeVector gen_phenotype(const GenotypeMatrix& g, const PhenotypeModelSpec& spec, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0xfe0}));
  std::vector<std::uint8_t> y(g.rows());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    y[i] = uniform01(rng) < logistic(linear_predictor(spec, g, i)) ? 1 : 0;
  }
  return PhenotypeVector(std::move(y));
}

InjectedData inject_missingness(const GenotypeMatrix& g, const PhenotypeVector& y, const MissingnessSpec& spec,
                                std::uint64_t seed) {
  if (y.size() != g.rows()) throw DataError("phenotype length does not match genotype rows");
  InjectedData out{g, y, {}, g, y};
  for (std::size_t t = 0; t < spec.targets.size(); ++t) {
    const auto& target = spec.targets[t];
    if (!std::isfinite(target.xi0) || !std::isfinite(target.xi1)) throw ConfigError("non-finite missingness parameter");
    Rng rng(derive_seed(seed, {0x1a, t}));
    if (target.snp) {
      const std::size_t j = *target.snp;
      if (j >= g.cols()) throw ConfigError("missingness target beyond m");
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double u = uniform01(rng);
        if (g(i, j) == kMissing) continue;
        if (u < logistic(target.xi0 + target.xi1 * g(i, j))) out.g.set(i, j, kMissing);
      }
    } else {
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double u = uniform01(rng);
        if (y[i] == kMissing) continue;
        if (u < logistic(target.xi0 + target.xi1 * y[i])) out.y.set(i, kMissing);
      }
    }
  }
  out.mask = make_mask(out.g, out.y);
  return out;
}

MissingnessSummary summarize_missingness(const MissingMask& mask) {
  MissingnessSummary s;
  const std::size_t p = mask.p();
  s.column_proportion.assign(p, 0.0);
  for (std::size_t i = 0; i < mask.n; ++i) {
    std::size_t c = 0;
    for (std::size_t k = 0; k < p; ++k) {
      if (mask.snp(i, k)) {
        ++c;
        s.column_proportion[k] += 1.0;
      }
    }
    s.total += c;
    ++s.per_individual[c];
    if (!mask.pheno_mask.empty() && mask.pheno_mask[i]) ++s.phenotype_missing;
  }
  if (mask.n > 0) {
    for (auto& v : s.column_proportion) v /= static_cast<double>(mask.n);
  }
  return s;
}

std::size_t preset_column(std::size_t one_based, bool desk) {
  if (one_based == 0 || one_based > 100 || (desk && one_based > 5 && (one_based < 30 || one_based > 64))) {
    throw ConfigError("SNP " + std::to_string(one_based) + " has no column at this scale");
  }
  // Columns 41.. map to 17.. at desk scale; columns 1..5 stay put.
  return (desk && one_based > 5 ? one_based - 24 : one_based) - 1;
}

SimulationSpec preset_spec(Preset which, bool desk, std::uint64_t seed) {
  SimulationSpec s;
  s.n = desk ? 400 : 1000;
  s.correlation.m = desk ? 40 : 100;
  s.correlation.seed = seed;
  const auto col = [desk](std::size_t one_based) { return preset_column(one_based, desk); };
  const double xi1[10] = {1.1, 0.4, 1.1, 0.4, 1.1, 0.4, 1.1, 0.4, 1.1, 0.4};
  const std::size_t miss_cols[10] = {1, 2, 3, 4, 5, 41, 42, 43, 44, 45};
  for (std::size_t t = 0; t < 10; ++t) s.missingness.targets.push_back({col(miss_cols[t]), -2.0, xi1[t]});

  s.phenotype.intercept = -2.2;
  if (which == Preset::Sim1) {
    s.phenotype.terms = {{col(41), TermCoding::DummyPair, 1.6, 1.4},
                         {col(42), TermCoding::DummyPair, 1.8, -0.8},
                         {col(50), TermCoding::DummyPair, -1.7, -0.9}};
    s.signal_snps = {col(41), col(42), col(50)};
  } else {
    const double b[10] = {1.2, 1.8, 1.6, 1.3, 1.7, -0.8, -1.0, -0.9, -1.4, -1.0};
    for (std::size_t t = 0; t < 10; ++t) {
      s.phenotype.terms.push_back({col(41 + t), TermCoding::Numeric, b[t], 0.0});
      s.signal_snps.push_back(col(41 + t));
    }
    s.missingness.targets.push_back({std::nullopt, -2.0, 1.2});
  }
  return s;
}

SimulatedData simulate(const SimulationSpec& spec, std::uint64_t seed) {
  CorrelationSpec corr = spec.correlation;
  corr.seed = derive_seed(seed, {1});
  SimulatedData out;
  const GenotypeMatrix g = gen_correlated_snps(spec.n, corr, &out.mafs);
  const PhenotypeVector y = gen_phenotype(g, spec.phenotype, derive_seed(seed, {2}));
  out.data = inject_missingness(g, y, spec.missingness, derive_seed(seed, {3}));
  return out;
}

}  // namespace mirem
