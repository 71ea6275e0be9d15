#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mirem/data.hpp"
#include "mirem/error.hpp"
#include "mirem/simgen.hpp"

using namespace mirem;

TEST_CASE("dummy coding of genotype cells") {
  GenotypeMatrix g(4, {"a"}, {0, 1, 2, kMissing});
  const EncodedDesign d = dummy_encode(g);
  REQUIRE(d.columns.cols() == 3);
  CHECK(d.columns(0, 1) == 0);
  CHECK(d.columns(0, 2) == 0);
  CHECK(d.columns(1, 1) == 1);
  CHECK(d.columns(1, 2) == 0);
  CHECK(d.columns(2, 1) == 0);
  CHECK(d.columns(2, 2) == 1);
  CHECK(std::isnan(d.columns(3, 1)));
  CHECK(decode_design(d, g.snp_names()) == g);
}

TEST_CASE("splitting columns by missingness") {
  GenotypeMatrix none(2, {"a", "b"}, {0, 1, 2, 0});
  CHECK(split_by_missingness(none).x_part.empty());
  GenotypeMatrix all(2, {"a", "b"}, {kMissing, 1, 2, kMissing});
  const ColumnSplit s = split_by_missingness(all);
  CHECK(s.z_part.empty());
  CHECK(s.x_part == std::vector<std::size_t>{0, 1});
  CHECK(split_by_missingness(all, std::vector<std::size_t>{1, 0}).x_part == std::vector<std::size_t>{1, 0});
  CHECK_THROWS_AS(split_by_missingness(all, std::vector<std::size_t>{1}), DataError);
}

TEST_CASE("genotype CSV round trip and rejection of bad cells") {
  std::mt19937_64 rng(4);
  std::vector<std::string> names{"s1", "s2", "s3", "s4", "s5"};
  GenotypeMatrix g(20, names);
  std::vector<std::uint8_t> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 5; ++j) g.set(i, j, rng() % 7 == 0 ? kMissing : static_cast<std::uint8_t>(rng() % 3));
    y[i] = rng() % 5 == 0 ? kMissing : static_cast<std::uint8_t>(rng() % 2);
  }
  const PhenotypeVector yv(y);
  std::stringstream ss;
  write_genotypes(ss, g, &yv, "NA");
  const auto [g2, y2] = read_genotypes(ss, "NA");
  CHECK(g2 == g);
  CHECK(y2 == yv);

  std::istringstream bad("phenotype,a\n1,3\n");
  CHECK_THROWS_AS(read_genotypes(bad), DataError);
  std::istringstream ragged("phenotype,a,b\n1,0\n");
  CHECK_THROWS_AS(read_genotypes(ragged), DataError);
  CHECK_THROWS_AS(load_genotypes("/nonexistent/file.csv"), DataError);
}

TEST_CASE("expanding complete data without missing values") {
  GenotypeMatrix g(3, {"a"}, {0, 1, 2});
  const Dataset d = make_dataset(g, PhenotypeVector({0, 1, 0}));
  const WeightedCompleteData w = expand_complete_data(d, ImputationSet{});
  CHECK(w.rows() == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(w.weight[r] == 1.0);
    CHECK(w.cell(r, 0) == g(r, 0));
  }
}

TEST_CASE("missingness summaries") {
  GenotypeMatrix g(5, {"a", "b"}, {0, 1, 2, 0, 1, 1, 0, 2, 2, 2});
  MissingnessSummary s = summarize_missingness(make_mask(g, PhenotypeVector({0, 1, 0, 1, 0})));
  CHECK(s.total == 0);
  for (double p : s.column_proportion) CHECK(p == 0.0);
  g.set(2, 1, kMissing);
  s = summarize_missingness(make_mask(g, PhenotypeVector({0, 1, 0, 1, 0})));
  CHECK(s.per_individual == std::map<std::size_t, std::size_t>{{0, 4}, {1, 1}});
  CHECK(s.column_proportion == std::vector<double>{0.2});
}

TEST_CASE("correlated SNPs: MAF band and decaying correlation") {
  CorrelationSpec spec;
  spec.m = 100;
  std::vector<double> mafs;
  const GenotypeMatrix g = gen_correlated_snps(10000, spec, &mafs);
  auto corr = [&](std::size_t a, std::size_t b) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double x = g(i, a), y = g(i, b);
      sa += x, sb += y, saa += x * x, sbb += y * y, sab += x * y;
    }
    const double n = static_cast<double>(g.rows());
    return (sab / n - sa * sb / n / n) / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  };
  for (std::size_t j = 0; j < spec.m; ++j) {
    double alleles = 0;
    for (std::size_t i = 0; i < g.rows(); ++i) alleles += g(i, j);
    const double maf = alleles / (2.0 * g.rows());
    CHECK(maf > 0.27);
    CHECK(maf < 0.43);
    CHECK(std::abs(maf - mafs[j]) < 0.02);
  }
  double lag1 = 0, lag5 = 0;
  for (std::size_t j = 0; j + 5 < spec.m; j += 5) {
    lag1 += corr(j, j + 1);
    lag5 += corr(j, j + 5);
  }
  CHECK(lag5 < lag1);
  CHECK(lag1 > 0);
}

TEST_CASE("null covariates give the base prevalence") {
  GenotypeMatrix g(20000, {"a", "b", "c", "d", "e"}, std::vector<std::uint8_t>(100000, 0));
  PhenotypeModelSpec spec;
  spec.intercept = -2.2;
  spec.terms.push_back({0, TermCoding::Numeric, 1.0, 0.0});
  const PhenotypeVector y = gen_phenotype(g, spec, 3);
  const double prev = static_cast<double>(y.count(1)) / y.size();
  CHECK(prev == doctest::Approx(1.0 / (1.0 + std::exp(2.2))).epsilon(0.1));
}

TEST_CASE("injected missingness matches the closed-form expected proportion") {
  CorrelationSpec cs;
  cs.m = 3;
  cs.maf_low = cs.maf_high = 0.35;
  std::vector<double> mafs;
  const GenotypeMatrix g = gen_correlated_snps(10000, cs, &mafs);
  const PhenotypeVector y(std::vector<std::uint8_t>(10000, 0));
  MissingnessSpec ms;
  ms.targets.push_back({std::size_t{1}, -2.0, 1.1});
  const InjectedData inj = inject_missingness(g, y, ms, 9);
  const double q = mafs[1];
  const double pg[3] = {(1 - q) * (1 - q), 2 * q * (1 - q), q * q};
  double expected = 0;
  for (int k = 0; k < 3; ++k) expected += pg[k] / (1 + std::exp(2.0 - 1.1 * k));
  const double observed = static_cast<double>(inj.g.column_missing_count(1)) / 10000.0;
  CHECK(std::abs(observed - expected) < 0.02);
  CHECK(observed > 0.22);
  CHECK(observed < 0.26);
  CHECK(inj.truth_g == g);
  CHECK(inj.g.column_missing_count(0) == 0);
}

TEST_CASE("simulation presets") {
  const SimulationSpec s1 = preset_spec(Preset::Sim1, false, 1);
  CHECK(s1.n == 1000);
  CHECK(s1.correlation.m == 100);
  CHECK(s1.signal_snps == std::vector<std::size_t>{40, 41, 49});
  const SimulatedData sim = simulate(s1, 1);
  const ColumnSplit split = split_by_missingness(sim.data.g);
  CHECK(split.x_part == std::vector<std::size_t>{0, 1, 2, 3, 4, 40, 41, 42, 43, 44});
  CHECK(split.z_part.size() == 90);
  CHECK(sim.data.y.missing_count() == 0);

  const SimulationSpec d1 = preset_spec(Preset::Sim1, true, 1);
  CHECK(d1.n == 400);
  CHECK(d1.correlation.m == 40);
  CHECK(d1.signal_snps == std::vector<std::size_t>{16, 17, 25});
  CHECK(preset_column(41, true) == 16);
  CHECK(preset_column(3, true) == 2);
  CHECK_THROWS_AS(preset_column(10, true), ConfigError);
  CHECK_THROWS_AS(preset_column(0, false), ConfigError);

  // Bit-exact reproducibility from the seed.
  CHECK(simulate(s1, 1).data.g == sim.data.g);
  CHECK_FALSE(simulate(s1, 2).data.g == sim.data.g);
}
