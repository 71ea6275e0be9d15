#include <doctest.h>

#include <cmath>
#include <random>

#include "mirem/forest.hpp"

using namespace mirem;

namespace {

// Complete data (no NAs) wrapped as expanded rows with unit weights.
WeightedCompleteData complete_rows(const GenotypeMatrix& g, const PhenotypeVector& y) {
  return expand_complete_data(make_dataset(g, y), ImputationSet{});
}

// Mann-Whitney U test, two-sided normal approximation with tie-corrected ranks.
double rank_test_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<std::pair<double, int>> all;
  for (double v : a) all.emplace_back(v, 0);
  for (double v : b) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end());
  std::vector<double> rank(all.size());
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    for (std::size_t k = i; k < j; ++k) rank[k] = 0.5 * (i + j - 1) + 1;
    i = j;
  }
  double ra = 0;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].second == 0) ra += rank[i];
  const double n1 = a.size(), n2 = b.size();
  const double u = ra - n1 * (n1 + 1) / 2;
  const double sd = std::sqrt(n1 * n2 * (n1 + n2 + 1) / 12.0);
  if (sd == 0) return 1.0;
  const double z = std::abs(u - n1 * n2 / 2) / sd;
  return std::erfc(z / std::sqrt(2.0));
}

}  // namespace

TEST_CASE("single-tree MDA equals the hand computation") {
  GenotypeMatrix g(4, {"a"}, {1, 0, 1, 2});
  WeightedCompleteData wcd = complete_rows(g, PhenotypeVector({1, 0, 0, 0}));
  wcd.weight = {1.0, 1.0, 2.0, 1.0};
  const auto features = make_features({0}, 1);
  REQUIRE(features.size() == 2);
  Tree t;
  t.nodes = {{0, 1, 2, 0}, {-1, -1, -1, 1}, {-1, -1, -1, 0}};  // a == 1 ? 1 : 0
  t.oob = {0, 1, 2, 3};
  // Before: only row 2 (weight 2) wrong, loss 2/5. After swapping pairs the codes become
  // (0,1,2,1): rows 0, 1 and 3 wrong, loss 3/5.
  CHECK(permutation_mda(t, features, wcd, 1, 0, {1, 0, 3, 2}) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(permutation_mda(t, features, wcd, 1, 0, {0, 1, 2, 3}) == 0.0);
}

TEST_CASE("a constant predictor has zero MDA and is never selected") {
  std::mt19937_64 rng(2);
  const std::size_t n = 200;
  GenotypeMatrix g(n, {"signal", "constant"});
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::uint8_t>(rng() % 3);
    g.set(i, 0, v);
    g.set(i, 1, 1);
    y[i] = (v == 2) != (rng() % 10 == 0);
  }
  const auto wcd = complete_rows(g, PhenotypeVector(y));
  ForestParams fp;
  fp.ntree = 100;
  const ForestModel f = grow_forest(wcd, 2, {0, 1}, fp);
  const auto v = variable_importance(f, wcd);
  CHECK(v[1].mda == 0.0);
  CHECK(v[1].mdg == 0.0);
  CHECK(v[0].mda > 0.05);
  CHECK(select_variables(v, SelectionPolicy::parse("threshold:0")) == std::vector<std::size_t>{0});
  CHECK(oob_error(f, wcd) < 0.2);
}

TEST_CASE("two half-weight copies of each row behave like the row itself") {
  std::mt19937_64 rng(11);
  const std::size_t n = 120;
  GenotypeMatrix g(n, {"a", "b", "c"});
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) g.set(i, j, static_cast<std::uint8_t>(rng() % 3));
    y[i] = (g(i, 0) + (rng() % 3)) > 2;
  }
  const WeightedCompleteData base = complete_rows(g, PhenotypeVector(y));
  WeightedCompleteData dup = base;
  dup.individual.clear();
  dup.weight.clear();
  dup.provenance.clear();
  dup.cells.clear();
  const std::size_t w = base.layout.width();
  for (std::size_t r = 0; r < base.rows(); ++r) {
    for (int copy = 0; copy < 2; ++copy) {
      dup.individual.push_back(base.individual[r]);
      dup.weight.push_back(0.5);
      dup.provenance.push_back(Provenance::Imputed);
      dup.cells.insert(dup.cells.end(), base.row(r), base.row(r) + w);
    }
  }
  std::vector<double> ea, eb;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    ForestParams fp;
    fp.ntree = 30;
    fp.seed = s;
    ea.push_back(oob_error(grow_forest(base, 3, {0, 1, 2}, fp), base));
    fp.seed = 1000 + s;
    eb.push_back(oob_error(grow_forest(dup, 3, {0, 1, 2}, fp), dup));
  }
  CHECK(rank_test_p(ea, eb) > 0.01);
}

TEST_CASE("selection policies") {
  const std::vector<Vimp> v{{3, 0.02, 0}, {5, -0.01, 0}, {7, 0.05, 0}, {9, 0.0, 0}};
  CHECK(select_variables(v, SelectionPolicy::parse("threshold:0")) == std::vector<std::size_t>{3, 7});
  CHECK(select_variables(v, SelectionPolicy::parse("top:1")) == std::vector<std::size_t>{7});
  CHECK(select_variables(v, SelectionPolicy::parse("top:4")) == std::vector<std::size_t>{3, 5, 7, 9});
  CHECK(SelectionPolicy::parse("top:2").str() == "top:2");
  CHECK_THROWS(SelectionPolicy::parse("best:2"));
}

TEST_CASE("forests are reproducible from the seed") {
  std::mt19937_64 rng(5);
  GenotypeMatrix g(80, {"a", "b"});
  std::vector<std::uint8_t> y(80);
  for (std::size_t i = 0; i < 80; ++i) {
    g.set(i, 0, static_cast<std::uint8_t>(rng() % 3));
    g.set(i, 1, static_cast<std::uint8_t>(rng() % 3));
    y[i] = rng() % 2;
  }
  const auto wcd = complete_rows(g, PhenotypeVector(y));
  ForestParams fp;
  fp.ntree = 20;
  const auto a = variable_importance(grow_forest(wcd, 2, {0, 1}, fp), wcd);
  const auto b = variable_importance(grow_forest(wcd, 2, {0, 1}, fp), wcd);
  for (std::size_t k = 0; k < 2; ++k) CHECK(a[k].mda == b[k].mda);
}
