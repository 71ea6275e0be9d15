#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "mirem/inference.hpp"
#include "mirem/report.hpp"

using namespace mirem;

namespace {

// Upper tail of the chi-square density by numerical integration.
double quadrature_sf(double w, double df) {
  const double k = df / 2;
  const auto dens = [k](double x) {
    if (x <= 0) return 0.0;
    return std::exp((k - 1) * std::log(x) - x / 2 - k * std::log(2.0) - std::lgamma(k));
  };
  boost::math::quadrature::exp_sinh<double> tail;
  if (w >= 1) return tail.integrate(dens, w, INFINITY);
  boost::math::quadrature::tanh_sinh<double> body;
  return body.integrate(dens, w, 1.0) + tail.integrate(dens, 1.0, INFINITY);
}

}  // namespace

TEST_CASE("chi-square survival function agrees with quadrature") {
  double worst = 0;
  for (int df = 1; df <= 30; ++df) {
    for (double w = 0; w <= 100; w += 2.5) worst = std::max(worst, std::abs(chi_square_sf(w, df) - quadrature_sf(w, df)));
    worst = std::max(worst, std::abs(chi_square_sf(0.01, df) - quadrature_sf(0.01, df)));
  }
  CHECK(worst < 1e-10);
  CHECK(chi_square_sf(0, 3) == 1.0);
}

TEST_CASE("scalar and null Wald tests") {
  Eigen::VectorXd c(1);
  c << 2;
  Eigen::MatrixXd s(1, 1);
  s << 1;
  const WaldResult r = wald_test(c, s);
  CHECK(r.statistic == doctest::Approx(4.0));
  CHECK(r.df == 1);
  CHECK(std::abs(r.p_value - quadrature_sf(4.0, 1)) < 1e-8);
  CHECK(r.p_value == doctest::Approx(0.0455).epsilon(1e-3));

  const WaldResult z = wald_test(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  CHECK(z.statistic == 0.0);
  CHECK(z.p_value == 1.0);
  CHECK_THROWS(wald_test(Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Zero(2, 2)));
}

TEST_CASE("Wald statistic is invariant under invertible reparametrization") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd B(4, 4), A(4, 4);
  Eigen::VectorXd c(4);
  for (int i = 0; i < 4; ++i) {
    c[i] = nd(rng);
    for (int j = 0; j < 4; ++j) {
      B(i, j) = nd(rng);
      A(i, j) = nd(rng) + (i == j ? 3.0 : 0.0);
    }
  }
  const Eigen::MatrixXd S = B * B.transpose() + Eigen::MatrixXd::Identity(4, 4);
  const WaldResult r0 = wald_test(c, S);
  const WaldResult r1 = wald_test(A * c, A * S * A.transpose());
  CHECK(r1.statistic == doctest::Approx(r0.statistic).epsilon(1e-10));

  // Subsets pick the matching block.
  const WaldResult sub = wald_test(c, S, {1, 3});
  Eigen::VectorXd cs(2);
  cs << c[1], c[3];
  Eigen::MatrixXd ss(2, 2);
  ss << S(1, 1), S(1, 3), S(3, 1), S(3, 3);
  CHECK(sub.statistic == doctest::Approx(wald_test(cs, ss).statistic));
  CHECK(sub.df == 2);
}

TEST_CASE("zero missingness slopes are all ignorable") {
  GenotypeMatrix g(6, {"a", "b"}, {0, 1, kMissing, 2, 1, 0, 2, kMissing, 0, 1, 1, 2});
  const Dataset d = make_dataset(g, PhenotypeVector({0, 1, 0, 1, 1, 0}));
  const ModelSystem sys = make_system(d.layout, full_structure(d.layout));
  const auto P = static_cast<Eigen::Index>(sys.param_count());
  const MechanismReport m = mechanism_report(sys, Eigen::MatrixXd::Identity(P, P));
  REQUIRE(m.entries.size() == 2);
  for (const auto& e : m.entries) {
    CHECK_FALSE(e.non_ignorable);
    CHECK(e.joint_all.p_value == 1.0);
    CHECK_FALSE(e.related.empty());
  }
  CHECK(format_mechanism_report(m).find("ignorable") != std::string::npos);
}

TEST_CASE("no missing data: no missingness models") {
  GenotypeMatrix g(3, {"a"}, {0, 1, 2});
  const Dataset d = make_dataset(g, PhenotypeVector({0, 1, 0}));
  const ModelSystem sys = make_system(d.layout, full_structure(d.layout));
  const auto P = static_cast<Eigen::Index>(sys.param_count());
  const MechanismReport m = mechanism_report(sys, Eigen::MatrixXd::Identity(P, P));
  CHECK(m.empty());
  CHECK(format_mechanism_report(m).find("no missingness models fitted") != std::string::npos);
}

TEST_CASE("significance stars") {
  CHECK(significance_stars(1e-5) == "***");
  CHECK(significance_stars(0.005) == "**");
  CHECK(significance_stars(0.03) == "*");
  CHECK(significance_stars(0.07) == ".");
  CHECK(significance_stars(0.5) == "");
}
