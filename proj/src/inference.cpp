#include "mirem/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mirem/error.hpp"

namespace mirem {

namespace {

// Lower series: P(a,x) = x^a e^-x / Gamma(a+1) * sum x^n / ((a+1)...(a+n)).
double gamma_p_series(double a, double x) {
  double term = 1.0 / a, sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz evaluation of the continued fraction for Q(a,x).
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw NumericalError("incomplete gamma needs a > 0");
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_sf(double w, double df) {
  if (!(df > 0.0)) throw NumericalError("chi-square df must be positive");
  return regularized_gamma_q(0.5 * df, 0.5 * w);
}

WaldResult wald_test(const Eigen::VectorXd& coef, const Eigen::MatrixXd& cov) {
  if (cov.rows() != coef.size() || cov.cols() != coef.size()) throw DataError("Wald test: non-conformable covariance");
  WaldResult r;
  r.df = static_cast<int>(coef.size());
  for (Eigen::Index t = 0; t < coef.size(); ++t) r.indices.push_back(static_cast<std::size_t>(t));
  if (r.df == 0) return r;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("Wald test: covariance is singular");
  r.statistic = std::max(0.0, coef.dot(llt.solve(coef)));
  r.p_value = chi_square_sf(r.statistic, r.df);
  return r;
}

WaldResult wald_test(const Eigen::VectorXd& coef, const Eigen::MatrixXd& cov, const std::vector<std::size_t>& indices) {
  const auto k = static_cast<Eigen::Index>(indices.size());
  Eigen::VectorXd c(k);
  Eigen::MatrixXd s(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    c[a] = coef[static_cast<Eigen::Index>(indices[a])];
    for (Eigen::Index b = 0; b < k; ++b) {
      s(a, b) = cov(static_cast<Eigen::Index>(indices[a]), static_cast<Eigen::Index>(indices[b]));
    }
  }
  WaldResult r = wald_test(c, s);
  r.indices = indices;
  return r;
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

namespace {

std::vector<CoefficientRow> equation_rows(const ModelSystem& sys, std::size_t e, const Eigen::MatrixXd& cov,
                                          std::size_t off) {
  const Equation& eq = sys.equations[e];
  const auto names = eq.coefficient_names(sys.layout);
  std::vector<CoefficientRow> out;
  for (std::size_t t = 0; t < names.size(); ++t) {
    CoefficientRow r;
    r.equation = sys.equation_name(e);
    r.name = names[t];
    r.estimate = eq.coef[static_cast<Eigen::Index>(t)];
    const double v = cov(static_cast<Eigen::Index>(off + t), static_cast<Eigen::Index>(off + t));
    r.se = v > 0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    r.z = r.estimate / r.se;
    r.p_value = std::isfinite(r.z) ? chi_square_sf(r.z * r.z, 1.0) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(r);
  }
  return out;
}

// Positions (within the flat system vector) of predictor c's coefficients in equation e.
std::vector<std::size_t> term_positions(const Equation& eq, std::size_t off, std::size_t c) {
  std::vector<std::size_t> pos;
  const std::size_t bs = eq.block_size();
  std::size_t s = 1;
  for (auto p : eq.predictors) {
    const std::size_t len = p < eq.m ? 2 : 1;
    if (p == c) {
      for (int k = 0; k < (eq.classes() == 3 ? 2 : 1); ++k) {
        for (std::size_t d = 0; d < len; ++d) pos.push_back(off + k * bs + s + d);
      }
      break;
    }
    s += len;
  }
  return pos;
}

bool is_related(const Layout& L, std::size_t c) {
  if (c < L.m) return std::find(L.x_part.begin(), L.x_part.end(), c) != L.x_part.end();
  if (c == L.pheno_col()) return L.pheno_indicator;
  return true;  // missingness indicators
}

}  // namespace

std::vector<CoefficientRow> coefficient_table(const ModelSystem& sys, const Eigen::MatrixXd& cov) {
  std::vector<CoefficientRow> out;
  const auto off = sys.offsets();
  for (std::size_t e = 0; e < sys.equations.size(); ++e) {
    auto rows = equation_rows(sys, e, cov, off[e]);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

std::vector<TermTest> term_tests(const ModelSystem& sys, std::size_t e, const Eigen::MatrixXd& cov) {
  const Equation& eq = sys.equations[e];
  const std::size_t off = sys.offsets()[e];
  const Eigen::VectorXd theta = sys.flatten();
  std::vector<TermTest> out;
  for (auto c : eq.predictors) {
    TermTest t;
    t.column = c;
    t.name = sys.layout.column_name(c);
    t.related = is_related(sys.layout, c);
    t.wald = wald_test(theta, cov, term_positions(eq, off, c));
    out.push_back(std::move(t));
  }
  return out;
}

MechanismReport mechanism_report(const ModelSystem& sys, const Eigen::MatrixXd& cov, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const auto P = static_cast<Eigen::Index>(sys.param_count());
  if (cov.rows() != P || cov.cols() != P) throw DataError("covariance does not match the model system");
  MechanismReport rep;
  rep.alpha = alpha;
  const auto off = sys.offsets();
  const Eigen::VectorXd theta = sys.flatten();
  for (std::size_t e = 0; e < sys.equations.size(); ++e) {
    const Equation& eq = sys.equations[e];
    if (eq.kind != ResponseKind::Missingness) continue;
    MechanismEntry m;
    m.equation = e;
    m.indicator = sys.equation_name(e);
    m.method = to_string(eq.method);
    m.coefficients = equation_rows(sys, e, cov, off[e]);
    m.terms = term_tests(sys, e, cov);
    std::vector<std::size_t> all, related;
    for (std::size_t t = 1; t < eq.param_count(); ++t) all.push_back(off[e] + t);
    for (const auto& t : m.terms) {
      if (!t.related) continue;
      m.related.push_back(t.name);
      if (t.column == sys.layout.pheno_col() && sys.layout.pheno_indicator &&
          eq.response_col == sys.layout.pheno_indicator_col()) {
        m.includes_own_phenotype = true;
      }
      const auto pos = term_positions(eq, off[e], t.column);
      related.insert(related.end(), pos.begin(), pos.end());
      if (t.wald.p_value < alpha) m.non_ignorable = true;
    }
    m.joint_all = wald_test(theta, cov, all);
    m.joint_related = wald_test(theta, cov, related);
    rep.entries.push_back(std::move(m));
  }
  return rep;
}

}  // namespace mirem
