#include "mirem/model.hpp"

#include <algorithm>
#include <cmath>

#include "mirem/error.hpp"
#include "mirem/glm.hpp"

namespace mirem {

const char* to_string(FitMethod m) {
  switch (m) {
    case FitMethod::Ridge: return "ridge";
    case FitMethod::Firth: return "firth";
    case FitMethod::RidgeFallback: return "ridge-fallback";
    case FitMethod::Screened: return "screened";
  }
  return "?";
}

std::size_t feature_count(const std::vector<std::size_t>& predictors, std::size_t m) {
  std::size_t d = 0;
  for (auto c : predictors) d += c < m ? 2 : 1;
  return d;
}

std::size_t Equation::block_size() const { return 1 + feature_count(predictors, m); }

std::vector<std::string> Equation::coefficient_names(const Layout& layout) const {
  std::vector<std::string> block{"(intercept)"};
  for (auto c : predictors) {
    if (c < layout.m) {
      block.push_back(layout.snp_names[c] + "(1)");
      block.push_back(layout.snp_names[c] + "(2)");
    } else {
      block.push_back(layout.column_name(c));
    }
  }
  if (classes() == 2) return block;
  std::vector<std::string> out;
  for (int k = 1; k <= 2; ++k) {
    for (const auto& b : block) out.push_back("[" + std::to_string(k) + "] " + b);
  }
  return out;
}

std::string ModelSystem::equation_name(std::size_t e) const {
  return layout.column_name(equations.at(e).response_col);
}

std::size_t ModelSystem::param_count() const {
  std::size_t s = 0;
  for (const auto& e : equations) s += e.param_count();
  return s;
}

std::vector<std::size_t> ModelSystem::offsets() const {
  std::vector<std::size_t> o;
  std::size_t s = 0;
  for (const auto& e : equations) {
    o.push_back(s);
    s += e.param_count();
  }
  return o;
}

Eigen::VectorXd ModelSystem::flatten() const {
  Eigen::VectorXd t(param_count());
  std::size_t s = 0;
  for (const auto& e : equations) {
    t.segment(s, e.param_count()) = e.coef;
    s += e.param_count();
  }
  return t;
}

void ModelSystem::unflatten(const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != param_count()) throw DataError("parameter vector has wrong length");
  std::size_t s = 0;
  for (auto& e : equations) {
    e.coef = theta.segment(s, e.param_count());
    s += e.param_count();
  }
}

std::size_t equation_count(const Layout& layout) { return 1 + 2 * layout.p() + (layout.pheno_indicator ? 1 : 0); }

std::vector<std::size_t> candidate_predictors(const Layout& layout, std::size_t e) {
  const std::size_t p = layout.p();
  std::vector<std::size_t> out;
  if (e == 0) {
    for (std::size_t j = 0; j < layout.m; ++j) out.push_back(j);
  } else if (e <= p) {
    out = layout.z_part;
    out.insert(out.end(), layout.x_part.begin(), layout.x_part.begin() + static_cast<std::ptrdiff_t>(e - 1));
    std::sort(out.begin(), out.end());
  } else if (e < equation_count(layout)) {
    const std::size_t k = e - 1 - p;  // == p for r(y)
    for (std::size_t j = 0; j <= layout.m; ++j) out.push_back(j);
    for (std::size_t t = 0; t < k; ++t) out.push_back(layout.indicator_col(t));
  } else {
    throw DataError("equation index out of range");
  }
  return out;
}

Structure full_structure(const Layout& layout) {
  Structure s;
  for (std::size_t e = 0; e < equation_count(layout); ++e) s.push_back(candidate_predictors(layout, e));
  return s;
}

ModelSystem make_system(const Layout& layout, const Structure& structure) {
  if (structure.size() != equation_count(layout)) throw DataError("structure has wrong equation count");
  ModelSystem sys;
  sys.layout = layout;
  const std::size_t p = layout.p();
  for (std::size_t e = 0; e < structure.size(); ++e) {
    Equation eq;
    eq.m = layout.m;
    if (e == 0) {
      eq.kind = ResponseKind::Phenotype;
      eq.response_col = layout.pheno_col();
    } else if (e <= p) {
      eq.kind = ResponseKind::Genotype;
      eq.response_col = layout.x_part[e - 1];
    } else {
      eq.kind = ResponseKind::Missingness;
      eq.response_col = layout.m + 1 + (e - 1 - p);
    }
    const auto allowed = candidate_predictors(layout, e);
    eq.predictors = structure[e];
    std::sort(eq.predictors.begin(), eq.predictors.end());
    eq.predictors.erase(std::unique(eq.predictors.begin(), eq.predictors.end()), eq.predictors.end());
    for (auto c : eq.predictors) {
      if (!std::binary_search(allowed.begin(), allowed.end(), c)) {
        throw DataError("predictor " + layout.column_name(c) + " not allowed in equation " + layout.column_name(eq.response_col));
      }
    }
    eq.coef = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(eq.param_count()));
    sys.equations.push_back(std::move(eq));
  }
  return sys;
}

namespace {

// Map predictor column -> position of its first coefficient inside a block (after intercept).
std::vector<long> block_positions(const Equation& eq, std::size_t width) {
  std::vector<long> pos(width, -1);
  long s = 1;
  for (auto c : eq.predictors) {
    pos[c] = s;
    s += c < eq.m ? 2 : 1;
  }
  return pos;
}

}  // namespace

ModelSystem restructure(const ModelSystem& old, const Structure& structure) {
  ModelSystem sys = make_system(old.layout, structure);
  const std::size_t width = old.layout.width();
  for (std::size_t e = 0; e < sys.equations.size(); ++e) {
    const Equation& from = old.equations[e];
    Equation& to = sys.equations[e];
    to.method = from.method;
    const auto pf = block_positions(from, width);
    const auto bf = static_cast<Eigen::Index>(from.block_size());
    const auto bt = static_cast<Eigen::Index>(to.block_size());
    for (int k = 0; k < (to.classes() == 3 ? 2 : 1); ++k) {
      to.coef[k * bt] = from.coef[k * bf];
      Eigen::Index s = 1;
      for (auto c : to.predictors) {
        const int len = c < to.m ? 2 : 1;
        if (pf[c] >= 0) {
          for (int d = 0; d < len; ++d) to.coef[k * bt + s + d] = from.coef[k * bf + pf[c] + d];
        }
        s += len;
      }
    }
  }
  return sys;
}

void append_features(const std::vector<std::size_t>& predictors, std::size_t m, const std::uint8_t* row, double* out) {
  for (auto c : predictors) {
    const std::uint8_t v = row[c];
    if (c < m) {
      *out++ = v == 1 ? 1.0 : 0.0;
      *out++ = v == 2 ? 1.0 : 0.0;
    } else {
      *out++ = static_cast<double>(v);
    }
  }
}

Eigen::MatrixXd build_design(const Equation& eq, const WeightedCompleteData& wcd) {
  const auto n = static_cast<Eigen::Index>(wcd.rows());
  const auto d = static_cast<Eigen::Index>(eq.block_size());
  // Fill row-major then transpose into Eigen's column-major storage.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    X(r, 0) = 1.0;
    append_features(eq.predictors, eq.m, wcd.row(static_cast<std::size_t>(r)), X.row(r).data() + 1);
  }
  return X;
}

Eigen::VectorXd build_response(const Equation& eq, const WeightedCompleteData& wcd) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(wcd.rows()));
  for (std::size_t r = 0; r < wcd.rows(); ++r) {
    const auto v = wcd.cell(r, eq.response_col);
    if (v == kMissing) throw DataError("missing response in expanded data for " + wcd.layout.column_name(eq.response_col));
    y[static_cast<Eigen::Index>(r)] = v;
  }
  return y;
}

namespace {

// Linear predictor of block k without materializing the design row.
double block_eta(const Equation& eq, Eigen::Index offset, const std::uint8_t* row) {
  const double* b = eq.coef.data() + offset;
  double eta = b[0];
  std::size_t s = 1;
  for (auto c : eq.predictors) {
    const std::uint8_t v = row[c];
    if (c < eq.m) {
      if (v == 1) eta += b[s];
      else if (v == 2) eta += b[s + 1];
      s += 2;
    } else {
      if (v) eta += b[s] * v;
      s += 1;
    }
  }
  return eta;
}

}  // namespace

double equation_loglik(const Equation& eq, const std::uint8_t* row) {
  const std::uint8_t y = row[eq.response_col];
  if (eq.classes() == 2) {
    const double eta = block_eta(eq, 0, row);
    return (y ? eta : 0.0) - log1pexp(eta);
  }
  const auto bs = static_cast<Eigen::Index>(eq.block_size());
  const double e1 = block_eta(eq, 0, row), e2 = block_eta(eq, bs, row);
  const double mx = std::max({0.0, e1, e2});
  const double lse = mx + std::log(std::exp(-mx) + std::exp(e1 - mx) + std::exp(e2 - mx));
  return (y == 1 ? e1 : (y == 2 ? e2 : 0.0)) - lse;
}

double joint_loglik(const ModelSystem& sys, const std::uint8_t* row) {
  double s = 0.0;
  for (const auto& eq : sys.equations) s += equation_loglik(eq, row);
  return s;
}

void equation_score(const Equation& eq, const std::uint8_t* row, double* out) {
  const std::size_t bs = eq.block_size();
  const std::uint8_t y = row[eq.response_col];
  std::vector<double> x(bs);
  x[0] = 1.0;
  append_features(eq.predictors, eq.m, row, x.data() + 1);
  if (eq.classes() == 2) {
    const double eta = block_eta(eq, 0, row);
    const double r = (y ? 1.0 : 0.0) - 1.0 / (1.0 + std::exp(-eta));
    for (std::size_t t = 0; t < bs; ++t) out[t] = x[t] * r;
    return;
  }
  const double e1 = block_eta(eq, 0, row), e2 = block_eta(eq, static_cast<Eigen::Index>(bs), row);
  const double mx = std::max({0.0, e1, e2});
  const double z0 = std::exp(-mx), z1 = std::exp(e1 - mx), z2 = std::exp(e2 - mx);
  const double s = z0 + z1 + z2;
  const double r1 = (y == 1 ? 1.0 : 0.0) - z1 / s;
  const double r2 = (y == 2 ? 1.0 : 0.0) - z2 / s;
  for (std::size_t t = 0; t < bs; ++t) {
    out[t] = x[t] * r1;
    out[bs + t] = x[t] * r2;
  }
}

double ridge_penalty(const ModelSystem& sys, double lambda) {
  if (lambda == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& eq : sys.equations) {
    const auto bs = static_cast<Eigen::Index>(eq.block_size());
    for (Eigen::Index t = 0; t < eq.coef.size(); ++t) {
      if (t % bs != 0) s += eq.coef[t] * eq.coef[t];
    }
  }
  return 0.5 * lambda * s;
}

}  // namespace mirem
