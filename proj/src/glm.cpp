#include "mirem/glm.hpp"

#include <algorithm>
#include <functional>

#include "mirem/error.hpp"

namespace mirem {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_inputs(const MatrixXd& X, const VectorXd& y, const VectorXd& w) {
  if (X.rows() != y.size() || X.rows() != w.size()) throw DataError("design, response and weights differ in length");
  if (X.cols() == 0) throw DataError("design has no columns");
  if ((w.array() < 0.0).any() || !w.allFinite()) throw DataError("weights must be finite and non-negative");
  if (w.sum() <= 0.0) throw DataError("weights are all zero");
}

// Ridge penalty mask: 0 on the intercept, 1 elsewhere.
double penalty(const VectorXd& b, Eigen::Index block, double lambda) {
  if (lambda == 0.0) return 0.0;
  double s = 0.0;
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    if (k % block != 0) s += b[k] * b[k];
  }
  return 0.5 * lambda * s;
}

void add_penalty_gradient(VectorXd& g, const VectorXd& b, Eigen::Index block, double lambda) {
  if (lambda == 0.0) return;
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    if (k % block != 0) g[k] -= lambda * b[k];
  }
}

void add_penalty_information(MatrixXd& H, Eigen::Index block, double lambda) {
  if (lambda == 0.0) return;
  for (Eigen::Index k = 0; k < H.rows(); ++k) {
    if (k % block != 0) H(k, k) += lambda;
  }
}

// X^T diag(c) X for non-negative c.
MatrixXd weighted_gram(const MatrixXd& X, const VectorXd& c) {
  MatrixXd Xs = X.array().colwise() * c.array().sqrt();
  MatrixXd G = MatrixXd::Zero(X.cols(), X.cols());
  G.selfadjointView<Eigen::Lower>().rankUpdate(Xs.transpose());
  return G.selfadjointView<Eigen::Lower>();
}

VectorXd sigmoid(const VectorXd& eta) {
  return eta.unaryExpr([](double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); });
}

double max_abs_eta(const VectorXd& eta, const VectorXd& w) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (w[i] > 0.0) m = std::max(m, std::abs(eta[i]));
  }
  return m;
}

struct TrinomialProbs {
  VectorXd eta1, eta2, p1, p2, lse;
};

TrinomialProbs trinomial_probs(const MatrixXd& X, const VectorXd& coef) {
  const Eigen::Index d = X.cols();
  TrinomialProbs t;
  t.eta1 = X * coef.head(d);
  t.eta2 = X * coef.tail(d);
  const Eigen::Index n = X.rows();
  t.p1.resize(n);
  t.p2.resize(n);
  t.lse.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = t.eta1[i], b = t.eta2[i];
    const double mx = std::max({0.0, a, b});
    const double e0 = std::exp(-mx), e1 = std::exp(a - mx), e2 = std::exp(b - mx);
    const double s = e0 + e1 + e2;
    t.lse[i] = mx + std::log(s);
    t.p1[i] = e1 / s;
    t.p2[i] = e2 / s;
  }
  return t;
}

struct NewtonProblem {
  std::function<double(const VectorXd&)> objective;
  std::function<VectorXd(const VectorXd&)> score;
  std::function<MatrixXd(const VectorXd&)> information;
  std::function<double(const VectorXd&)> max_eta;
};

// Newton ascent with step-halving; the objective never decreases beyond rounding slack.
FitResult newton(const NewtonProblem& prob, VectorXd b, const FitOptions& opts) {
  FitResult r;
  r.lambda = opts.lambda;
  double obj = prob.objective(b);
  r.objective_trace.push_back(obj);
  for (int it = 0; it < opts.max_iter; ++it) {
    const VectorXd g = prob.score(b);
    if (!g.allFinite()) throw NumericalError("non-finite score during fitting");
    if (g.lpNorm<Eigen::Infinity>() < opts.tol) {
      r.converged = true;
      break;
    }
    const MatrixXd H = prob.information(b);
    Eigen::LLT<MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) {
      if (prob.max_eta(b) > 0.6 * opts.separation_eta) {
        r.separated = true;
        break;
      }
      throw NumericalError("singular penalized Hessian");
    }
    const VectorXd step = llt.solve(g);
    double t = 1.0;
    bool accepted = false;
    VectorXd bn;
    double on = obj;
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      bn = b + t * step;
      on = prob.objective(bn);
      if (std::isfinite(on) && on >= obj - 1e-12 * (1.0 + std::abs(obj))) {
        accepted = true;
        break;
      }
    }
    ++r.iterations;
    if (!accepted) {
      // No representable improvement: at the optimum up to rounding.
      r.converged = step.lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + b.lpNorm<Eigen::Infinity>());
      break;
    }
    b = bn;
    obj = on;
    r.objective_trace.push_back(obj);
    // Diverging linear predictor: the unpenalized optimum is at infinity.
    if (prob.max_eta(b) > opts.separation_eta) break;
  }
  if (!r.converged && r.iterations >= opts.max_iter) {
    // Final check after the last update.
    r.converged = prob.score(b).lpNorm<Eigen::Infinity>() < opts.tol;
  }
  if (prob.max_eta(b) > opts.separation_eta) {
    r.separated = true;
    r.converged = false;
  }
  r.coefficients = b;
  r.penalized_loglik = obj;
  r.information = prob.information(b);
  Eigen::LLT<MatrixXd> llt(r.information);
  if (llt.info() != Eigen::Success) {
    if (r.separated) {
      r.covariance = r.information.completeOrthogonalDecomposition().pseudoInverse();
      return r;
    }
    throw NumericalError("penalized information is not positive definite at the optimum");
  }
  r.covariance = llt.solve(MatrixXd::Identity(b.size(), b.size()));
  return r;
}

VectorXd binary_start(const MatrixXd& X, const VectorXd& y, const VectorXd& w) {
  VectorXd b = VectorXd::Zero(X.cols());
  const double mean = std::clamp(w.dot(y) / w.sum(), 1e-4, 1.0 - 1e-4);
  b[0] = std::log(mean / (1.0 - mean));
  return b;
}

}  // namespace

double binary_penalized_loglik(const MatrixXd& X, const VectorXd& y, const VectorXd& w, const VectorXd& coef,
                               double lambda) {
  const VectorXd eta = X * coef;
  double s = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (w[i] != 0.0) s += w[i] * (y[i] * eta[i] - log1pexp(eta[i]));
  }
  return s - penalty(coef, coef.size(), lambda);
}

VectorXd binary_gradient(const MatrixXd& X, const VectorXd& y, const VectorXd& w, const VectorXd& coef,
                         double lambda) {
  const VectorXd pi = sigmoid(X * coef);
  VectorXd g = X.transpose() * (w.array() * (y - pi).array()).matrix();
  add_penalty_gradient(g, coef, coef.size(), lambda);
  return g;
}

MatrixXd binary_information(const MatrixXd& X, const VectorXd& w, const VectorXd& coef, double lambda) {
  const VectorXd pi = sigmoid(X * coef);
  MatrixXd H = weighted_gram(X, (w.array() * pi.array() * (1.0 - pi.array())).matrix());
  add_penalty_information(H, coef.size(), lambda);
  return H;
}

double trinomial_penalized_loglik(const MatrixXd& X, const VectorXd& y, const VectorXd& w, const VectorXd& coef,
                                  double lambda) {
  const auto t = trinomial_probs(X, coef);
  double s = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (w[i] == 0.0) continue;
    const double eta = y[i] == 1.0 ? t.eta1[i] : (y[i] == 2.0 ? t.eta2[i] : 0.0);
    s += w[i] * (eta - t.lse[i]);
  }
  return s - penalty(coef, X.cols(), lambda);
}

VectorXd trinomial_gradient(const MatrixXd& X, const VectorXd& y, const VectorXd& w, const VectorXd& coef,
                            double lambda) {
  const Eigen::Index d = X.cols();
  const auto t = trinomial_probs(X, coef);
  const VectorXd r1 = (w.array() * ((y.array() == 1.0).cast<double>() - t.p1.array())).matrix();
  const VectorXd r2 = (w.array() * ((y.array() == 2.0).cast<double>() - t.p2.array())).matrix();
  VectorXd g(2 * d);
  g.head(d) = X.transpose() * r1;
  g.tail(d) = X.transpose() * r2;
  add_penalty_gradient(g, coef, d, lambda);
  return g;
}

MatrixXd trinomial_information(const MatrixXd& X, const VectorXd& w, const VectorXd& coef, double lambda) {
  const Eigen::Index d = X.cols();
  const auto t = trinomial_probs(X, coef);
  MatrixXd H(2 * d, 2 * d);
  H.topLeftCorner(d, d) = weighted_gram(X, (w.array() * t.p1.array() * (1.0 - t.p1.array())).matrix());
  H.bottomRightCorner(d, d) = weighted_gram(X, (w.array() * t.p2.array() * (1.0 - t.p2.array())).matrix());
  const VectorXd c12 = (w.array() * t.p1.array() * t.p2.array()).matrix();
  H.topRightCorner(d, d) = -weighted_gram(X, c12);
  H.bottomLeftCorner(d, d) = H.topRightCorner(d, d).transpose();
  add_penalty_information(H, d, lambda);
  return H;
}

FitResult fit_weighted_ridge_binary(const MatrixXd& X, const VectorXd& y, const VectorXd& w, const FitOptions& opts,
                                    const std::optional<VectorXd>& start) {
  check_inputs(X, y, w);
  if (opts.lambda < 0.0) throw DataError("lambda must be non-negative");
  NewtonProblem prob{
      [&](const VectorXd& b) { return binary_penalized_loglik(X, y, w, b, opts.lambda); },
      [&](const VectorXd& b) { return binary_gradient(X, y, w, b, opts.lambda); },
      [&](const VectorXd& b) { return binary_information(X, w, b, opts.lambda); },
      [&](const VectorXd& b) { return max_abs_eta(X * b, w); }};
  const VectorXd b0 = start && start->size() == X.cols() ? *start : binary_start(X, y, w);
  return newton(prob, b0, opts);
}

FitResult fit_weighted_ridge_trinomial(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                                       const FitOptions& opts, const std::optional<VectorXd>& start) {
  check_inputs(X, y, w);
  if (opts.lambda < 0.0) throw DataError("lambda must be non-negative");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0 && y[i] != 2.0) throw DataError("trinomial response outside {0,1,2}");
  }
  const Eigen::Index d = X.cols();
  NewtonProblem prob{
      [&](const VectorXd& b) { return trinomial_penalized_loglik(X, y, w, b, opts.lambda); },
      [&](const VectorXd& b) { return trinomial_gradient(X, y, w, b, opts.lambda); },
      [&](const VectorXd& b) { return trinomial_information(X, w, b, opts.lambda); },
      [&](const VectorXd& b) {
        return std::max(max_abs_eta(X * b.head(d), w), max_abs_eta(X * b.tail(d), w));
      }};
  VectorXd b0;
  if (start && start->size() == 2 * d) {
    b0 = *start;
  } else {
    b0 = VectorXd::Zero(2 * d);
    const double W = w.sum();
    const double f0 = std::max(w.dot((y.array() == 0.0).cast<double>().matrix()) / W, 1e-4);
    const double f1 = std::max(w.dot((y.array() == 1.0).cast<double>().matrix()) / W, 1e-4);
    const double f2 = std::max(w.dot((y.array() == 2.0).cast<double>().matrix()) / W, 1e-4);
    b0[0] = std::log(f1 / f0);
    b0[d] = std::log(f2 / f0);
  }
  return newton(prob, b0, opts);
}

FitResult fit_firth_binary(const MatrixXd& X, const VectorXd& y, const VectorXd& w, const FitOptions& opts,
                           const std::optional<VectorXd>& start) {
  check_inputs(X, y, w);
  FitOptions o = opts;
  o.lambda = 0.0;
  // Firth estimates stay finite under separation, so large |eta| is legitimate here.
  o.separation_eta = std::numeric_limits<double>::infinity();
  const auto objective = [&](const VectorXd& b) {
    const MatrixXd I = binary_information(X, w, b, 0.0);
    Eigen::LLT<MatrixXd> llt(I);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return binary_penalized_loglik(X, y, w, b, 0.0) + 0.5 * logdet;
  };
  const auto score = [&](const VectorXd& b) {
    const VectorXd pi = sigmoid(X * b);
    const VectorXd v = (w.array() * pi.array() * (1.0 - pi.array())).matrix();
    const MatrixXd I = weighted_gram(X, v);
    Eigen::LLT<MatrixXd> llt(I);
    if (llt.info() != Eigen::Success) throw NumericalError("singular Fisher information in Firth fit");
    // h_i = v_i x_i^T I^{-1} x_i
    const MatrixXd A = llt.matrixL().solve(X.transpose());
    const VectorXd h = (v.array() * A.colwise().squaredNorm().transpose().array()).matrix();
    const VectorXd r = (w.array() * (y - pi).array() + h.array() * (0.5 - pi.array())).matrix();
    return VectorXd(X.transpose() * r);
  };
  NewtonProblem prob{objective, score, [&](const VectorXd& b) { return binary_information(X, w, b, 0.0); },
                     [&](const VectorXd& b) { return max_abs_eta(X * b, w); }};
  const VectorXd b0 = start && start->size() == X.cols() ? *start : binary_start(X, y, w);
  FitResult r = newton(prob, b0, o);
  r.lambda = 0.0;
  return r;
}

}  // namespace mirem
