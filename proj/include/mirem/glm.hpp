#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace mirem {

// Weighted penalized logistic fitters used by the M-step. Column 0 of every design is
// the intercept and is never penalized.

struct FitOptions {
  double lambda = 0.0;
  double tol = 1e-8;  // gradient max-norm
  int max_iter = 100;
  // |eta| beyond this on a positive-weight row marks the fit as separated.
  double separation_eta = 25.0;
};

struct FitResult {
  Eigen::VectorXd coefficients;  // trinomial: [alpha_1; alpha_2]
  Eigen::MatrixXd information;   // penalized observed information at the optimum
  Eigen::MatrixXd covariance;    // inverse of `information`
  bool converged = false;
  bool separated = false;
  int iterations = 0;
  double penalized_loglik = 0.0;
  double lambda = 0.0;
  std::vector<double> objective_trace;  // objective after each accepted iteration
};

FitResult fit_weighted_ridge_binary(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                    const Eigen::VectorXd& weights, const FitOptions& opts = {},
                                    const std::optional<Eigen::VectorXd>& start = std::nullopt);

// Baseline category 0; both log-odds equations share `design`.
FitResult fit_weighted_ridge_trinomial(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                       const Eigen::VectorXd& weights, const FitOptions& opts = {},
                                       const std::optional<Eigen::VectorXd>& start = std::nullopt);

// Jeffreys-prior penalized likelihood; `opts.lambda` is ignored.
FitResult fit_firth_binary(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                           const Eigen::VectorXd& weights, const FitOptions& opts = {},
                           const std::optional<Eigen::VectorXd>& start = std::nullopt);

// Objective values, exposed for oracles and EM bookkeeping.
double binary_penalized_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                               const Eigen::VectorXd& weights, const Eigen::VectorXd& coef, double lambda);
double trinomial_penalized_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                  const Eigen::VectorXd& weights, const Eigen::VectorXd& coef, double lambda);
Eigen::VectorXd binary_gradient(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                const Eigen::VectorXd& weights, const Eigen::VectorXd& coef, double lambda);
Eigen::VectorXd trinomial_gradient(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                   const Eigen::VectorXd& weights, const Eigen::VectorXd& coef, double lambda);

// Negative Hessians (penalized) at `coef`.
Eigen::MatrixXd binary_information(const Eigen::MatrixXd& design, const Eigen::VectorXd& weights,
                                   const Eigen::VectorXd& coef, double lambda);
Eigen::MatrixXd trinomial_information(const Eigen::MatrixXd& design, const Eigen::VectorXd& weights,
                                      const Eigen::VectorXd& coef, double lambda);

// log(1 + e^t) without overflow.
inline double log1pexp(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

}  // namespace mirem
