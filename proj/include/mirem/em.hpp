#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mirem/data.hpp"
#include "mirem/model.hpp"
#include "mirem/rng.hpp"

namespace mirem {

struct EmConfig {
  double lambda = 0.0;
  std::size_t enum_cap = 27;  // enumerate while 3^nu <= enum_cap, else Gibbs
  int gibbs_draws = 10;
  int gibbs_burnin = 50;
  double eps = 0.0;           // weight truncation threshold
  int firth_min = 15;         // binary equations with observed minority count below this use Firth; 0 disables
  bool firth_on_failure = true;
  int max_iter = 5;
  double tol = 1e-6;          // max-norm change of theta
  std::uint64_t seed = 1;
};

// Ridge used when an unpenalized trinomial fit fails.
inline constexpr double kFallbackLambda = 1e-3;
// An unpenalized fit with a standard error this large is treated as quasi-separated.
inline constexpr double kQuasiSeparationSe = 100.0;
// Penalty an equation was actually fitted with.
double equation_lambda(const Equation& eq, double lambda);

// min(#0, #1) among observed values of a binary equation's response.
std::size_t minority_count(const Dataset& data, const Equation& eq);

enum class CompletionMode : std::uint8_t { Enumerate, Gibbs };

// All 3^nu SNP completions (crossed with y in {0,1} when the phenotype is missing), in
// lexicographic order with the first missing SNP varying slowest.
std::vector<std::vector<std::uint8_t>> enumerate_completions(const Dataset& data, std::size_t i);

// Candidates for individual i. Gibbs mode returns the distinct draws with multiplicities;
// weights are left empty. Throws ConfigError when enumeration exceeds `cfg.enum_cap`.
IndividualImputation candidate_completions(const Dataset& data, std::size_t i, CompletionMode mode,
                                           const ModelSystem& theta, const EmConfig& cfg, Rng& rng);

// Unnormalized log weight of each candidate: the joint log-likelihood of its completed row.
std::vector<double> candidate_logliks(const Dataset& data, const IndividualImputation& imp, const ModelSystem& theta);
// Normalized weights; log-space with max subtraction.
std::vector<double> normalize_log_weights(const std::vector<double>& logw);
std::vector<double> compute_weights(const Dataset& data, const IndividualImputation& imp, const ModelSystem& theta);

// Zero weights below eps and renormalize; the largest (first on ties) always survives.
std::vector<double> truncate_weights(std::vector<double> w, double eps);

struct EStepResult {
  ImputationSet imputations;
  WeightedCompleteData wcd;
  double observed_loglik = 0.0;  // unpenalized; NaN unless every individual was enumerated untruncated
};

EStepResult e_step(const Dataset& data, const ModelSystem& theta, const EmConfig& cfg, std::uint64_t stream);

struct MStepInfo {
  std::vector<std::string> notes;  // fallbacks taken, per equation
};

// Fits every equation on the expanded data, warm-started from `theta`.
ModelSystem m_step(const Dataset& data, const WeightedCompleteData& wcd, const ModelSystem& theta,
                   const EmConfig& cfg, MStepInfo* info = nullptr);

// Penalized weighted complete-data log-likelihood.
double q_value(const ModelSystem& theta, const WeightedCompleteData& wcd, double lambda);
// Penalized observed-data log-likelihood by full enumeration (exact, any nu).
double observed_loglik(const Dataset& data, const ModelSystem& theta, double lambda);

// Starting values: zero slopes with marginal-logit intercepts, genotype equations fitted
// on complete cases.
ModelSystem initial_system(const Dataset& data, const Structure& structure, const EmConfig& cfg);

struct EmIteration {
  int iteration = 0;
  double q = 0.0;
  double loglik = 0.0;  // penalized observed log-likelihood at the E-step parameters, NaN if unavailable
  double change = 0.0;
  double lambda = 0.0;
};

struct EmResult {
  ModelSystem theta;
  std::vector<EmIteration> trace;
  EStepResult last_e;  // E-step at the returned theta
  bool converged = false;
  std::vector<std::string> notes;
};

EmResult ridge_em(const Dataset& data, const ModelSystem& start, const EmConfig& cfg);

// Negative Hessian of Q (penalized), block diagonal over equations.
Eigen::MatrixXd q_information(const ModelSystem& theta, const WeightedCompleteData& wcd, double lambda);
// Sum over individuals of the weighted covariance of complete-data scores across candidates.
Eigen::MatrixXd conditional_score_variance(const ModelSystem& theta, const WeightedCompleteData& wcd);

struct LouisResult {
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd information;  // -d2Q
  Eigen::MatrixXd score_variance;
  bool regularized = false;     // negative eigenvalues were replaced by their magnitude
};

// strict=true throws NumericalError when I - V is not positive definite.
LouisResult louis_variance(const ModelSystem& theta, const WeightedCompleteData& wcd, double lambda,
                           bool strict = true);

enum class EbicForm : std::uint8_t { Power, Multiplier };

double ebic_penalty(std::size_t n, std::size_t p, double xi, EbicForm form);
double effective_df(const Eigen::MatrixXd& covariance, const Eigen::MatrixXd& information);
double ebic(double q, const Eigen::MatrixXd& covariance, const Eigen::MatrixXd& information, std::size_t n,
            std::size_t p, double xi = 2.0, EbicForm form = EbicForm::Power);

}  // namespace mirem
