#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mirem/model.hpp"

namespace mirem {

// Upper regularized incomplete gamma Q(a, x).
double regularized_gamma_q(double a, double x);
double chi_square_sf(double w, double df);

struct WaldResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::vector<std::size_t> indices;  // positions tested within the supplied vector
};

// W = c' S^{-1} c; throws NumericalError when S is singular.
WaldResult wald_test(const Eigen::VectorXd& coef, const Eigen::MatrixXd& cov);
WaldResult wald_test(const Eigen::VectorXd& coef, const Eigen::MatrixXd& cov, const std::vector<std::size_t>& indices);

std::string significance_stars(double p);

struct CoefficientRow {
  std::string equation;
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

// Per-coefficient z-tests for every equation; `cov` is the full system covariance.
std::vector<CoefficientRow> coefficient_table(const ModelSystem& sys, const Eigen::MatrixXd& cov);

struct TermTest {
  std::string name;  // predictor column name
  std::size_t column = 0;
  WaldResult wald;   // 2 df for a SNP dummy pair, 1 otherwise
  bool related = false;
};

// One Wald test per predictor of equation e (both blocks for trinomial equations).
std::vector<TermTest> term_tests(const ModelSystem& sys, std::size_t e, const Eigen::MatrixXd& cov);

struct MechanismEntry {
  std::size_t equation = 0;
  std::string indicator;
  std::string method;
  std::vector<std::string> related;  // missing-prone covariates present in the equation
  WaldResult joint_all;              // all non-intercept coefficients
  WaldResult joint_related;          // related covariates only (df 0 when none)
  std::vector<TermTest> terms;
  std::vector<CoefficientRow> coefficients;
  bool non_ignorable = false;
  bool includes_own_phenotype = false;  // r(phenotype) equation tests y itself
};

struct MechanismReport {
  double alpha = 0.05;
  std::vector<MechanismEntry> entries;
  bool empty() const { return entries.empty(); }
};

// Missing-prone covariates: SNPs with NAs, missingness indicators, and the phenotype when
// it has NAs. Verdict is non-ignorable iff any of them is significant at `alpha`.
MechanismReport mechanism_report(const ModelSystem& sys, const Eigen::MatrixXd& cov, double alpha = 0.05);

}  // namespace mirem
