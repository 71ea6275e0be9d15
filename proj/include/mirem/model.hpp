#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mirem/data.hpp"

namespace mirem {

// Predictors are Layout columns. A SNP column expands to its dummy pair; the phenotype
// and indicator columns enter as single 0/1 columns.

enum class ResponseKind : std::uint8_t { Phenotype, Genotype, Missingness };
enum class FitMethod : std::uint8_t { Ridge, Firth, RidgeFallback, Screened };

const char* to_string(FitMethod m);

struct Equation {
  ResponseKind kind = ResponseKind::Phenotype;
  std::size_t response_col = 0;
  std::size_t m = 0;                    // SNP count, to tell dummy-pair predictors apart
  std::vector<std::size_t> predictors;  // sorted Layout columns
  Eigen::VectorXd coef;                 // [intercept, slopes]; trinomial stacks two such blocks
  FitMethod method = FitMethod::Ridge;
  bool converged = true;

  int classes() const { return kind == ResponseKind::Genotype ? 3 : 2; }
  std::size_t block_size() const;  // 1 + design columns
  std::size_t param_count() const { return block_size() * (classes() == 3 ? 2 : 1); }
  std::vector<std::string> coefficient_names(const Layout& layout) const;
};

// Equation order: [0] phenotype, [1..p] genotype of x_part[k], [p+1..2p] r_k, then r(y) if present.
struct ModelSystem {
  Layout layout;
  std::vector<Equation> equations;

  std::size_t p() const { return layout.p(); }
  std::size_t genotype_eq(std::size_t k) const { return 1 + k; }
  std::size_t missingness_eq(std::size_t k) const { return 1 + p() + k; }
  bool has_pheno_missingness() const { return layout.pheno_indicator; }
  std::size_t pheno_missingness_eq() const { return 1 + 2 * p(); }
  std::string equation_name(std::size_t e) const;

  std::size_t param_count() const;
  std::vector<std::size_t> offsets() const;  // start of each equation in the flat vector
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& theta);
};

using Structure = std::vector<std::vector<std::size_t>>;

// All predictors an equation may use.
std::vector<std::size_t> candidate_predictors(const Layout& layout, std::size_t equation);
Structure full_structure(const Layout& layout);
std::size_t equation_count(const Layout& layout);

// Zero-coefficient system with the given structure.
ModelSystem make_system(const Layout& layout, const Structure& structure);
// Carries coefficients of predictors that survive into `structure`; new ones start at 0.
ModelSystem restructure(const ModelSystem& old, const Structure& structure);

// Design columns of one row for `predictors` (without intercept) appended to `out`.
void append_features(const std::vector<std::size_t>& predictors, std::size_t m, const std::uint8_t* row, double* out);
std::size_t feature_count(const std::vector<std::size_t>& predictors, std::size_t m);

// Design matrix (with intercept) and response for an equation over expanded rows.
Eigen::MatrixXd build_design(const Equation& eq, const WeightedCompleteData& wcd);
Eigen::VectorXd build_response(const Equation& eq, const WeightedCompleteData& wcd);

// log p(response | predictors) for one complete row.
double equation_loglik(const Equation& eq, const std::uint8_t* row);
// Sum over all equations: the unnormalized log imputation weight.
double joint_loglik(const ModelSystem& sys, const std::uint8_t* row);

// Per-row complete-data score of one equation, written into `out` (length param_count()).
void equation_score(const Equation& eq, const std::uint8_t* row, double* out);

// (lambda/2) * squared norm of all non-intercept coefficients.
double ridge_penalty(const ModelSystem& sys, double lambda);

}  // namespace mirem
