#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mirem/em.hpp"
#include "mirem/forest.hpp"
#include "mirem/inference.hpp"
#include "mirem/tuning.hpp"

namespace mirem {

struct CycleConfig {
  EmConfig em;                 // em.lambda is the fixed lambda when tuning is off
  int tau = 10;
  int kappa = 5;               // Ridge-EM iterations per cycle
  int final_max_iter = 200;
  double final_tol = 1e-6;
  bool tune = false;
  TuneConfig tuning;
  SelectionPolicy select;      // phenotype equation
  SelectionPolicy aux_select;  // genotype and missingness equations
  int freq_min = 0;            // 0 means tau
  std::size_t top_frequencies = 0;  // > 0: keep predictors in the s* highest frequencies instead
  ForestParams forest;
  int ntree_aux = 0;           // 0 means forest.ntree
  int screen_min = 10;         // missingness equations with fewer minority cases stay intercept-only
  bool select_before_em = false;  // first cycle selects on the initial imputation, skipping EM
  double alpha = 0.05;
};

struct EquationCycle {
  std::vector<std::size_t> selected;
  std::vector<Vimp> vimp;
  bool screened = false;
  double oob_error = 0.0;
};

struct CycleRecord {
  int cycle = 0;
  double lambda = 0.0;
  std::size_t expanded_rows = 0;
  std::vector<EquationCycle> equations;
  std::vector<EmIteration> trace;
};

struct SelectionReport {
  Layout layout;
  int tau = 0;
  int freq_min = 0;
  std::vector<CycleRecord> cycles;
  std::vector<std::vector<int>> frequency;  // [equation][layout column]
  Structure final_structure;
  ModelSystem final_model;
  Eigen::MatrixXd covariance;
  bool covariance_regularized = false;
  bool final_converged = false;
  double final_lambda = 0.0;
  std::size_t final_expanded_rows = 0;
  std::vector<EmIteration> final_trace;
  WeightedCompleteData last_complete;  // complete data formed in the last cycle
  std::vector<std::pair<std::string, TuneResult>> tuning;  // (stage, result)
  MechanismReport mechanism;
  std::vector<std::string> notes;

  // Final-set predictors of equation e with their frequency.
  std::vector<std::pair<std::size_t, int>> full_frequency(std::size_t e) const;
};

SelectionReport run_cycles(const Dataset& data, const CycleConfig& cfg);

// Final-stage fit only: Ridge-EM to convergence on a fixed structure plus Louis variance.
struct FinalFit {
  ModelSystem theta;
  Eigen::MatrixXd covariance;
  bool regularized = false;
  bool converged = false;
  std::vector<EmIteration> trace;
  std::size_t expanded_rows = 0;
  std::vector<std::string> notes;
};

FinalFit fit_structure(const Dataset& data, const ModelSystem& start, const EmConfig& em, int max_iter, double tol);

}  // namespace mirem
