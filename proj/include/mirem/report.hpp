#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mirem/cycles.hpp"
#include "mirem/inference.hpp"

namespace mirem {

// Left-aligned plain-text table; the first row is the header.
std::string format_table(const std::vector<std::vector<std::string>>& rows);

std::string format_coefficient_table(const std::vector<CoefficientRow>& rows);
std::string format_mechanism_report(const MechanismReport& m);

// Writes mechanism.csv (one row per tested covariate), mechanism_summary.csv and mechanism.txt.
void write_mechanism_files(const std::string& dir, const MechanismReport& m);

// Full bundle of a pipeline run: frequencies, cycles, vimp, coefficients, snp_tests,
// mechanism files, em_trace, lambda_tuning, model.json and summary.txt.
void write_run_report(const std::string& dir, const SelectionReport& rep);

struct ModelBundle {
  ModelSystem model;
  Eigen::MatrixXd covariance;  // empty when the bundle carries none
  double lambda = 0.0;
  double alpha = 0.05;
};

void write_model_json(const std::string& path, const ModelSystem& sys, const Eigen::MatrixXd& cov, double lambda,
                      double alpha);
// Throws DataError on malformed files or a covariance that does not match the model.
ModelBundle read_model_json(const std::string& path);

// Creates `dir` and parents; throws DataError on failure.
void ensure_directory(const std::string& dir);

}  // namespace mirem
