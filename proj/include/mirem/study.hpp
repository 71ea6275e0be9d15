#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mirem/config.hpp"
#include "mirem/cycles.hpp"
#include "mirem/simgen.hpp"

namespace mirem {

// Standard analysis ignoring the missingness: logistic regression on all active SNPs
// (dummy coded, lambda = 0) plus forest importance.
struct BaselineResult {
  std::vector<std::size_t> snps;  // active columns of the input matrix
  std::size_t n_used = 0;
  std::vector<CoefficientRow> coefficients;
  std::vector<Vimp> vimp;         // sources index into `snps`
  bool converged = false;
  bool degenerate = false;        // rank deficient, separated, non-convergent or exploding standard errors
  std::string diagnostic;
};

BaselineResult run_baseline_complete(const GenotypeMatrix& g, const PhenotypeVector& y, const ForestParams& fp);
// Drops individuals with any NA among `columns` (or in y), then as run_baseline_complete.
BaselineResult run_baseline_completecase(const GenotypeMatrix& g, const PhenotypeVector& y,
                                         const std::vector<std::size_t>& columns, const ForestParams& fp);

// Weighted fit of the phenotype equation on complete data with the given SNP predictors.
struct PhenotypeFit {
  std::vector<CoefficientRow> coefficients;
  bool converged = false;
  std::string method;
};
PhenotypeFit fit_phenotype_on_complete(const WeightedCompleteData& wcd, const std::vector<std::size_t>& snps,
                                       double lambda);

struct ReplicateResult {
  std::uint64_t seed = 0;
  SimulatedData sim;
  std::vector<std::size_t> signal_snps;
  BaselineResult complete, completecase_all, completecase_window;  // sim1 only
  SelectionReport report;                   // sim1: fixed lambda; sim2: EBIC tuning
  std::optional<SelectionReport> cv_report;  // sim2: cross-validation tuning
  std::vector<std::pair<int, std::vector<int>>> tau_frequencies;  // sim2: phenotype frequencies per tau
  std::vector<std::pair<std::string, double>> timings;              // stage, seconds

  // Phenotype final set of a report.
  static std::vector<std::size_t> phenotype_set(const SelectionReport& r) { return r.final_structure.at(0); }
};

struct StudyBundle {
  StudyConfig config;
  std::vector<ReplicateResult> replicates;
};

// Runs every replicate; writes tables under cfg.out unless `write` is false.
StudyBundle run_full_study(const StudyConfig& cfg, bool write = true);
ReplicateResult run_replicate(const StudyConfig& cfg, std::uint64_t seed);
void write_replicate(const std::string& dir, const StudyConfig& cfg, const ReplicateResult& r);

}  // namespace mirem
