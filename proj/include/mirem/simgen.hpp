#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mirem/data.hpp"

namespace mirem {

struct CorrelationSpec {
  std::size_t m = 100;
  double rho = 0.8;
  double maf_low = 0.3;
  double maf_high = 0.4;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class TermCoding : std::uint8_t { Numeric, DummyPair };

struct PhenotypeTerm {
  std::size_t snp = 0;  // 0-based column
  TermCoding coding = TermCoding::Numeric;
  double coef1 = 0.0;   // numeric slope, or coefficient of I(g=1)
  double coef2 = 0.0;   // coefficient of I(g=2); unused for numeric coding
};

struct PhenotypeModelSpec {
  double intercept = 0.0;
  std::vector<PhenotypeTerm> terms;
};

// Target of an injected missingness mechanism: a SNP column, or the phenotype when `snp` is empty.
struct MissingnessTarget {
  std::optional<std::size_t> snp;
  double xi0 = 0.0;
  double xi1 = 0.0;
};

struct MissingnessSpec {
  std::vector<MissingnessTarget> targets;
};

// Latent Gaussian AR(1) field with corr rho^|i-j| thresholded at Hardy-Weinberg cut-points.
// `mafs_out`, when given, receives the per-column minor allele frequencies drawn.
GenotypeMatrix gen_correlated_snps(std::size_t n, const CorrelationSpec& spec, std::vector<double>* mafs_out = nullptr);

double linear_predictor(const PhenotypeModelSpec& spec, const GenotypeMatrix& g, std::size_t i);
PhenotypeVector gen_phenotype(const GenotypeMatrix& g, const PhenotypeModelSpec& spec, std::uint64_t seed);

struct InjectedData {
  GenotypeMatrix g;
  PhenotypeVector y;
  MissingMask mask;
  GenotypeMatrix truth_g;  // ground truth; never passed to the analysis pipeline
  PhenotypeVector truth_y;
};

InjectedData inject_missingness(const GenotypeMatrix& g, const PhenotypeVector& y, const MissingnessSpec& spec,
                                std::uint64_t seed);

struct MissingnessSummary {
  std::vector<double> column_proportion;           // one per mask column
  std::map<std::size_t, std::size_t> per_individual;  // missing count -> individuals
  std::size_t total = 0;
  std::size_t phenotype_missing = 0;
};

MissingnessSummary summarize_missingness(const MissingMask& mask);

// Presets reproducing the two validation studies; `desk` shrinks to n=400, m=40
// with the missing-prone and signal columns shifted to keep their relative offsets.
enum class Preset : std::uint8_t { Sim1, Sim2 };

struct SimulationSpec {
  std::size_t n = 1000;
  CorrelationSpec correlation;
  PhenotypeModelSpec phenotype;
  MissingnessSpec missingness;
  std::vector<std::size_t> signal_snps;  // 0-based, for evaluation
};

SimulationSpec preset_spec(Preset which, bool desk, std::uint64_t seed);
// 0-based column of a full-scale 1-based SNP number; desk scale shifts columns above 5 down by 24.
std::size_t preset_column(std::size_t one_based, bool desk);

struct SimulatedData {
  InjectedData data;
  std::vector<double> mafs;
};

SimulatedData simulate(const SimulationSpec& spec, std::uint64_t seed);

}  // namespace mirem
