#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mirem {

// Cell value used for NA in genotype and phenotype storage.
inline constexpr std::uint8_t kMissing = 0xFF;

// n x m genotype calls in {0,1,2,NA}, row-major.
class GenotypeMatrix {
 public:
  GenotypeMatrix() = default;
  GenotypeMatrix(std::size_t n, std::vector<std::string> snp_names);
  GenotypeMatrix(std::size_t n, std::vector<std::string> snp_names, std::vector<std::uint8_t> values);

  std::size_t rows() const { return n_; }
  std::size_t cols() const { return names_.size(); }
  std::uint8_t operator()(std::size_t i, std::size_t j) const { return values_[i * cols() + j]; }
  bool is_missing(std::size_t i, std::size_t j) const { return (*this)(i, j) == kMissing; }
  void set(std::size_t i, std::size_t j, std::uint8_t v);

  const std::vector<std::string>& snp_names() const { return names_; }
  const std::vector<std::uint8_t>& values() const { return values_; }
  std::size_t missing_count() const;
  std::size_t column_missing_count(std::size_t j) const;

  bool operator==(const GenotypeMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::string> names_;
  std::vector<std::uint8_t> values_;
};

// Binary phenotype in {0,1,NA}.
class PhenotypeVector {
 public:
  PhenotypeVector() = default;
  explicit PhenotypeVector(std::vector<std::uint8_t> values);

  std::size_t size() const { return values_.size(); }
  std::uint8_t operator[](std::size_t i) const { return values_[i]; }
  bool is_missing(std::size_t i) const { return values_[i] == kMissing; }
  void set(std::size_t i, std::uint8_t v);
  const std::vector<std::uint8_t>& values() const { return values_; }
  std::size_t missing_count() const;
  std::size_t count(std::uint8_t v) const;

  bool operator==(const PhenotypeVector&) const = default;

 private:
  std::vector<std::uint8_t> values_;
};

struct MissingMask {
  std::size_t n = 0;
  std::vector<std::size_t> column_order;  // source SNP columns of the p missing-prone SNPs
  std::vector<std::uint8_t> snp_mask;     // n x p row-major
  std::vector<std::uint8_t> pheno_mask;   // n

  std::size_t p() const { return column_order.size(); }
  std::uint8_t snp(std::size_t i, std::size_t k) const { return snp_mask[i * p() + k]; }
  std::size_t popcount() const;
};

MissingMask make_mask(const GenotypeMatrix& g, const PhenotypeVector& y);

// Two dummy columns per SNP: 0 -> (0,0), 1 -> (1,0), 2 -> (0,1). NA cells are NaN.
struct EncodedDesign {
  Eigen::MatrixXd columns;
  bool intercept = true;
  std::vector<std::size_t> source_snp;  // one entry per non-intercept column
  std::vector<std::string> names;
};

EncodedDesign dummy_encode(const GenotypeMatrix& g, bool intercept = true);
GenotypeMatrix decode_design(const EncodedDesign& d, const std::vector<std::string>& snp_names);

struct ColumnSplit {
  std::vector<std::size_t> z_part;  // fully observed SNP columns
  std::vector<std::size_t> x_part;  // SNP columns with at least one NA, in factorization order
};

// x_part follows input column order unless `order` lists the missing-prone columns explicitly.
ColumnSplit split_by_missingness(const GenotypeMatrix& g,
                                 const std::optional<std::vector<std::size_t>>& order = std::nullopt);

// Column layout shared by the complete-data table, the model system and the forests.
// Columns: SNPs [0, m), phenotype m, indicators r_1..r_p at m+1+k, r(y) at m+1+p if present.
struct Layout {
  std::size_t m = 0;
  std::vector<std::size_t> x_part;
  std::vector<std::size_t> z_part;
  bool pheno_indicator = false;
  std::vector<std::string> snp_names;

  std::size_t p() const { return x_part.size(); }
  std::size_t width() const { return m + 1 + p() + (pheno_indicator ? 1 : 0); }
  std::size_t pheno_col() const { return m; }
  std::size_t indicator_col(std::size_t k) const { return m + 1 + k; }
  std::size_t pheno_indicator_col() const { return m + 1 + p(); }
  std::size_t indicator_count() const { return p() + (pheno_indicator ? 1 : 0); }
  std::string column_name(std::size_t c) const;
};

// Observed data bundle consumed by the EM engine and the cycle driver.
struct Dataset {
  GenotypeMatrix g;
  PhenotypeVector y;
  Layout layout;
  MissingMask mask;

  std::size_t n() const { return g.rows(); }
  bool individual_complete(std::size_t i) const;
  std::vector<std::size_t> missing_x(std::size_t i) const;  // indices k into x_part
  // Cells for individual i in Layout order; NA cells hold kMissing.
  std::vector<std::uint8_t> row_template(std::size_t i) const;
};

Dataset make_dataset(GenotypeMatrix g, PhenotypeVector y,
                     const std::optional<std::vector<std::size_t>>& order = std::nullopt);

enum class GenerationMode : std::uint8_t { Enumerated, Gibbs, Truncated };

// Candidate completions of one incomplete individual. Each candidate lists values for
// `missing_x` (SNP codes) followed by the phenotype when `phenotype_missing`.
struct IndividualImputation {
  std::size_t individual = 0;
  std::vector<std::size_t> missing_x;
  bool phenotype_missing = false;
  std::vector<std::vector<std::uint8_t>> candidates;
  std::vector<double> weights;
  std::vector<int> multiplicity;  // Gibbs draw counts; 1 for enumerated candidates
  GenerationMode mode = GenerationMode::Enumerated;
};

struct ImputationSet {
  std::vector<IndividualImputation> individuals;
  bool all_enumerated() const;
  std::size_t candidate_count() const;
};

enum class Provenance : std::uint8_t { Observed, Imputed };

// Row-expanded complete data: one row per (individual, candidate) with its weight.
struct WeightedCompleteData {
  Layout layout;
  std::size_t n_individuals = 0;
  std::vector<std::size_t> individual;
  std::vector<double> weight;
  std::vector<Provenance> provenance;
  std::vector<std::uint8_t> cells;  // rows x layout.width()

  std::size_t rows() const { return individual.size(); }
  std::uint8_t cell(std::size_t r, std::size_t c) const { return cells[r * layout.width() + c]; }
  const std::uint8_t* row(std::size_t r) const { return cells.data() + r * layout.width(); }
};

WeightedCompleteData expand_complete_data(const Dataset& data, const ImputationSet& imp);

// CSV I/O. Header row; phenotype column located by name; other columns are SNPs.
std::pair<GenotypeMatrix, PhenotypeVector> load_genotypes(const std::string& path, const std::string& na_token = "NA",
                                                          const std::string& phenotype_column = "phenotype");
std::pair<GenotypeMatrix, PhenotypeVector> read_genotypes(std::istream& in, const std::string& na_token = "NA",
                                                          const std::string& phenotype_column = "phenotype");
void write_genotypes(std::ostream& out, const GenotypeMatrix& g, const PhenotypeVector* y,
                     const std::string& na_token = "NA", const std::string& phenotype_column = "phenotype");
void write_complete_data_csv(std::ostream& out, const WeightedCompleteData& wcd);

}  // namespace mirem
