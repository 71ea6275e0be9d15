#include "mirem/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "mirem/error.hpp"

namespace mirem {

namespace {

void check_unique(const std::vector<std::string>& names) {
  std::unordered_set<std::string> seen;
  for (const auto& s : names) {
    if (!seen.insert(s).second) throw DataError("duplicate SNP name '" + s + "'");
  }
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

GenotypeMatrix::GenotypeMatrix(std::size_t n, std::vector<std::string> snp_names)
    : n_(n), names_(std::move(snp_names)), values_(n * names_.size(), 0) {
  check_unique(names_);
}

GenotypeMatrix::GenotypeMatrix(std::size_t n, std::vector<std::string> snp_names, std::vector<std::uint8_t> values)
    : n_(n), names_(std::move(snp_names)), values_(std::move(values)) {
  check_unique(names_);
  if (values_.size() != n_ * names_.size()) throw DataError("genotype value count does not match n x m");
  for (auto v : values_) {
    if (v > 2 && v != kMissing) throw DataError("genotype value outside {0,1,2,NA}");
  }
}

void GenotypeMatrix::set(std::size_t i, std::size_t j, std::uint8_t v) {
  if (v > 2 && v != kMissing) throw DataError("genotype value outside {0,1,2,NA}");
  values_[i * cols() + j] = v;
}

std::size_t GenotypeMatrix::missing_count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), kMissing));
}

std::size_t GenotypeMatrix::column_missing_count(std::size_t j) const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n_; ++i) c += is_missing(i, j);
  return c;
}

PhenotypeVector::PhenotypeVector(std::vector<std::uint8_t> values) : values_(std::move(values)) {
  for (auto v : values_) {
    if (v > 1 && v != kMissing) throw DataError("phenotype value outside {0,1,NA}");
  }
}

void PhenotypeVector::set(std::size_t i, std::uint8_t v) {
  if (v > 1 && v != kMissing) throw DataError("phenotype value outside {0,1,NA}");
  values_[i] = v;
}

std::size_t PhenotypeVector::missing_count() const { return count(kMissing); }

std::size_t PhenotypeVector::count(std::uint8_t v) const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), v));
}

std::size_t MissingMask::popcount() const {
  return static_cast<std::size_t>(std::count(snp_mask.begin(), snp_mask.end(), 1));
}

MissingMask make_mask(const GenotypeMatrix& g, const PhenotypeVector& y) {
  MissingMask mask;
  mask.n = g.rows();
  mask.column_order = split_by_missingness(g).x_part;
  const std::size_t p = mask.column_order.size();
  mask.snp_mask.assign(mask.n * p, 0);
  for (std::size_t i = 0; i < mask.n; ++i) {
    for (std::size_t k = 0; k < p; ++k) mask.snp_mask[i * p + k] = g.is_missing(i, mask.column_order[k]);
  }
  mask.pheno_mask.assign(mask.n, 0);
  for (std::size_t i = 0; i < y.size(); ++i) mask.pheno_mask[i] = y.is_missing(i);
  return mask;
}

EncodedDesign dummy_encode(const GenotypeMatrix& g, bool intercept) {
  EncodedDesign d;
  d.intercept = intercept;
  const std::size_t off = intercept ? 1 : 0;
  d.columns.resize(static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(off + 2 * g.cols()));
  if (intercept) {
    d.columns.col(0).setOnes();
    d.names.emplace_back("(Intercept)");
  }
  for (std::size_t j = 0; j < g.cols(); ++j) {
    d.source_snp.push_back(j);
    d.source_snp.push_back(j);
    d.names.push_back(g.snp_names()[j] + "(1)");
    d.names.push_back(g.snp_names()[j] + "(2)");
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const auto v = g(i, j);
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(off + 2 * j);
      if (v == kMissing) {
        d.columns(r, c) = d.columns(r, c + 1) = std::numeric_limits<double>::quiet_NaN();
      } else {
        d.columns(r, c) = v == 1 ? 1.0 : 0.0;
        d.columns(r, c + 1) = v == 2 ? 1.0 : 0.0;
      }
    }
  }
  return d;
}

GenotypeMatrix decode_design(const EncodedDesign& d, const std::vector<std::string>& snp_names) {
  const std::size_t off = d.intercept ? 1 : 0;
  const std::size_t n = static_cast<std::size_t>(d.columns.rows());
  GenotypeMatrix g(n, snp_names);
  for (std::size_t j = 0; j < snp_names.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = d.columns(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(off + 2 * j));
      const double b = d.columns(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(off + 2 * j + 1));
      if (std::isnan(a) || std::isnan(b)) {
        g.set(i, j, kMissing);
      } else if (a == 1.0 && b == 0.0) {
        g.set(i, j, 1);
      } else if (a == 0.0 && b == 1.0) {
        g.set(i, j, 2);
      } else if (a == 0.0 && b == 0.0) {
        g.set(i, j, 0);
      } else {
        throw DataError("invalid dummy pattern in design");
      }
    }
  }
  return g;
}

ColumnSplit split_by_missingness(const GenotypeMatrix& g, const std::optional<std::vector<std::size_t>>& order) {
  ColumnSplit s;
  std::vector<std::size_t> missing;
  for (std::size_t j = 0; j < g.cols(); ++j) {
    if (g.column_missing_count(j) == 0) {
      s.z_part.push_back(j);
    } else {
      missing.push_back(j);
    }
  }
  if (order) {
    std::vector<std::size_t> a = *order, b = missing;
    std::sort(a.begin(), a.end());
    if (a != b) throw DataError("x_part ordering override must list exactly the SNP columns containing NA");
    s.x_part = *order;
  } else {
    s.x_part = std::move(missing);
  }
  return s;
}

std::string Layout::column_name(std::size_t c) const {
  if (c < m) return snp_names[c];
  if (c == pheno_col()) return "phenotype";
  if (c < m + 1 + p()) return "r(" + snp_names[x_part[c - m - 1]] + ")";
  return "r(phenotype)";
}

bool Dataset::individual_complete(std::size_t i) const {
  if (y.is_missing(i)) return false;
  for (std::size_t k = 0; k < layout.p(); ++k) {
    if (mask.snp(i, k)) return false;
  }
  return true;
}

std::vector<std::size_t> Dataset::missing_x(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < layout.p(); ++k) {
    if (mask.snp(i, k)) out.push_back(k);
  }
  return out;
}

std::vector<std::uint8_t> Dataset::row_template(std::size_t i) const {
  std::vector<std::uint8_t> row(layout.width());
  for (std::size_t j = 0; j < layout.m; ++j) row[j] = g(i, j);
  row[layout.pheno_col()] = y[i];
  for (std::size_t k = 0; k < layout.p(); ++k) row[layout.indicator_col(k)] = mask.snp(i, k);
  if (layout.pheno_indicator) row[layout.pheno_indicator_col()] = mask.pheno_mask[i];
  return row;
}

Dataset make_dataset(GenotypeMatrix g, PhenotypeVector y, const std::optional<std::vector<std::size_t>>& order) {
  if (y.size() != g.rows()) throw DataError("phenotype length does not match genotype rows");
  Dataset d;
  const ColumnSplit split = split_by_missingness(g, order);
  d.layout.m = g.cols();
  d.layout.x_part = split.x_part;
  d.layout.z_part = split.z_part;
  d.layout.pheno_indicator = y.missing_count() > 0;
  d.layout.snp_names = g.snp_names();
  d.mask = make_mask(g, y);
  d.mask.column_order = split.x_part;
  const std::size_t p = split.x_part.size();
  for (std::size_t i = 0; i < d.mask.n; ++i) {
    for (std::size_t k = 0; k < p; ++k) d.mask.snp_mask[i * p + k] = g.is_missing(i, split.x_part[k]);
  }
  d.g = std::move(g);
  d.y = std::move(y);
  return d;
}

bool ImputationSet::all_enumerated() const {
  return std::all_of(individuals.begin(), individuals.end(),
                     [](const IndividualImputation& ii) { return ii.mode == GenerationMode::Enumerated; });
}

std::size_t ImputationSet::candidate_count() const {
  std::size_t c = 0;
  for (const auto& ii : individuals) c += ii.candidates.size();
  return c;
}

WeightedCompleteData expand_complete_data(const Dataset& data, const ImputationSet& imp) {
  WeightedCompleteData w;
  w.layout = data.layout;
  w.n_individuals = data.n();
  const std::size_t width = data.layout.width();
  std::vector<const IndividualImputation*> by_id(data.n(), nullptr);
  for (const auto& ii : imp.individuals) {
    if (ii.individual >= data.n()) throw DataError("imputation refers to unknown individual");
    by_id[ii.individual] = &ii;
  }
  w.cells.reserve(width * (data.n() + imp.candidate_count()));
  for (std::size_t i = 0; i < data.n(); ++i) {
    auto row = data.row_template(i);
    const auto* ii = by_id[i];
    if (data.individual_complete(i)) {
      if (ii && !ii->candidates.empty() && !ii->missing_x.empty()) {
        throw DataError("completion supplied for fully observed individual " + std::to_string(i));
      }
      w.individual.push_back(i);
      w.weight.push_back(1.0);
      w.provenance.push_back(Provenance::Observed);
      w.cells.insert(w.cells.end(), row.begin(), row.end());
      continue;
    }
    if (!ii) throw DataError("no imputation for incomplete individual " + std::to_string(i));
    if (ii->missing_x != data.missing_x(i) || ii->phenotype_missing != data.y.is_missing(i)) {
      throw DataError("completion inconsistent with observed cells for individual " + std::to_string(i));
    }
    const std::size_t len = ii->missing_x.size() + (ii->phenotype_missing ? 1 : 0);
    if (ii->weights.size() != ii->candidates.size()) throw DataError("candidate/weight count mismatch");
    for (std::size_t c = 0; c < ii->candidates.size(); ++c) {
      const auto& cand = ii->candidates[c];
      if (cand.size() != len) throw DataError("completion length mismatch for individual " + std::to_string(i));
      if (ii->weights[c] <= 0.0) continue;
      for (std::size_t t = 0; t < ii->missing_x.size(); ++t) {
        if (cand[t] > 2) throw DataError("completion value outside {0,1,2}");
        row[data.layout.x_part[ii->missing_x[t]]] = cand[t];
      }
      if (ii->phenotype_missing) {
        if (cand.back() > 1) throw DataError("phenotype completion outside {0,1}");
        row[data.layout.pheno_col()] = cand.back();
      }
      w.individual.push_back(i);
      w.weight.push_back(ii->weights[c]);
      w.provenance.push_back(Provenance::Imputed);
      w.cells.insert(w.cells.end(), row.begin(), row.end());
    }
  }
  return w;
}

std::pair<GenotypeMatrix, PhenotypeVector> load_genotypes(const std::string& path, const std::string& na_token,
                                                          const std::string& phenotype_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_genotypes(in, na_token, phenotype_column);
}

std::pair<GenotypeMatrix, PhenotypeVector> read_genotypes(std::istream& in, const std::string& na_token,
                                                          const std::string& phenotype_column) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty genotype file");
  const auto header = split_csv_line(line);
  std::size_t pheno = header.size();
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == phenotype_column) {
      if (pheno != header.size()) throw DataError("phenotype column '" + phenotype_column + "' appears twice");
      pheno = c;
    } else {
      names.push_back(header[c]);
    }
  }
  if (pheno == header.size()) throw DataError("phenotype column '" + phenotype_column + "' not found");
  check_unique(names);

  std::vector<std::uint8_t> values, yv;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto& s = cells[c];
      std::uint8_t v;
      if (s == na_token) {
        v = kMissing;
      } else if (s == "0" || s == "1" || (s == "2" && c != pheno)) {
        v = static_cast<std::uint8_t>(s[0] - '0');
      } else {
        throw DataError("line " + std::to_string(lineno) + ", column " + std::to_string(c + 1) + " ('" +
                        header[c] + "'): invalid cell '" + s + "'");
      }
      (c == pheno ? yv : values).push_back(v);
    }
  }
  const std::size_t n = yv.size();
  return {GenotypeMatrix(n, std::move(names), std::move(values)), PhenotypeVector(std::move(yv))};
}

void write_genotypes(std::ostream& out, const GenotypeMatrix& g, const PhenotypeVector* y, const std::string& na_token,
                     const std::string& phenotype_column) {
  if (y) out << phenotype_column;
  for (std::size_t j = 0; j < g.cols(); ++j) out << (y || j ? "," : "") << g.snp_names()[j];
  out << '\n';
  const auto put = [&](std::uint8_t v) {
    if (v == kMissing) {
      out << na_token;
    } else {
      out << static_cast<int>(v);
    }
  };
  for (std::size_t i = 0; i < g.rows(); ++i) {
    if (y) put((*y)[i]);
    for (std::size_t j = 0; j < g.cols(); ++j) {
      if (y || j) out << ',';
      put(g(i, j));
    }
    out << '\n';
  }
}

void write_complete_data_csv(std::ostream& out, const WeightedCompleteData& wcd) {
  const auto& L = wcd.layout;
  out << "id,weight,provenance,phenotype";
  for (std::size_t j = 0; j < L.m; ++j) out << ',' << L.snp_names[j];
  for (std::size_t k = 0; k < L.indicator_count(); ++k) out << ',' << L.column_name(L.indicator_col(k));
  out << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < wcd.rows(); ++r) {
    out << wcd.individual[r] << ',' << wcd.weight[r] << ','
        << (wcd.provenance[r] == Provenance::Observed ? "observed" : "imputed") << ','
        << static_cast<int>(wcd.cell(r, L.pheno_col()));
    for (std::size_t j = 0; j < L.m; ++j) out << ',' << static_cast<int>(wcd.cell(r, j));
    for (std::size_t k = 0; k < L.indicator_count(); ++k) out << ',' << static_cast<int>(wcd.cell(r, L.indicator_col(k)));
    out << '\n';
  }
}

}  // namespace mirem
