#include "mirem/study.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "mirem/error.hpp"
#include "mirem/glm.hpp"
#include "mirem/report.hpp"
#include "mirem/text.hpp"

namespace mirem {

namespace fs = std::filesystem;

namespace {

constexpr double kHugeSe = 100.0;

std::vector<CoefficientRow> rows_for(const Equation& eq, const Layout& L, const Eigen::MatrixXd& cov) {
  const auto names = eq.coefficient_names(L);
  std::vector<CoefficientRow> out;
  for (std::size_t t = 0; t < names.size(); ++t) {
    const auto k = static_cast<Eigen::Index>(t);
    CoefficientRow r;
    r.equation = "phenotype";
    r.name = names[t];
    r.estimate = eq.coef[k];
    r.se = cov(k, k) > 0 ? std::sqrt(cov(k, k)) : std::numeric_limits<double>::quiet_NaN();
    r.z = r.estimate / r.se;
    r.p_value = std::isfinite(r.z) ? chi_square_sf(r.z * r.z, 1.0) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(r);
  }
  return out;
}

GenotypeMatrix select_rows_cols(const GenotypeMatrix& g, const std::vector<std::size_t>& rows,
                                const std::vector<std::size_t>& cols) {
  std::vector<std::string> names;
  for (auto c : cols) names.push_back(g.snp_names()[c]);
  std::vector<std::uint8_t> v;
  v.reserve(rows.size() * cols.size());
  for (auto i : rows) {
    for (auto c : cols) v.push_back(g(i, c));
  }
  return GenotypeMatrix(rows.size(), std::move(names), std::move(v));
}

BaselineResult baseline(const GenotypeMatrix& g, const PhenotypeVector& y, std::vector<std::size_t> snps,
                        const ForestParams& fp) {
  BaselineResult res;
  res.snps = std::move(snps);
  res.n_used = g.rows();
  if (g.rows() == 0) {
    res.degenerate = true;
    res.diagnostic = "no individuals left";
    return res;
  }
  const Dataset d = make_dataset(g, y);
  const WeightedCompleteData wcd = expand_complete_data(d, ImputationSet{});
  Structure s = full_structure(d.layout);
  ModelSystem sys = make_system(d.layout, s);
  Equation& eq = sys.equations[0];
  const Eigen::MatrixXd X = build_design(eq, wcd);
  const Eigen::VectorXd yv = build_response(eq, wcd);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(X.rows());
  FitOptions o;
  o.max_iter = 25;
  FitResult fit;
  try {
    fit = fit_weighted_ridge_binary(X, yv, w, o);
    res.converged = fit.converged && !fit.separated;
    if (!res.converged) res.diagnostic = fit.separated ? "separation" : "no convergence";
  } catch (const NumericalError& e) {
    // Rank-deficient design: report the minimum-norm-like ridge limit instead.
    res.diagnostic = e.what();
    o.lambda = 1e-8;
    fit = fit_weighted_ridge_binary(X, yv, w, o);
  }
  eq.coef = fit.coefficients;
  // Standard errors from the unpenalized information; a tiny jitter keeps them finite.
  Eigen::MatrixXd I = binary_information(X, w, eq.coef, 0.0);
  const double jitter = 1e-12 * std::max(1.0, I.diagonal().maxCoeff());
  Eigen::LLT<Eigen::MatrixXd> llt(I);
  if (llt.info() != Eigen::Success) {
    I.diagonal().array() += jitter;
    llt.compute(I);
    if (res.diagnostic.empty()) res.diagnostic = "singular information";
    res.converged = false;
  }
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(I.rows(), I.cols()));
  res.coefficients = rows_for(eq, d.layout, cov);
  if (res.coefficients.size() <= 1) res.coefficients.clear();  // intercept-only: no slope table
  bool huge = false;
  for (const auto& r : res.coefficients) huge = huge || !(r.se < kHugeSe);
  if (huge && res.diagnostic.empty()) res.diagnostic = "standard errors exceed " + format_double(kHugeSe);
  res.degenerate = !res.converged || huge || X.rows() <= X.cols();
  if (d.layout.m > 0 && y.count(0) > 0 && y.count(1) > 0) {
    const ForestModel f = grow_forest(wcd, d.layout.pheno_col(), candidate_predictors(d.layout, 0), fp);
    res.vimp = variable_importance(f, wcd);
  }
  return res;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

BaselineResult run_baseline_complete(const GenotypeMatrix& g, const PhenotypeVector& y, const ForestParams& fp) {
  if (g.missing_count() > 0 || y.missing_count() > 0) throw DataError("complete-data baseline needs NA-free input");
  std::vector<std::size_t> all(g.cols());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  return baseline(g, y, all, fp);
}

BaselineResult run_baseline_completecase(const GenotypeMatrix& g, const PhenotypeVector& y,
                                         const std::vector<std::size_t>& columns, const ForestParams& fp) {
  for (auto c : columns) {
    if (c >= g.cols()) throw DataError("column index out of range");
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    bool ok = !y.is_missing(i);
    for (auto c : columns) ok = ok && !g.is_missing(i, c);
    if (ok) keep.push_back(i);
  }
  std::vector<std::uint8_t> yv;
  for (auto i : keep) yv.push_back(y[i]);
  return baseline(select_rows_cols(g, keep, columns), PhenotypeVector(std::move(yv)), columns, fp);
}

PhenotypeFit fit_phenotype_on_complete(const WeightedCompleteData& wcd, const std::vector<std::size_t>& snps,
                                       double lambda) {
  Equation eq;
  eq.kind = ResponseKind::Phenotype;
  eq.response_col = wcd.layout.pheno_col();
  eq.m = wcd.layout.m;
  eq.predictors = snps;
  std::sort(eq.predictors.begin(), eq.predictors.end());
  const Eigen::MatrixXd X = build_design(eq, wcd);
  const Eigen::VectorXd y = build_response(eq, wcd);
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(wcd.weight.data(), static_cast<Eigen::Index>(wcd.rows()));
  FitOptions o;
  o.lambda = lambda;
  PhenotypeFit out;
  FitResult r;
  out.method = "ridge";
  try {
    r = fit_weighted_ridge_binary(X, y, w, o);
    if (r.separated && lambda == 0.0) throw NumericalError("separation");
  } catch (const NumericalError&) {
    r = fit_firth_binary(X, y, w, o);
    out.method = "firth";
  }
  eq.coef = r.coefficients;
  out.converged = r.converged;
  out.coefficients = rows_for(eq, wcd.layout, r.covariance);
  return out;
}

ReplicateResult run_replicate(const StudyConfig& cfg, std::uint64_t seed) {
  if (cfg.which != "sim1" && cfg.which != "sim2") throw ConfigError("which must be sim1 or sim2");
  const bool desk = cfg.scale == "desk";
  const bool sim1 = cfg.which == "sim1";
  validate(cfg.cycles);
  ReplicateResult r;
  r.seed = seed;
  const SimulationSpec spec = preset_spec(sim1 ? Preset::Sim1 : Preset::Sim2, desk, seed);
  r.signal_snps = spec.signal_snps;
  auto t = std::chrono::steady_clock::now();
  r.sim = simulate(spec, seed);
  r.timings.emplace_back("simulate", seconds_since(t));
  const InjectedData& D = r.sim.data;

  ForestParams fp = cfg.cycles.forest;
  fp.seed = derive_seed(seed, {0xba});
  if (sim1) {
    t = std::chrono::steady_clock::now();
    r.complete = run_baseline_complete(D.truth_g, D.truth_y, fp);
    std::vector<std::size_t> all(D.g.cols()), window;
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    for (std::size_t j = preset_column(36, desk); j <= preset_column(50, desk); ++j) window.push_back(j);
    r.completecase_all = run_baseline_completecase(D.g, D.y, all, fp);
    r.completecase_window = run_baseline_completecase(D.g, D.y, window, fp);
    r.timings.emplace_back("baselines", seconds_since(t));
  }

  const Dataset data = make_dataset(D.g, D.y);
  CycleConfig cc = cfg.cycles;
  cc.em.seed = derive_seed(seed, {0xe3});
  cc.forest.seed = derive_seed(seed, {0xf3});
  if (sim1) {
    t = std::chrono::steady_clock::now();
    r.report = run_cycles(data, cc);
    r.timings.emplace_back("cycles", seconds_since(t));
    return r;
  }
  // Simulation 2: EBIC (Part 3) and cross-validation (Part 1) on the same data.
  CycleConfig ebic = cc;
  ebic.tune = true;
  ebic.tuning.method = TuneMethod::Ebic;
  t = std::chrono::steady_clock::now();
  r.report = run_cycles(data, ebic);
  r.timings.emplace_back("cycles_ebic", seconds_since(t));
  CycleConfig cv = cc;
  cv.tune = true;
  cv.tuning.method = TuneMethod::Cv;
  t = std::chrono::steady_clock::now();
  r.cv_report = run_cycles(data, cv);
  r.timings.emplace_back("cycles_cv", seconds_since(t));
  // Part 2: frequency comparison over several tau (cross-validation tuning).
  std::vector<int> taus = cfg.tau_list;
  if (taus.empty() && !desk) taus = {10, 30, 50};
  for (int tau : taus) {
    if (tau == cv.tau) {
      r.tau_frequencies.emplace_back(tau, r.cv_report->frequency[0]);
      continue;
    }
    CycleConfig ct = cv;
    ct.tau = tau;
    ct.freq_min = 0;
    t = std::chrono::steady_clock::now();
    const SelectionReport rt = run_cycles(data, ct);
    r.timings.emplace_back("cycles_cv_tau" + std::to_string(tau), seconds_since(t));
    r.tau_frequencies.emplace_back(tau, rt.frequency[0]);
  }
  return r;
}

namespace {

std::ofstream open_csv(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

void write_baseline(const fs::path& p, const BaselineResult& b, const GenotypeMatrix& g) {
  auto out = open_csv(p);
  out << "term,estimate,se,p_value,stars,mda,mdg,n_used,degenerate,diagnostic\n";
  for (const auto& r : b.coefficients) {
    // MDA belongs to the SNP, printed on its first dummy row.
    std::string mda = "", mdg = "";
    for (const auto& v : b.vimp) {
      const std::string snp = g.snp_names()[b.snps[v.source]];
      if (r.name == snp + "(1)") {
        mda = format_double(v.mda);
        mdg = format_double(v.mdg);
      }
    }
    out << r.name << ',' << format_double(r.estimate) << ',' << format_double(r.se) << ','
        << format_double(r.p_value) << ',' << significance_stars(r.p_value) << ',' << mda << ',' << mdg << ','
        << b.n_used << ',' << (b.degenerate ? 1 : 0) << ',' << b.diagnostic << '\n';
  }
}

void write_frequencies(const fs::path& p, const Layout& L, const std::vector<std::pair<int, std::vector<int>>>& f) {
  auto out = open_csv(p);
  out << "snp";
  for (const auto& [tau, v] : f) out << ",tau_" << tau;
  out << '\n';
  for (std::size_t j = 0; j < L.m; ++j) {
    out << L.column_name(j);
    for (const auto& [tau, v] : f) out << ',' << v[j];
    out << '\n';
  }
}

void write_pheno_table(const fs::path& p, const std::vector<CoefficientRow>& rows) {
  auto out = open_csv(p);
  out << "term,estimate,se,z,p_value,stars\n";
  for (const auto& r : rows) {
    out << r.name << ',' << format_double(r.estimate) << ',' << format_double(r.se) << ',' << format_double(r.z) << ','
        << format_double(r.p_value) << ',' << significance_stars(r.p_value) << '\n';
  }
}

std::vector<CoefficientRow> phenotype_rows(const SelectionReport& rep) {
  std::vector<CoefficientRow> out;
  for (const auto& r : coefficient_table(rep.final_model, rep.covariance)) {
    if (r.equation == "phenotype") out.push_back(r);
  }
  return out;
}

}  // namespace

void write_replicate(const std::string& dir, const StudyConfig& cfg, const ReplicateResult& r) {
  ensure_directory(dir);
  const fs::path d(dir);
  const InjectedData& D = r.sim.data;
  {
    auto out = open_csv(d / "genotypes.csv");
    write_genotypes(out, D.g, &D.y);
  }
  {
    auto out = open_csv(d / "truth.csv");
    write_genotypes(out, D.truth_g, &D.truth_y);
  }
  const MissingnessSummary ms = summarize_missingness(D.mask);
  {
    auto out = open_csv(d / "missing_proportions.csv");
    out << "column,maf,proportion\n";
    for (std::size_t k = 0; k < D.mask.p(); ++k) {
      const auto c = D.mask.column_order[k];
      out << D.g.snp_names()[c] << ',' << format_double(r.sim.mafs[c]) << ',' << format_double(ms.column_proportion[k])
          << '\n';
    }
    out << "phenotype,," << format_double(static_cast<double>(ms.phenotype_missing) / static_cast<double>(D.mask.n))
        << '\n';
  }
  {
    auto out = open_csv(d / "missing_histogram.csv");
    out << "missing_snps,individuals\n";
    for (const auto& [k, cnt] : ms.per_individual) out << k << ',' << cnt << '\n';
  }
  const bool sim1 = cfg.which == "sim1";
  if (sim1) {
    write_baseline(d / "baseline_complete.csv", r.complete, D.truth_g);
    write_baseline(d / "baseline_completecase_all.csv", r.completecase_all, D.g);
    write_baseline(d / "baseline_completecase_window.csv", r.completecase_window, D.g);
  }
  const Layout& L = r.report.layout;
  write_run_report((d / (sim1 ? "run" : "run_ebic")).string(), r.report);
  write_frequencies(d / "phenotype_frequencies.csv", L, {{r.report.tau, r.report.frequency[0]}});
  write_pheno_table(d / "final_association.csv", phenotype_rows(r.report));
  write_mechanism_files((d / "mechanism").string(), r.report.mechanism);
  if (sim1 && r.report.last_complete.rows() > 0) {
    std::vector<std::size_t> all(L.m);
    for (std::size_t j = 0; j < L.m; ++j) all[j] = j;
    const PhenotypeFit f = fit_phenotype_on_complete(r.report.last_complete, all, r.report.final_lambda);
    write_pheno_table(d / "complete_data_all_snps.csv", f.coefficients);
  }
  if (r.cv_report) {
    write_run_report((d / "run_cv").string(), *r.cv_report);
    write_frequencies(d / "phenotype_frequencies_cv.csv", L, {{r.cv_report->tau, r.cv_report->frequency[0]}});
  }
  if (!r.tau_frequencies.empty()) write_frequencies(d / "tau_frequencies.csv", L, r.tau_frequencies);
  {
    auto out = open_csv(d / "lambda_curves.csv");
    out << "run,stage,lambda,log10_lambda,value,se,chosen\n";
    const auto dump = [&](const std::string& run, const SelectionReport& rep) {
      for (const auto& [stage, t] : rep.tuning) {
        for (const auto& pt : t.curve) {
          out << run << ',' << stage << ',' << format_double(pt.lambda) << ','
              << (pt.lambda > 0 ? format_double(std::log10(pt.lambda)) : "NA") << ',' << format_double(pt.value) << ','
              << format_double(pt.se) << ',' << (pt.lambda == t.lambda_star ? 1 : 0) << '\n';
        }
      }
    };
    dump(sim1 ? "main" : "ebic", r.report);
    if (r.cv_report) dump("cv", *r.cv_report);
  }
  {
    auto out = open_csv(d / "timings.csv");
    out << "stage,seconds\n";
    for (const auto& [stage, s] : r.timings) out << stage << ',' << format_double(s) << '\n';
  }
}

StudyBundle run_full_study(const StudyConfig& cfg, bool write) {
  StudyBundle b;
  b.config = cfg;
  if (write) {
    ensure_directory(cfg.out);
    std::ofstream m(fs::path(cfg.out) / "manifest.txt");
    study_schema().write(m, cfg);
  }
  for (int k = 0; k < cfg.replicates; ++k) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(k);
    ReplicateResult r;
    try {
      r = run_replicate(cfg, seed);
    } catch (const std::exception& e) {
      const std::string msg = "study replicate seed " + std::to_string(seed) + ": " + e.what();
      if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
      if (dynamic_cast<const DataError*>(&e)) throw DataError(msg);
      throw NumericalError(msg);
    }
    if (write) write_replicate((fs::path(cfg.out) / ("seed_" + std::to_string(seed))).string(), cfg, r);
    b.replicates.push_back(std::move(r));
  }
  if (write) {
    std::ofstream out(fs::path(cfg.out) / "summary.csv");
    out << "seed,run,final_size,signals_in_final,signals_total,final_lambda\n";
    for (const auto& r : b.replicates) {
      const auto line = [&](const std::string& run, const SelectionReport& rep) {
        const auto set = ReplicateResult::phenotype_set(rep);
        std::size_t hit = 0;
        for (auto s : r.signal_snps) hit += std::count(set.begin(), set.end(), s);
        out << r.seed << ',' << run << ',' << set.size() << ',' << hit << ',' << r.signal_snps.size() << ','
            << format_double(rep.final_lambda) << '\n';
      };
      line(cfg.which == "sim1" ? "main" : "ebic", r.report);
      if (r.cv_report) line("cv", *r.cv_report);
    }
  }
  return b;
}

}  // namespace mirem
