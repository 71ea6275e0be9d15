#include "mirem/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mirem/error.hpp"
#include "mirem/text.hpp"

namespace mirem {

namespace fs = std::filesystem;
using nlohmann::json;

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir);
}

namespace {

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::ofstream out(fs::path(dir) / name);
  if (!out) throw DataError("cannot write " + (fs::path(dir) / name).string());
  return out;
}

// Quote a CSV field only when it needs it.
std::string csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

void csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t t = 0; t < fields.size(); ++t) out << (t ? "," : "") << csv(fields[t]);
  out << '\n';
}

std::string num(double x) { return std::isnan(x) ? "NA" : format_double(x); }

// Short fixed-width rendering for text tables.
std::string fixed(double x, int digits = 4) {
  if (std::isnan(x)) return "NA";
  std::ostringstream os;
  const double a = std::abs(x);
  if (a != 0.0 && (a < 1e-3 || a >= 1e6)) {
    os.setf(std::ios::scientific);
  } else {
    os.setf(std::ios::fixed);
  }
  os.precision(digits);
  os << x;
  return os.str();
}

std::string join_names(const Layout& L, const std::vector<std::size_t>& cols, const char* sep) {
  std::string s;
  for (auto c : cols) s += (s.empty() ? "" : sep) + L.column_name(c);
  return s;
}

std::string trace_stage(int cycle) { return cycle > 0 ? "cycle " + std::to_string(cycle) : "final"; }

}  // namespace

std::string format_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      line += rows[i][c];
      if (c + 1 < rows[i].size()) line += std::string(width[c] - rows[i][c].size() + 2, ' ');
    }
    os << line << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c + 1 < width.size() ? 2 : 0);
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

std::string format_coefficient_table(const std::vector<CoefficientRow>& rows) {
  std::vector<std::vector<std::string>> t{{"equation", "term", "estimate", "std.error", "z", "p-value", ""}};
  for (const auto& r : rows) {
    t.push_back({r.equation, r.name, fixed(r.estimate), fixed(r.se), fixed(r.z, 3), fixed(r.p_value, 3),
                 significance_stars(r.p_value)});
  }
  return format_table(t);
}

std::string format_mechanism_report(const MechanismReport& m) {
  std::ostringstream os;
  if (m.empty()) {
    os << "no missingness models fitted\n";
    return os.str();
  }
  os << "Missingness mechanism, Wald tests (alpha = " << format_double(m.alpha) << ")\n\n";
  std::vector<std::vector<std::string>> t{{"indicator", "related covariate", "df", "W", "Wald test p-value", ""}};
  for (const auto& e : m.entries) {
    bool any = false;
    for (const auto& term : e.terms) {
      if (!term.related) continue;
      t.push_back({e.indicator, term.name, std::to_string(term.wald.df), fixed(term.wald.statistic, 3),
                   fixed(term.wald.p_value, 5), significance_stars(term.wald.p_value)});
      any = true;
    }
    if (!any) t.push_back({e.indicator, "(none)", "0", "", "", ""});
  }
  os << format_table(t) << '\n';
  std::vector<std::vector<std::string>> s{
      {"indicator", "method", "joint df", "joint p-value", "related df", "related p-value", "verdict"}};
  for (const auto& e : m.entries) {
    s.push_back({e.indicator, e.method, std::to_string(e.joint_all.df), fixed(e.joint_all.p_value, 5),
                 std::to_string(e.joint_related.df), fixed(e.joint_related.p_value, 5),
                 std::string(e.non_ignorable ? "non-ignorable" : "ignorable") + (e.includes_own_phenotype ? " *" : "")});
  }
  os << format_table(s);
  for (const auto& e : m.entries) {
    if (e.includes_own_phenotype) {
      os << "\n* " << e.indicator << " includes the phenotype itself among the tested covariates.\n";
      break;
    }
  }
  return os.str();
}

void write_mechanism_files(const std::string& dir, const MechanismReport& m) {
  ensure_directory(dir);
  {
    auto out = open_out(dir, "mechanism.csv");
    csv_row(out, {"indicator", "covariate", "related", "df", "statistic", "p_value", "stars"});
    for (const auto& e : m.entries) {
      for (const auto& t : e.terms) {
        csv_row(out, {e.indicator, t.name, t.related ? "1" : "0", std::to_string(t.wald.df), num(t.wald.statistic),
                      num(t.wald.p_value), significance_stars(t.wald.p_value)});
      }
    }
  }
  {
    auto out = open_out(dir, "mechanism_summary.csv");
    csv_row(out, {"indicator", "method", "related", "joint_df", "joint_statistic", "joint_p_value", "related_df",
                  "related_statistic", "related_p_value", "verdict", "includes_own_phenotype", "alpha"});
    for (const auto& e : m.entries) {
      std::string related;
      for (const auto& r : e.related) related += (related.empty() ? "" : " ") + r;
      csv_row(out, {e.indicator, e.method, related, std::to_string(e.joint_all.df), num(e.joint_all.statistic),
                    num(e.joint_all.p_value), std::to_string(e.joint_related.df), num(e.joint_related.statistic),
                    num(e.joint_related.p_value), e.non_ignorable ? "non-ignorable" : "ignorable",
                    e.includes_own_phenotype ? "1" : "0", num(m.alpha)});
    }
  }
  auto out = open_out(dir, "mechanism.txt");
  out << format_mechanism_report(m);
}

void write_model_json(const std::string& path, const ModelSystem& sys, const Eigen::MatrixXd& cov, double lambda,
                      double alpha) {
  const Layout& L = sys.layout;
  json j;
  j["layout"] = {{"m", L.m},
                 {"x_part", L.x_part},
                 {"z_part", L.z_part},
                 {"pheno_indicator", L.pheno_indicator},
                 {"snp_names", L.snp_names}};
  j["lambda"] = lambda;
  j["alpha"] = alpha;
  j["equations"] = json::array();
  for (std::size_t e = 0; e < sys.equations.size(); ++e) {
    const Equation& eq = sys.equations[e];
    j["equations"].push_back({{"name", sys.equation_name(e)},
                              {"kind", static_cast<int>(eq.kind)},
                              {"response_col", eq.response_col},
                              {"predictors", eq.predictors},
                              {"coef", std::vector<double>(eq.coef.data(), eq.coef.data() + eq.coef.size())},
                              {"method", static_cast<int>(eq.method)},
                              {"converged", eq.converged}});
  }
  json c = json::array();
  for (Eigen::Index r = 0; r < cov.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(cov.cols()));
    for (Eigen::Index k = 0; k < cov.cols(); ++k) row[static_cast<std::size_t>(k)] = cov(r, k);
    c.push_back(row);
  }
  j["covariance"] = c;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(1) << '\n';
}

ModelBundle read_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model bundle " + path);
  ModelBundle b;
  try {
    const json j = json::parse(in);
    Layout& L = b.model.layout;
    const auto& jl = j.at("layout");
    L.m = jl.at("m").get<std::size_t>();
    L.x_part = jl.at("x_part").get<std::vector<std::size_t>>();
    L.z_part = jl.at("z_part").get<std::vector<std::size_t>>();
    L.pheno_indicator = jl.at("pheno_indicator").get<bool>();
    L.snp_names = jl.at("snp_names").get<std::vector<std::string>>();
    if (L.snp_names.size() != L.m) throw DataError("snp_names does not match m");
    b.lambda = j.value("lambda", 0.0);
    b.alpha = j.value("alpha", 0.05);
    for (const auto& je : j.at("equations")) {
      Equation eq;
      eq.kind = static_cast<ResponseKind>(je.at("kind").get<int>());
      eq.response_col = je.at("response_col").get<std::size_t>();
      eq.m = L.m;
      eq.predictors = je.at("predictors").get<std::vector<std::size_t>>();
      const auto coef = je.at("coef").get<std::vector<double>>();
      eq.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
      eq.method = static_cast<FitMethod>(je.at("method").get<int>());
      eq.converged = je.value("converged", true);
      if (static_cast<std::size_t>(eq.coef.size()) != eq.param_count()) {
        throw DataError("equation " + je.value("name", std::string("?")) + ": coefficient count mismatch");
      }
      b.model.equations.push_back(std::move(eq));
    }
    if (b.model.equations.size() != equation_count(L)) throw DataError("equation count does not match layout");
    const auto& jc = j.at("covariance");
    const auto P = static_cast<Eigen::Index>(b.model.param_count());
    if (!jc.empty()) {
      if (static_cast<Eigen::Index>(jc.size()) != P) throw DataError("covariance does not match the model system");
      b.covariance.resize(P, P);
      for (Eigen::Index r = 0; r < P; ++r) {
        const auto row = jc[static_cast<std::size_t>(r)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != P) throw DataError("covariance row has the wrong length");
        for (Eigen::Index k = 0; k < P; ++k) b.covariance(r, k) = row[static_cast<std::size_t>(k)];
      }
    }
  } catch (const json::exception& e) {
    throw DataError("malformed model bundle " + path + ": " + e.what());
  }
  return b;
}

void write_run_report(const std::string& dir, const SelectionReport& rep) {
  ensure_directory(dir);
  const Layout& L = rep.layout;
  const ModelSystem& sys = rep.final_model;
  {
    auto out = open_out(dir, "frequencies.csv");
    csv_row(out, {"equation", "predictor", "frequency", "tau", "in_final"});
    for (std::size_t e = 0; e < rep.frequency.size(); ++e) {
      const auto& fin = rep.final_structure[e];
      for (auto c : candidate_predictors(L, e)) {
        const bool in = std::find(fin.begin(), fin.end(), c) != fin.end();
        csv_row(out, {sys.equation_name(e), L.column_name(c), std::to_string(rep.frequency[e][c]),
                      std::to_string(rep.tau), in ? "1" : "0"});
      }
    }
  }
  {
    auto out = open_out(dir, "cycles.csv");
    csv_row(out, {"cycle", "lambda", "expanded_rows", "equation", "screened", "oob_error", "n_selected", "selected"});
    for (const auto& c : rep.cycles) {
      for (std::size_t e = 0; e < c.equations.size(); ++e) {
        const auto& ec = c.equations[e];
        csv_row(out, {std::to_string(c.cycle), num(c.lambda), std::to_string(c.expanded_rows), sys.equation_name(e),
                      ec.screened ? "1" : "0", ec.vimp.empty() ? "NA" : num(ec.oob_error),
                      std::to_string(ec.selected.size()), join_names(L, ec.selected, " ")});
      }
    }
  }
  {
    auto out = open_out(dir, "vimp.csv");
    csv_row(out, {"cycle", "equation", "predictor", "mda", "mdg"});
    for (const auto& c : rep.cycles) {
      for (std::size_t e = 0; e < c.equations.size(); ++e) {
        for (const auto& v : c.equations[e].vimp) {
          csv_row(out, {std::to_string(c.cycle), sys.equation_name(e), L.column_name(v.source), num(v.mda), num(v.mdg)});
        }
      }
    }
  }
  const auto coefs = coefficient_table(sys, rep.covariance);
  {
    auto out = open_out(dir, "coefficients.csv");
    csv_row(out, {"equation", "term", "estimate", "se", "z", "p_value", "stars"});
    for (const auto& r : coefs) {
      csv_row(out, {r.equation, r.name, num(r.estimate), num(r.se), num(r.z), num(r.p_value),
                    significance_stars(r.p_value)});
    }
  }
  {
    auto out = open_out(dir, "snp_tests.csv");
    csv_row(out, {"term", "df", "statistic", "p_value", "stars"});
    for (const auto& t : term_tests(sys, 0, rep.covariance)) {
      csv_row(out, {t.name, std::to_string(t.wald.df), num(t.wald.statistic), num(t.wald.p_value),
                    significance_stars(t.wald.p_value)});
    }
  }
  write_mechanism_files(dir, rep.mechanism);
  {
    auto out = open_out(dir, "em_trace.csv");
    csv_row(out, {"stage", "iteration", "q", "loglik", "change", "lambda"});
    const auto dump = [&](const std::string& stage, const std::vector<EmIteration>& tr) {
      for (const auto& it : tr) {
        csv_row(out, {stage, std::to_string(it.iteration), num(it.q), num(it.loglik), num(it.change), num(it.lambda)});
      }
    };
    for (const auto& c : rep.cycles) dump(trace_stage(c.cycle), c.trace);
    dump(trace_stage(0), rep.final_trace);
  }
  {
    auto out = open_out(dir, "lambda_tuning.csv");
    csv_row(out, {"stage", "method", "lambda", "log10_lambda", "value", "se", "df", "q", "folds_used", "folds_skipped",
                  "usable", "chosen"});
    for (const auto& [stage, t] : rep.tuning) {
      for (const auto& pt : t.curve) {
        csv_row(out, {stage, t.method == TuneMethod::Ebic ? "ebic" : "cv", num(pt.lambda),
                      pt.lambda > 0 ? num(std::log10(pt.lambda)) : "NA", num(pt.value), num(pt.se), num(pt.df),
                      num(pt.q), std::to_string(pt.folds_used), std::to_string(pt.folds_skipped), pt.usable ? "1" : "0",
                      pt.lambda == t.lambda_star ? "1" : "0"});
      }
    }
  }
  write_model_json((fs::path(dir) / "model.json").string(), sys, rep.covariance, rep.final_lambda, rep.mechanism.alpha);
  auto out = open_out(dir, "summary.txt");
  out << "cycles: " << rep.tau << ", final set: frequency >= " << rep.freq_min << "\n";
  out << "final lambda: " << format_double(rep.final_lambda) << ", expanded rows: " << rep.final_expanded_rows
      << ", converged: " << (rep.final_converged ? "yes" : "no") << "\n";
  if (rep.covariance_regularized) out << "covariance: observed information was indefinite and was regularized\n";
  out << "\nFinal predictors (frequency/" << rep.tau << ")\n\n";
  std::vector<std::vector<std::string>> t{{"equation", "method", "predictors"}};
  for (std::size_t e = 0; e < sys.equations.size(); ++e) {
    std::string preds;
    for (auto [c, f] : rep.full_frequency(e)) preds += (preds.empty() ? "" : " ") + L.column_name(c) + "(" + std::to_string(f) + ")";
    t.push_back({sys.equation_name(e), to_string(sys.equations[e].method), preds.empty() ? "-" : preds});
  }
  out << format_table(t) << "\nPhenotype model\n\n";
  std::vector<CoefficientRow> pheno;
  for (const auto& r : coefs) {
    if (r.equation == sys.equation_name(0)) pheno.push_back(r);
  }
  out << format_coefficient_table(pheno) << "\nSignif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1\n\n";
  out << format_mechanism_report(rep.mechanism);
  if (!rep.notes.empty()) {
    out << "\nNotes\n";
    for (const auto& n : rep.notes) out << "  " << n << '\n';
  }
}

}  // namespace mirem
