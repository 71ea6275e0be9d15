#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mirem/config.hpp"
#include "mirem/error.hpp"
#include "mirem/report.hpp"
#include "mirem/study.hpp"

namespace fs = std::filesystem;
using namespace mirem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value config file");
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  cmd->add_option("--threads", c.threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
}

KeyValues read_config(const Common& c) { return c.config.empty() ? KeyValues{} : load_key_values(c.config); }

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Prefixes the stage to any library error while keeping its category.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(name + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(name + ": " + e.what());
  }
}

void write_manifest(const std::string& dir, const std::function<void(std::ostream&)>& body) {
  ensure_directory(dir);
  std::ofstream m(fs::path(dir) / "manifest.txt");
  if (!m) throw DataError("cannot write manifest in " + dir);
  body(m);
}

int cmd_simulate(const Common& c) {
  SimulateConfig cfg;
  simulate_schema().apply(cfg, read_config(c));
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out = *c.out;
  const SimulationSpec spec = stage("config", [&] { return cfg.spec(); });
  if (spec.n == 0) throw ConfigError("n must be positive");
  const SimulatedData sim = stage("simulate", [&] { return simulate(spec, cfg.seed); });
  stage("write", [&] {
    write_manifest(cfg.out, [&](std::ostream& m) { simulate_schema().write(m, cfg); });
    std::ofstream g(fs::path(cfg.out) / "genotypes.csv");
    write_genotypes(g, sim.data.g, &sim.data.y, cfg.na_token);
    std::ofstream t(fs::path(cfg.out) / "truth.csv");
    write_genotypes(t, sim.data.truth_g, &sim.data.truth_y, cfg.na_token);
    std::ofstream s(fs::path(cfg.out) / "snp_info.csv");
    s << "snp,maf,signal\n";
    for (std::size_t j = 0; j < sim.data.g.cols(); ++j) {
      const bool signal = std::find(spec.signal_snps.begin(), spec.signal_snps.end(), j) != spec.signal_snps.end();
      s << sim.data.g.snp_names()[j] << ',' << sim.mafs[j] << ',' << (signal ? 1 : 0) << '\n';
    }
    return 0;
  });
  std::cout << "wrote " << spec.n << " x " << sim.data.g.cols() << " genotypes with " << sim.data.g.missing_count()
            << " missing SNP values and " << sim.data.y.missing_count() << " missing phenotypes to " << cfg.out << "\n";
  return 0;
}

int cmd_run(const Common& c) {
  RunConfig cfg = default_run_config();
  run_schema().apply(cfg, read_config(c));
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  if (c.out) cfg.out = *c.out;
  if (cfg.input.empty()) throw ConfigError("config key 'input' is required");
  validate(cfg.cycles);
  set_threads(cfg.threads);
  const Dataset data = stage("input", [&] {
    auto [g, y] = load_genotypes(cfg.input, cfg.na_token, cfg.phenotype_column);
    if (y.count(0) == 0 || y.count(1) == 0) throw DataError("phenotype needs both classes observed");
    for (std::size_t j = 0; j < g.cols(); ++j) {
      if (g.column_missing_count(j) == g.rows()) throw DataError("column " + g.snp_names()[j] + " is entirely missing");
    }
    return make_dataset(std::move(g), std::move(y));
  });
  CycleConfig cc = cfg.cycles;
  cc.em.seed = derive_seed(cfg.seed, {0x11});
  cc.forest.seed = derive_seed(cfg.seed, {0x12});
  const SelectionReport rep = stage("pipeline", [&] { return run_cycles(data, cc); });
  stage("report", [&] {
    write_manifest(cfg.out, [&](std::ostream& m) { run_schema().write(m, cfg); });
    write_run_report(cfg.out, rep);
    return 0;
  });
  std::cout << "phenotype final set:";
  for (auto col : rep.final_structure[0]) std::cout << ' ' << rep.layout.column_name(col);
  std::cout << "\nreport written to " << cfg.out << "\n";
  return 0;
}

int cmd_mnar(const Common& c, const std::string& bundle, std::optional<double> alpha) {
  const fs::path path = fs::is_directory(bundle) ? fs::path(bundle) / "model.json" : fs::path(bundle);
  const ModelBundle b = stage("bundle", [&] { return read_model_json(path.string()); });
  if (b.covariance.size() == 0) throw DataError("bundle " + path.string() + " carries no covariance");
  const MechanismReport m =
      stage("inference", [&] { return mechanism_report(b.model, b.covariance, alpha.value_or(b.alpha)); });
  const std::string out = c.out.value_or(path.parent_path().string());
  stage("report", [&] {
    write_mechanism_files(out, m);
    return 0;
  });
  std::cout << format_mechanism_report(m);
  return 0;
}

int cmd_study(const Common& c) {
  const KeyValues kv = read_config(c);
  const auto which = kv.count("which") ? kv.at("which") : std::string("sim1");
  if (which != "sim1" && which != "sim2") throw ConfigError("which must be sim1 or sim2");
  StudyConfig cfg = default_study_config(which);
  study_schema().apply(cfg, kv);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  if (c.out) cfg.out = *c.out;
  validate(cfg.cycles);
  set_threads(cfg.threads);
  const StudyBundle b = run_full_study(cfg, true);
  for (const auto& r : b.replicates) {
    std::cout << "seed " << r.seed << ": phenotype final set";
    for (auto col : ReplicateResult::phenotype_set(r.report)) std::cout << ' ' << r.report.layout.column_name(col);
    std::cout << "\n";
  }
  std::cout << "study written to " << cfg.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ridge-EM multiple imputation with random-forest variable selection for SNP data"};
  app.require_subcommand(1);
  Common common;

  auto* sim = app.add_subcommand("simulate", "generate a simulated genotype/phenotype data set");
  add_common(sim, common);
  sim->footer("config keys:\n" + simulate_schema().help(SimulateConfig{}));

  auto* run = app.add_subcommand("run", "run the imputation and selection pipeline on a CSV");
  add_common(run, common);
  run->footer("config keys:\n" + run_schema().help(default_run_config()));

  auto* mnar = app.add_subcommand("mnar-test", "test missingness mechanisms of a finished run");
  add_common(mnar, common);
  std::string bundle;
  std::optional<double> alpha;
  mnar->add_option("bundle", bundle, "run output directory or its model.json")->required();
  mnar->add_option("--alpha", alpha, "significance level (default: the run's alpha)");

  auto* study = app.add_subcommand("study", "reproduce a simulation study");
  add_common(study, common);
  study->footer("config keys (defaults shown for which = sim1; sim2 tunes lambda):\n" +
                study_schema().help(default_study_config("sim1")));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*sim) return cmd_simulate(common);
    if (*run) return cmd_run(common);
    if (*mnar) return cmd_mnar(common, bundle, alpha);
    if (*study) return cmd_study(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
