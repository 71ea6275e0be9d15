#include "mirem/config.hpp"

#include <fstream>
#include <sstream>

#include "mirem/error.hpp"
#include "mirem/text.hpp"

namespace mirem {

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_key_values(in);
}

template <class T>
std::vector<std::string> Schema<T>::names() const {
  std::vector<std::string> out;
  for (const auto& k : keys) out.push_back(k.name);
  return out;
}

template <class T>
void Schema<T>::apply(T& target, const KeyValues& kv) const {
  for (const auto& [name, value] : kv) {
    const Key* key = nullptr;
    for (const auto& k : keys) {
      if (k.name == name) key = &k;
    }
    if (!key) {
      std::string valid;
      for (const auto& k : keys) valid += (valid.empty() ? "" : ", ") + k.name;
      throw ConfigError("unknown config key '" + name + "'; valid keys: " + valid);
    }
    key->set(target, value);
  }
}

template <class T>
void Schema<T>::write(std::ostream& out, const T& value) const {
  for (const auto& k : keys) out << k.name << " = " << k.get(value) << "\n";
}

template <class T>
std::string Schema<T>::help(const T& defaults) const {
  std::ostringstream os;
  for (const auto& k : keys) os << "  " << k.name << " (default " << k.get(defaults) << "): " << k.help << "\n";
  return os.str();
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::logic_error&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::logic_error&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

int to_int_min(const std::string& key, const std::string& v, long long lo) {
  const long long x = to_int(key, v);
  if (x < lo || x > 1000000000LL) throw ConfigError(key + " must be >= " + std::to_string(lo));
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::vector<double> to_grid(const std::string& key, const std::string& v) {
  // "log:lo:hi:points" (powers of ten) or a comma-separated list.
  if (v.rfind("log:", 0) == 0) {
    const auto parts = split(v.substr(4), ':');
    if (parts.size() != 3) throw ConfigError(key + ": expected log:lo:hi:points");
    return log_grid(to_double(key, parts[0]), to_double(key, parts[1]), to_int_min(key, parts[2], 1));
  }
  std::vector<double> g;
  for (const auto& s : split(v, ',')) {
    if (s.empty()) continue;
    const double x = to_double(key, s);
    if (!(x >= 0.0)) throw ConfigError(key + ": lambda values must be >= 0");
    g.push_back(x);
  }
  return g;
}

std::string grid_str(const std::vector<double>& g) {
  std::string s;
  for (double x : g) s += (s.empty() ? "" : ",") + format_double(x);
  return s;
}

std::string tune_str(const CycleConfig& c) {
  if (!c.tune) return "none";
  return c.tuning.method == TuneMethod::Ebic ? "ebic" : "cv";
}

void set_tune(CycleConfig& c, const std::string& v) {
  if (v == "none") {
    c.tune = false;
  } else if (v == "ebic" || v == "cv") {
    c.tune = true;
    c.tuning.method = v == "ebic" ? TuneMethod::Ebic : TuneMethod::Cv;
  } else {
    throw ConfigError("tune must be none, ebic or cv");
  }
}

// Keys shared by run and study configs; `get` selects the CycleConfig inside T.
template <class T>
void add_cycle_keys(Schema<T>& s, CycleConfig& (*get)(T&), const CycleConfig& (*cget)(const T&)) {
  using K = typename Schema<T>::Key;
  const auto add = [&](std::string name, std::string help, std::function<void(CycleConfig&, const std::string&)> set,
                       std::function<std::string(const CycleConfig&)> show) {
    s.keys.push_back(K{std::move(name), std::move(help),
                       [get, set](T& t, const std::string& v) { set(get(t), v); },
                       [cget, show](const T& t) { return show(cget(t)); }});
  };
  add("tau", "number of selection cycles", [](CycleConfig& c, const std::string& v) { c.tau = to_int_min("tau", v, 1); },
      [](const CycleConfig& c) { return std::to_string(c.tau); });
  add("kappa", "Ridge-EM iterations per cycle",
      [](CycleConfig& c, const std::string& v) { c.kappa = to_int_min("kappa", v, 1); },
      [](const CycleConfig& c) { return std::to_string(c.kappa); });
  add("lambda", "ridge parameter when tune = none",
      [](CycleConfig& c, const std::string& v) {
        c.em.lambda = to_double("lambda", v);
        if (!(c.em.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
      },
      [](const CycleConfig& c) { return format_double(c.em.lambda); });
  add("tune", "lambda tuning: none, ebic or cv", set_tune, tune_str);
  add("lambda_grid", "tuning grid: log:lo:hi:points (powers of ten) or a comma list",
      [](CycleConfig& c, const std::string& v) { c.tuning.grid = to_grid("lambda_grid", v); },
      [](const CycleConfig& c) { return grid_str(c.tuning.grid); });
  add("cv_folds", "cross-validation folds",
      [](CycleConfig& c, const std::string& v) { c.tuning.folds = to_int_min("cv_folds", v, 2); },
      [](const CycleConfig& c) { return std::to_string(c.tuning.folds); });
  add("cv_rule", "cross-validation choice: min or 1se",
      [](CycleConfig& c, const std::string& v) {
        if (v != "min" && v != "1se") throw ConfigError("cv_rule must be min or 1se");
        c.tuning.rule = v == "min" ? CvRule::Min : CvRule::OneSe;
      },
      [](const CycleConfig& c) { return std::string(c.tuning.rule == CvRule::Min ? "min" : "1se"); });
  add("xi", "EBIC exponent (power form) or multiplier",
      [](CycleConfig& c, const std::string& v) {
        c.tuning.xi = to_double("xi", v);
        if (!(c.tuning.xi >= 0.0)) throw ConfigError("xi must be >= 0");
      },
      [](const CycleConfig& c) { return format_double(c.tuning.xi); });
  add("ebic_form", "EBIC penalty form: power (log(N)^xi) or multiplier (xi*log(N))",
      [](CycleConfig& c, const std::string& v) {
        if (v != "power" && v != "multiplier") throw ConfigError("ebic_form must be power or multiplier");
        c.tuning.form = v == "power" ? EbicForm::Power : EbicForm::Multiplier;
      },
      [](const CycleConfig& c) { return std::string(c.tuning.form == EbicForm::Power ? "power" : "multiplier"); });
  add("enum_cap", "enumerate completions while 3^nu <= enum_cap, else Gibbs",
      [](CycleConfig& c, const std::string& v) { c.em.enum_cap = static_cast<std::size_t>(to_int_min("enum_cap", v, 1)); },
      [](const CycleConfig& c) { return std::to_string(c.em.enum_cap); });
  add("gibbs_draws", "Gibbs draws kept per individual",
      [](CycleConfig& c, const std::string& v) { c.em.gibbs_draws = to_int_min("gibbs_draws", v, 1); },
      [](const CycleConfig& c) { return std::to_string(c.em.gibbs_draws); });
  add("gibbs_burnin", "Gibbs burn-in sweeps",
      [](CycleConfig& c, const std::string& v) { c.em.gibbs_burnin = to_int_min("gibbs_burnin", v, 0); },
      [](const CycleConfig& c) { return std::to_string(c.em.gibbs_burnin); });
  add("eps", "imputation weights below eps are dropped, in [0, 1)",
      [](CycleConfig& c, const std::string& v) {
        c.em.eps = to_double("eps", v);
        if (!(c.em.eps >= 0.0 && c.em.eps < 1.0)) throw ConfigError("eps must lie in [0, 1)");
      },
      [](const CycleConfig& c) { return format_double(c.em.eps); });
  add("firth_min", "binary equations with fewer observed minority cases use Firth; 0 disables",
      [](CycleConfig& c, const std::string& v) { c.em.firth_min = to_int_min("firth_min", v, 0); },
      [](const CycleConfig& c) { return std::to_string(c.em.firth_min); });
  add("firth_on_failure", "refit with Firth when a lambda=0 binary fit separates",
      [](CycleConfig& c, const std::string& v) { c.em.firth_on_failure = to_bool("firth_on_failure", v); },
      [](const CycleConfig& c) { return bool_str(c.em.firth_on_failure); });
  add("em_tol", "max-norm parameter change that ends Ridge-EM",
      [](CycleConfig& c, const std::string& v) {
        c.em.tol = c.final_tol = to_double("em_tol", v);
        if (!(c.em.tol > 0.0)) throw ConfigError("em_tol must be > 0");
      },
      [](const CycleConfig& c) { return format_double(c.final_tol); });
  add("final_max_iter", "Ridge-EM iteration cap for the final fit",
      [](CycleConfig& c, const std::string& v) { c.final_max_iter = to_int_min("final_max_iter", v, 1); },
      [](const CycleConfig& c) { return std::to_string(c.final_max_iter); });
  add("select", "phenotype selection policy: threshold:<t> or top:<s>",
      [](CycleConfig& c, const std::string& v) { c.select = SelectionPolicy::parse(v); },
      [](const CycleConfig& c) { return c.select.str(); });
  add("aux_select", "selection policy for genotype and missingness equations",
      [](CycleConfig& c, const std::string& v) { c.aux_select = SelectionPolicy::parse(v); },
      [](const CycleConfig& c) { return c.aux_select.str(); });
  add("freq_min", "final set keeps predictors selected in at least freq_min cycles; 0 means tau",
      [](CycleConfig& c, const std::string& v) { c.freq_min = to_int_min("freq_min", v, 0); },
      [](const CycleConfig& c) { return std::to_string(c.freq_min); });
  add("top_frequencies", "> 0: keep predictors in the s* highest frequency levels instead of freq_min",
      [](CycleConfig& c, const std::string& v) {
        c.top_frequencies = static_cast<std::size_t>(to_int_min("top_frequencies", v, 0));
      },
      [](const CycleConfig& c) { return std::to_string(c.top_frequencies); });
  add("ntree", "trees per phenotype forest",
      [](CycleConfig& c, const std::string& v) { c.forest.ntree = to_int_min("ntree", v, 1); },
      [](const CycleConfig& c) { return std::to_string(c.forest.ntree); });
  add("ntree_aux", "trees per genotype/missingness forest; 0 means ntree",
      [](CycleConfig& c, const std::string& v) { c.ntree_aux = to_int_min("ntree_aux", v, 0); },
      [](const CycleConfig& c) { return std::to_string(c.ntree_aux); });
  add("mtry", "features tried per split; 0 means floor(sqrt(features))",
      [](CycleConfig& c, const std::string& v) { c.forest.mtry = static_cast<std::size_t>(to_int_min("mtry", v, 0)); },
      [](const CycleConfig& c) { return std::to_string(c.forest.mtry); });
  add("min_node", "nodes with at most this many bootstrap draws are leaves",
      [](CycleConfig& c, const std::string& v) { c.forest.min_node = to_int_min("min_node", v, 1); },
      [](const CycleConfig& c) { return std::to_string(c.forest.min_node); });
  add("screen_min", "missingness equations with fewer minority cases stay intercept-only",
      [](CycleConfig& c, const std::string& v) { c.screen_min = to_int_min("screen_min", v, 0); },
      [](const CycleConfig& c) { return std::to_string(c.screen_min); });
  add("select_before_em", "first cycle selects on the initial imputation",
      [](CycleConfig& c, const std::string& v) { c.select_before_em = to_bool("select_before_em", v); },
      [](const CycleConfig& c) { return bool_str(c.select_before_em); });
  add("alpha", "significance level of the mechanism verdicts",
      [](CycleConfig& c, const std::string& v) {
        c.alpha = to_double("alpha", v);
        if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
      },
      [](const CycleConfig& c) { return format_double(c.alpha); });
}

CycleConfig default_cycle_config() {
  CycleConfig c;
  c.tuning.grid = log_grid(-6.0, 0.0, 13);
  c.forest.ntree = 500;
  return c;
}

}  // namespace

void validate(const CycleConfig& c) {
  if (c.tau < 1) throw ConfigError("tau must be >= 1");
  if (c.kappa < 1) throw ConfigError("kappa must be >= 1");
  if (c.freq_min > c.tau) throw ConfigError("freq_min exceeds tau");
  if (c.tune && c.tuning.grid.empty()) throw ConfigError("lambda_grid is empty");
  if (c.tune && c.tuning.method == TuneMethod::Cv && c.tuning.folds < 2) throw ConfigError("cv_folds must be >= 2");
  if (c.em.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (c.em.enum_cap < 1) throw ConfigError("enum_cap must be >= 1");
  if (c.forest.ntree < 1) throw ConfigError("ntree must be >= 1");
}

RunConfig default_run_config() {
  RunConfig r;
  r.cycles = default_cycle_config();
  return r;
}

StudyConfig default_study_config(const std::string& which) {
  StudyConfig s;
  s.which = which;
  s.cycles = default_cycle_config();
  s.cycles.em.enum_cap = 9;
  if (which == "sim2") {
    s.cycles.tune = true;
    s.cycles.tuning.method = TuneMethod::Ebic;
  }
  return s;
}

SimulationSpec SimulateConfig::spec() const {
  if (preset != "sim1" && preset != "sim2") throw ConfigError("preset must be sim1 or sim2");
  if (scale != "full" && scale != "desk") throw ConfigError("scale must be full or desk");
  SimulationSpec s = preset_spec(preset == "sim1" ? Preset::Sim1 : Preset::Sim2, scale == "desk", seed);
  if (n > 0) s.n = n;
  return s;
}

const Schema<RunConfig>& run_schema() {
  static const Schema<RunConfig> s = [] {
    Schema<RunConfig> s;
    using K = Schema<RunConfig>::Key;
    s.keys.push_back(K{"input", "genotype CSV with a phenotype column",
                       [](RunConfig& r, const std::string& v) { r.input = v; }, [](const RunConfig& r) { return r.input; }});
    s.keys.push_back(K{"phenotype_column", "name of the phenotype column",
                       [](RunConfig& r, const std::string& v) { r.phenotype_column = v; },
                       [](const RunConfig& r) { return r.phenotype_column; }});
    s.keys.push_back(K{"na_token", "token marking missing cells",
                       [](RunConfig& r, const std::string& v) { r.na_token = v; },
                       [](const RunConfig& r) { return r.na_token; }});
    s.keys.push_back(K{"out", "output directory", [](RunConfig& r, const std::string& v) { r.out = v; },
                       [](const RunConfig& r) { return r.out; }});
    s.keys.push_back(K{"seed", "master seed",
                       [](RunConfig& r, const std::string& v) {
                         r.seed = static_cast<std::uint64_t>(to_int_min("seed", v, 0));
                       },
                       [](const RunConfig& r) { return std::to_string(r.seed); }});
    s.keys.push_back(K{"threads", "worker threads",
                       [](RunConfig& r, const std::string& v) { r.threads = to_int_min("threads", v, 1); },
                       [](const RunConfig& r) { return std::to_string(r.threads); }});
    add_cycle_keys<RunConfig>(
        s, [](RunConfig& r) -> CycleConfig& { return r.cycles; },
        [](const RunConfig& r) -> const CycleConfig& { return r.cycles; });
    return s;
  }();
  return s;
}

const Schema<SimulateConfig>& simulate_schema() {
  static const Schema<SimulateConfig> s = [] {
    Schema<SimulateConfig> s;
    using K = Schema<SimulateConfig>::Key;
    using C = SimulateConfig;
    s.keys.push_back(K{"preset", "sim1 or sim2", [](C& c, const std::string& v) { c.preset = v; },
                       [](const C& c) { return c.preset; }});
    s.keys.push_back(K{"scale", "full (n=1000, m=100) or desk (n=400, m=40)",
                       [](C& c, const std::string& v) { c.scale = v; }, [](const C& c) { return c.scale; }});
    s.keys.push_back(K{"n", "individuals; defaults to the preset size",
                       [](C& c, const std::string& v) {
                         const long long x = to_int("n", v);
                         if (x <= 0) throw ConfigError("n must be positive");
                         c.n = static_cast<std::size_t>(x);
                       },
                       [](const C& c) { return std::to_string(c.n ? c.n : (c.scale == "desk" ? 400 : 1000)); }});
    s.keys.push_back(K{"seed", "master seed",
                       [](C& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_int_min("seed", v, 0)); },
                       [](const C& c) { return std::to_string(c.seed); }});
    s.keys.push_back(K{"na_token", "token written for missing cells",
                       [](C& c, const std::string& v) { c.na_token = v; }, [](const C& c) { return c.na_token; }});
    s.keys.push_back(K{"out", "output directory", [](C& c, const std::string& v) { c.out = v; },
                       [](const C& c) { return c.out; }});
    return s;
  }();
  return s;
}

const Schema<StudyConfig>& study_schema() {
  static const Schema<StudyConfig> s = [] {
    Schema<StudyConfig> s;
    using K = Schema<StudyConfig>::Key;
    using C = StudyConfig;
    s.keys.push_back(K{"which", "sim1 or sim2",
                       [](C& c, const std::string& v) {
                         if (v != "sim1" && v != "sim2") throw ConfigError("which must be sim1 or sim2");
                         c.which = v;
                       },
                       [](const C& c) { return c.which; }});
    s.keys.push_back(K{"scale", "full or desk",
                       [](C& c, const std::string& v) {
                         if (v != "full" && v != "desk") throw ConfigError("scale must be full or desk");
                         c.scale = v;
                       },
                       [](const C& c) { return c.scale; }});
    s.keys.push_back(K{"seed", "first replicate seed",
                       [](C& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_int_min("seed", v, 0)); },
                       [](const C& c) { return std::to_string(c.seed); }});
    s.keys.push_back(K{"replicates", "number of seeds",
                       [](C& c, const std::string& v) { c.replicates = to_int_min("replicates", v, 1); },
                       [](const C& c) { return std::to_string(c.replicates); }});
    s.keys.push_back(K{"tau_list", "sim2 frequency comparison over several tau; empty means tau only",
                       [](C& c, const std::string& v) {
                         c.tau_list.clear();
                         for (const auto& t : split(v, ',')) {
                           if (!t.empty()) c.tau_list.push_back(to_int_min("tau_list", t, 1));
                         }
                       },
                       [](const C& c) {
                         std::string out;
                         for (int t : c.tau_list) out += (out.empty() ? "" : ",") + std::to_string(t);
                         return out;
                       }});
    s.keys.push_back(K{"threads", "worker threads",
                       [](C& c, const std::string& v) { c.threads = to_int_min("threads", v, 1); },
                       [](const C& c) { return std::to_string(c.threads); }});
    s.keys.push_back(K{"out", "output directory", [](C& c, const std::string& v) { c.out = v; },
                       [](const C& c) { return c.out; }});
    add_cycle_keys<StudyConfig>(
        s, [](StudyConfig& r) -> CycleConfig& { return r.cycles; },
        [](const StudyConfig& r) -> const CycleConfig& { return r.cycles; });
    return s;
  }();
  return s;
}

template struct Schema<RunConfig>;
template struct Schema<SimulateConfig>;
template struct Schema<StudyConfig>;

}  // namespace mirem
