#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mirem/config.hpp"
#include "mirem/error.hpp"
#include "mirem/report.hpp"

using namespace mirem;

TEST_CASE("key = value parsing") {
  std::istringstream in("# comment\n tau = 3 \n\nlambda=0.5 # trailing\n");
  const KeyValues kv = parse_key_values(in);
  CHECK(kv.at("tau") == "3");
  CHECK(kv.at("lambda") == "0.5");
  std::istringstream dup("tau = 1\ntau = 2\n");
  CHECK_THROWS_AS(parse_key_values(dup), ConfigError);
  std::istringstream noeq("tau 1\n");
  CHECK_THROWS_AS(parse_key_values(noeq), ConfigError);
  CHECK_THROWS_AS(load_key_values("/nonexistent.cfg"), ConfigError);
}

TEST_CASE("unknown keys and bad values are rejected") {
  RunConfig cfg = default_run_config();
  CHECK_THROWS_AS(run_schema().apply(cfg, {{"taux", "3"}}), ConfigError);
  CHECK_THROWS_AS(run_schema().apply(cfg, {{"tau", "0"}}), ConfigError);
  CHECK_THROWS_AS(run_schema().apply(cfg, {{"lambda", "-1"}}), ConfigError);
  CHECK_THROWS_AS(run_schema().apply(cfg, {{"tune", "gcv"}}), ConfigError);
  SimulateConfig sc;
  CHECK_THROWS_AS(simulate_schema().apply(sc, {{"n", "0"}}), ConfigError);
}

TEST_CASE("written configs parse back to the same values") {
  RunConfig cfg = default_run_config();
  run_schema().apply(cfg, {{"input", "x.csv"}, {"tau", "7"}, {"lambda", "0.125"}, {"tune", "cv"},
                           {"lambda_grid", "0.01,0.1,1"}, {"select", "top:16"}, {"ntree", "250"}, {"seed", "99"}});
  std::stringstream ss;
  run_schema().write(ss, cfg);
  RunConfig back = default_run_config();
  run_schema().apply(back, parse_key_values(ss));
  std::stringstream again;
  run_schema().write(again, back);
  std::stringstream first;
  run_schema().write(first, cfg);
  CHECK(again.str() == first.str());
  CHECK(back.cycles.tau == 7);
  CHECK(back.cycles.em.lambda == 0.125);
  CHECK(back.cycles.tune);
  CHECK(back.cycles.tuning.grid == std::vector<double>{0.01, 0.1, 1});
  CHECK(back.cycles.select.str() == "top:16");
  CHECK(back.seed == 99);
}

TEST_CASE("model bundle round trip") {
  GenotypeMatrix g(6, {"a", "b"}, {0, 1, kMissing, 2, 1, 0, 2, kMissing, 0, 1, 1, 2});
  const Dataset d = make_dataset(g, PhenotypeVector({0, 1, 0, 1, 1, 0}));
  ModelSystem sys = make_system(d.layout, full_structure(d.layout));
  double v = 0.1;
  for (auto& eq : sys.equations)
    for (Eigen::Index k = 0; k < eq.coef.size(); ++k) eq.coef[k] = (v += 0.37);
  sys.equations[1].method = FitMethod::RidgeFallback;
  const auto P = static_cast<Eigen::Index>(sys.param_count());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Random(P, P);
  cov = cov * cov.transpose();
  const auto dir = std::filesystem::temp_directory_path() / "mirem_bundle_test";
  ensure_directory(dir.string());
  const std::string path = (dir / "model.json").string();
  write_model_json(path, sys, cov, 0.25, 0.01);
  const ModelBundle b = read_model_json(path);
  CHECK(b.lambda == 0.25);
  CHECK(b.alpha == 0.01);
  CHECK(b.model.flatten() == sys.flatten());
  CHECK(b.model.equations[1].method == FitMethod::RidgeFallback);
  CHECK(b.covariance == cov);
  CHECK(b.model.layout.x_part == sys.layout.x_part);

  std::ofstream(dir / "broken.json") << "{\"layout\": 3}";
  CHECK_THROWS_AS(read_model_json((dir / "broken.json").string()), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("plain-text tables align columns") {
  const std::string t = format_table({{"a", "bb"}, {"ccc", "d"}});
  std::istringstream in(t);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  CHECK(l1.find("bb") == l3.find('d'));
  CHECK(l2.find_first_not_of('-') == std::string::npos);
}
