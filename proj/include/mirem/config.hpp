#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mirem/cycles.hpp"
#include "mirem/simgen.hpp"

namespace mirem {

// Flat "key = value" files; '#' starts a comment. Duplicate keys are an error.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);

// A config type T described by its keys. apply() rejects unknown keys with the valid list;
// write() emits every key with its current value, so a manifest re-parses to the same T.
template <class T>
struct Schema {
  struct Key {
    std::string name;
    std::string help;
    std::function<void(T&, const std::string&)> set;
    std::function<std::string(const T&)> get;
  };
  std::vector<Key> keys;

  void apply(T& target, const KeyValues& kv) const;
  void write(std::ostream& out, const T& value) const;
  std::string help(const T& defaults) const;
  std::vector<std::string> names() const;
};

struct RunConfig {
  std::string input;
  std::string phenotype_column = "phenotype";
  std::string na_token = "NA";
  std::string out = "mirem_out";
  int threads = 1;
  std::uint64_t seed = 1;
  CycleConfig cycles;
};

struct SimulateConfig {
  std::string preset = "sim1";  // sim1 | sim2
  std::string scale = "full";   // full | desk
  std::size_t n = 0;            // 0: preset size
  std::uint64_t seed = 1;
  std::string na_token = "NA";
  std::string out = "sim_out";

  SimulationSpec spec() const;
};

struct StudyConfig {
  std::string which = "sim1";   // sim1 | sim2
  std::string scale = "desk";   // full | desk
  std::uint64_t seed = 1;
  int replicates = 1;           // seeds seed, seed+1, ...
  std::vector<int> tau_list;    // sim2 frequency comparison, empty = {tau}
  int threads = 1;
  std::string out = "study_out";
  CycleConfig cycles;
};

// Defaults as documented: run uses lambda=0, no tuning, threshold:0 selection.
RunConfig default_run_config();
StudyConfig default_study_config(const std::string& which);

const Schema<RunConfig>& run_schema();
const Schema<SimulateConfig>& simulate_schema();
const Schema<StudyConfig>& study_schema();

// Range checks shared by every entry point; throw ConfigError.
void validate(const CycleConfig& c);

}  // namespace mirem
