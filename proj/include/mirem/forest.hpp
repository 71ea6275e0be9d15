#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mirem/data.hpp"

namespace mirem {

// Binary test `row[source] == level`. SNP sources give levels 1 and 2 (the dummy pair);
// 0/1 sources give level 1.
struct Feature {
  std::size_t source = 0;
  std::uint8_t level = 1;
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  int left = -1;     // taken when the test holds
  int right = -1;
  std::uint8_t prediction = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;    // root at 0
  std::vector<std::size_t> oob;   // expanded-data rows out of bag
};

struct ForestParams {
  int ntree = 500;
  int mtry = 0;  // 0: floor(sqrt(#features))
  int min_node = 5;
  std::uint64_t seed = 1;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<Feature> features;
  std::vector<std::size_t> sources;  // candidate Layout columns, ascending
  std::size_t response_col = 0;
  int classes = 2;
  int mtry = 1;
  std::uint64_t seed = 1;
  std::vector<double> mdg;  // per source: Gini decrease summed over splits / ntree
};

std::vector<Feature> make_features(const std::vector<std::size_t>& sources, std::size_t m);

// Trees on weighted bootstraps of the expanded rows (n_individuals draws, probability
// proportional to weight), count-weighted Gini splits.
ForestModel grow_forest(const WeightedCompleteData& wcd, std::size_t response_col,
                        const std::vector<std::size_t>& sources, const ForestParams& params);

// `override_source`/`override_value` substitute one source's code during traversal.
std::uint8_t predict_tree(const Tree& tree, const std::vector<Feature>& features, const std::uint8_t* row,
                          std::size_t override_source = SIZE_MAX, std::uint8_t override_value = 0);

// Weighted OOB mis-classification rate of the majority vote.
double oob_error(const ForestModel& forest, const WeightedCompleteData& wcd);

struct Vimp {
  std::size_t source = 0;
  double mda = 0.0;
  double mdg = 0.0;
};

// MDA: per tree, permute the source's code over that tree's OOB rows, re-predict, and take
// the increase in weighted loss divided by the OOB weight; averaged over trees.
std::vector<Vimp> variable_importance(const ForestModel& forest, const WeightedCompleteData& wcd);

// Single-tree MDA with an explicit permutation: OOB position a takes its value from
// OOB position perm[a].
double permutation_mda(const Tree& tree, const std::vector<Feature>& features, const WeightedCompleteData& wcd,
                       std::size_t response_col, std::size_t source, const std::vector<std::size_t>& perm);

struct SelectionPolicy {
  enum class Kind : std::uint8_t { Threshold, TopS } kind = Kind::Threshold;
  double threshold = 0.0;  // keep mda > threshold
  std::size_t s = 0;

  static SelectionPolicy parse(const std::string& text);  // "threshold:0" or "top:16"
  std::string str() const;
};

// Selected sources in ascending column order.
std::vector<std::size_t> select_variables(const std::vector<Vimp>& vimp, const SelectionPolicy& policy);

}  // namespace mirem
