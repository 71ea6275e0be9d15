#include "mirem/forest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <numeric>

#include "mirem/error.hpp"
#include "mirem/text.hpp"
#include "mirem/rng.hpp"

namespace mirem {

std::vector<Feature> make_features(const std::vector<std::size_t>& sources, std::size_t m) {
  std::vector<Feature> f;
  for (auto s : sources) {
    f.push_back({s, 1});
    if (s < m) f.push_back({s, 2});
  }
  return f;
}

namespace {

struct Grower {
  const WeightedCompleteData& wcd;
  const std::vector<Feature>& features;
  std::size_t response_col;
  int classes;
  int mtry;
  int min_node;
  Rng& rng;
  std::vector<double>& gain;  // per feature
  Tree& tree;
  std::vector<int> feat_idx;

  static double gini_sum(const double* c, int k, double total) {
    double s = 0.0;
    for (int t = 0; t < k; ++t) s += c[t] * c[t];
    return total - s / total;  // total * gini
  }

  int leaf(const double* counts) {
    TreeNode n;
    int best = 0;
    for (int t = 1; t < classes; ++t) {
      if (counts[t] > counts[best]) best = t;
    }
    n.prediction = static_cast<std::uint8_t>(best);
    tree.nodes.push_back(n);
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  // rows: distinct in-bag rows with their bootstrap counts.
  int build(std::vector<std::pair<std::size_t, int>>& rows) {
    double counts[3] = {0, 0, 0};
    double total = 0;
    for (auto& [r, c] : rows) {
      counts[wcd.cell(r, response_col)] += c;
      total += c;
    }
    int nonzero = 0;
    for (int t = 0; t < classes; ++t) nonzero += counts[t] > 0;
    if (total <= min_node || nonzero < 2) return leaf(counts);

    const double parent = gini_sum(counts, classes, total);
    int best_f = -1;
    double best_gain = 1e-12;
    const int nf = static_cast<int>(feat_idx.size());
    const int k = std::min(mtry, nf);
    for (int t = 0; t < k; ++t) {
      const int j = t + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(nf - t)));
      std::swap(feat_idx[t], feat_idx[j]);
      const Feature& f = features[feat_idx[t]];
      double lc[3] = {0, 0, 0};
      double lt = 0;
      for (auto& [r, c] : rows) {
        if (wcd.cell(r, f.source) == f.level) {
          lc[wcd.cell(r, response_col)] += c;
          lt += c;
        }
      }
      if (lt == 0 || lt == total) continue;
      double rc[3];
      for (int q = 0; q < 3; ++q) rc[q] = counts[q] - lc[q];
      const double g = parent - gini_sum(lc, classes, lt) - gini_sum(rc, classes, total - lt);
      if (g > best_gain) {
        best_gain = g;
        best_f = feat_idx[t];
      }
    }
    if (best_f < 0) return leaf(counts);
    gain[best_f] += best_gain;
    const Feature& f = features[best_f];
    std::vector<std::pair<std::size_t, int>> left, right;
    for (auto& rc : rows) (wcd.cell(rc.first, f.source) == f.level ? left : right).push_back(rc);
    rows.clear();
    rows.shrink_to_fit();
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({best_f, -1, -1, 0});
    const int l = build(left);
    const int r = build(right);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

template <class F>
void parallel_for(std::size_t n, F&& body) {
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (long t = 0; t < static_cast<long>(n); ++t) {
    try {
      body(static_cast<std::size_t>(t));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

ForestModel grow_forest(const WeightedCompleteData& wcd, std::size_t response_col,
                        const std::vector<std::size_t>& sources, const ForestParams& params) {
  if (params.ntree < 1) throw ConfigError("ntree must be >= 1");
  if (params.min_node < 1) throw ConfigError("min_node must be >= 1");
  if (response_col >= wcd.layout.width()) throw DataError("response column out of range");
  ForestModel f;
  f.response_col = response_col;
  f.sources = sources;
  std::sort(f.sources.begin(), f.sources.end());
  f.classes = response_col < wcd.layout.m ? 3 : 2;
  f.features = make_features(f.sources, wcd.layout.m);
  f.seed = params.seed;
  const int nf = static_cast<int>(f.features.size());
  f.mtry = params.mtry > 0 ? params.mtry : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(nf)))));

  bool seen[3] = {false, false, false};
  std::vector<double> cum(wcd.rows());
  double acc = 0.0;
  for (std::size_t r = 0; r < wcd.rows(); ++r) {
    const auto v = wcd.cell(r, response_col);
    if (v >= f.classes) throw DataError("forest response outside its class range");
    if (wcd.weight[r] > 0) seen[v] = true;
    acc += wcd.weight[r];
    cum[r] = acc;
  }
  if (seen[0] + seen[1] + seen[2] < 2) throw DataError("constant response " + wcd.layout.column_name(response_col));

  const std::size_t draws = wcd.n_individuals;
  f.trees.resize(static_cast<std::size_t>(params.ntree));
  std::vector<std::vector<double>> gains(f.trees.size(), std::vector<double>(static_cast<std::size_t>(nf), 0.0));
  parallel_for(f.trees.size(), [&](std::size_t t) {
    Rng rng(derive_seed(params.seed, {0xf0, t}));
    std::vector<int> count(wcd.rows(), 0);
    std::vector<char> drawn(wcd.n_individuals, 0);
    for (std::size_t d = 0; d < draws; ++d) {
      const double u = uniform01(rng) * acc;
      auto it = std::upper_bound(cum.begin(), cum.end(), u);
      if (it == cum.end()) --it;
      const auto r = static_cast<std::size_t>(it - cum.begin());
      ++count[r];
      drawn[wcd.individual[r]] = 1;
    }
    // Out-of-bag is decided per individual: a sibling completion of a drawn individual
    // shares nearly every cell with the in-bag row and would leak.
    std::vector<std::pair<std::size_t, int>> rows;
    Tree& tree = f.trees[t];
    for (std::size_t r = 0; r < wcd.rows(); ++r) {
      if (count[r] > 0) rows.emplace_back(r, count[r]);
      else if (wcd.weight[r] > 0 && !drawn[wcd.individual[r]]) tree.oob.push_back(r);
    }
    Grower g{wcd, f.features, response_col, f.classes, f.mtry, params.min_node, rng, gains[t], tree, {}};
    g.feat_idx.resize(static_cast<std::size_t>(nf));
    std::iota(g.feat_idx.begin(), g.feat_idx.end(), 0);
    g.build(rows);
  });
  f.mdg.assign(f.sources.size(), 0.0);
  for (const auto& gt : gains) {
    for (int j = 0; j < nf; ++j) {
      const auto pos = std::lower_bound(f.sources.begin(), f.sources.end(), f.features[j].source) - f.sources.begin();
      f.mdg[static_cast<std::size_t>(pos)] += gt[static_cast<std::size_t>(j)];
    }
  }
  for (auto& v : f.mdg) v /= params.ntree;
  return f;
}

std::uint8_t predict_tree(const Tree& tree, const std::vector<Feature>& features, const std::uint8_t* row,
                          std::size_t override_source, std::uint8_t override_value) {
  int n = 0;
  while (tree.nodes[n].feature >= 0) {
    const Feature& f = features[tree.nodes[n].feature];
    const std::uint8_t v = f.source == override_source ? override_value : row[f.source];
    n = v == f.level ? tree.nodes[n].left : tree.nodes[n].right;
  }
  return tree.nodes[n].prediction;
}

double oob_error(const ForestModel& forest, const WeightedCompleteData& wcd) {
  std::vector<std::array<int, 3>> votes(wcd.rows(), {0, 0, 0});
  for (const auto& tree : forest.trees) {
    for (auto r : tree.oob) ++votes[r][predict_tree(tree, forest.features, wcd.row(r))];
  }
  double wrong = 0.0, total = 0.0;
  for (std::size_t r = 0; r < wcd.rows(); ++r) {
    const auto& v = votes[r];
    if (v[0] + v[1] + v[2] == 0) continue;
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (v[k] > v[best]) best = k;
    }
    total += wcd.weight[r];
    if (best != wcd.cell(r, forest.response_col)) wrong += wcd.weight[r];
  }
  return total > 0 ? wrong / total : 0.0;
}

std::vector<Vimp> variable_importance(const ForestModel& forest, const WeightedCompleteData& wcd) {
  const std::size_t S = forest.sources.size();
  std::vector<std::vector<double>> per_tree(forest.trees.size(), std::vector<double>(S, 0.0));
  parallel_for(forest.trees.size(), [&](std::size_t t) {
    const Tree& tree = forest.trees[t];
    const auto& oob = tree.oob;
    if (oob.empty()) return;
    Rng rng(derive_seed(forest.seed, {0xda, t}));
    // Rows whose path tests each source; only those can change under permutation.
    std::vector<std::vector<std::size_t>> affected(S);
    std::vector<char> err0(oob.size());
    double W = 0.0;
    std::vector<std::size_t> path_sources;
    for (std::size_t a = 0; a < oob.size(); ++a) {
      const std::uint8_t* row = wcd.row(oob[a]);
      W += wcd.weight[oob[a]];
      path_sources.clear();
      int n = 0;
      while (tree.nodes[n].feature >= 0) {
        const Feature& f = forest.features[tree.nodes[n].feature];
        path_sources.push_back(f.source);
        n = row[f.source] == f.level ? tree.nodes[n].left : tree.nodes[n].right;
      }
      err0[a] = tree.nodes[n].prediction != row[forest.response_col];
      std::sort(path_sources.begin(), path_sources.end());
      path_sources.erase(std::unique(path_sources.begin(), path_sources.end()), path_sources.end());
      for (auto s : path_sources) {
        const auto pos = std::lower_bound(forest.sources.begin(), forest.sources.end(), s) - forest.sources.begin();
        affected[static_cast<std::size_t>(pos)].push_back(a);
      }
    }
    if (W <= 0.0) return;
    // Partial Fisher-Yates: the affected positions draw donors without replacement from
    // all OOB positions, which is the marginal law of a full permutation on them.
    std::vector<std::size_t> idx(oob.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::size_t> swaps;
    for (std::size_t s = 0; s < S; ++s) {
      const auto& aff = affected[s];
      if (aff.empty()) continue;
      const std::size_t src = forest.sources[s];
      double delta = 0.0;
      swaps.clear();
      for (std::size_t t2 = 0; t2 < aff.size(); ++t2) {
        const std::size_t j = t2 + uniform_index(rng, oob.size() - t2);
        std::swap(idx[t2], idx[j]);
        swaps.push_back(j);
        const std::size_t a = aff[t2];
        const std::uint8_t* row = wcd.row(oob[a]);
        const std::uint8_t donor = wcd.cell(oob[idx[t2]], src);
        const bool e = predict_tree(tree, forest.features, row, src, donor) != row[forest.response_col];
        delta += wcd.weight[oob[a]] * (static_cast<double>(e) - static_cast<double>(err0[a]));
      }
      for (std::size_t t2 = swaps.size(); t2-- > 0;) std::swap(idx[t2], idx[swaps[t2]]);
      per_tree[t][s] = delta / W;
    }
  });
  std::vector<Vimp> out(S);
  for (std::size_t s = 0; s < S; ++s) {
    out[s].source = forest.sources[s];
    out[s].mdg = forest.mdg[s];
    double sum = 0.0;
    for (const auto& v : per_tree) sum += v[s];
    out[s].mda = sum / static_cast<double>(forest.trees.size());
  }
  return out;
}

double permutation_mda(const Tree& tree, const std::vector<Feature>& features, const WeightedCompleteData& wcd,
                       std::size_t response_col, std::size_t source, const std::vector<std::size_t>& perm) {
  const auto& oob = tree.oob;
  if (perm.size() != oob.size()) throw DataError("permutation length differs from OOB size");
  double L0 = 0.0, L1 = 0.0, W = 0.0;
  for (std::size_t a = 0; a < oob.size(); ++a) {
    const std::uint8_t* row = wcd.row(oob[a]);
    const double w = wcd.weight[oob[a]];
    W += w;
    L0 += w * (predict_tree(tree, features, row) != row[response_col]);
    const std::uint8_t donor = wcd.cell(oob[perm[a]], source);
    L1 += w * (predict_tree(tree, features, row, source, donor) != row[response_col]);
  }
  return W > 0 ? (L1 - L0) / W : 0.0;
}

SelectionPolicy SelectionPolicy::parse(const std::string& text) {
  SelectionPolicy p;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (kind == "threshold") {
      p.kind = Kind::Threshold;
      p.threshold = arg.empty() ? 0.0 : std::stod(arg);
      if (!std::isfinite(p.threshold)) throw ConfigError("threshold must be finite");
      return p;
    }
    if (kind == "top") {
      p.kind = Kind::TopS;
      const long v = std::stol(arg);
      if (v < 0) throw ConfigError("top:s needs s >= 0");
      p.s = static_cast<std::size_t>(v);
      return p;
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError("selection policy must be 'threshold:<t>' or 'top:<s>', got '" + text + "'");
}

std::string SelectionPolicy::str() const {
  return kind == Kind::Threshold ? "threshold:" + format_double(threshold) : "top:" + std::to_string(s);
}

std::vector<std::size_t> select_variables(const std::vector<Vimp>& vimp, const SelectionPolicy& policy) {
  std::vector<Vimp> v = vimp;
  std::sort(v.begin(), v.end(), [](const Vimp& a, const Vimp& b) {
    if (a.mda != b.mda) return a.mda > b.mda;
    if (a.mdg != b.mdg) return a.mdg > b.mdg;
    return a.source < b.source;
  });
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < v.size(); ++t) {
    if (policy.kind == SelectionPolicy::Kind::TopS ? t < policy.s : v[t].mda > policy.threshold) out.push_back(v[t].source);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mirem
