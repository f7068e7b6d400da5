#pragma once

// Independent reference implementations used to check the library. They
// share no code with src/ beyond the public data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "fedrf/dataset.hpp"
#include "fedrf/forest.hpp"

namespace fedrf::oracle {

inline double gini(const std::vector<double>& counts) {
  double n = 0.0;
  for (double c : counts) n += c;
  if (n == 0.0) return 0.0;
  double s = 1.0;
  for (double c : counts) s -= (c / n) * (c / n);
  return s;
}

struct SplitCandidate {
  std::size_t feature;
  double threshold;
  double impurity;  // weighted child Gini
};

/// Every midpoint split of every feature with its weighted Gini.
inline std::vector<SplitCandidate> all_splits(const Dataset& d) {
  std::vector<SplitCandidate> out;
  const auto k = d.n_classes();
  for (std::size_t f = 0; f < d.n_features(); ++f) {
    std::set<double> values;
    for (std::size_t i = 0; i < d.n_samples(); ++i) values.insert(d.at(i, f));
    std::vector<double> v(values.begin(), values.end());
    for (std::size_t j = 0; j + 1 < v.size(); ++j) {
      const double t = v[j] + (v[j + 1] - v[j]) / 2.0;
      std::vector<double> l(k, 0.0), r(k, 0.0);
      for (std::size_t i = 0; i < d.n_samples(); ++i) (d.at(i, f) <= t ? l : r)[d.label(i)] += 1.0;
      double nl = 0.0, nr = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        nl += l[c];
        nr += r[c];
      }
      const double n = nl + nr;
      out.push_back({f, t, nl / n * gini(l) + nr / n * gini(r)});
    }
  }
  return out;
}

/// Leaf reached by walking the node array directly.
inline std::size_t walk(const forest::DecisionTree& tree, std::span<const double> row) {
  std::size_t i = 0;
  while (!tree.node(i).is_leaf()) {
    const auto& n = tree.node(i);
    i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return i;
}

inline ClassId argmax_lowest(std::span<const std::uint32_t> counts) {
  ClassId best = 0;
  for (ClassId c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return best;
}

inline ClassId tree_vote(const forest::DecisionTree& tree, std::span<const double> row) {
  return argmax_lowest(tree.class_counts(walk(tree, row)));
}

/// Exhaustive vote count over every tree.
inline ClassId forest_vote(const forest::RandomForest& f, std::span<const double> row) {
  std::vector<std::uint32_t> votes(f.n_classes(), 0);
  for (const auto& t : f.trees) ++votes[tree_vote(t, row)];
  return argmax_lowest(votes);
}

/// Largest k with k <= w * n, counted up from zero (1e-9 slack for weights
/// such as 0.7 whose product lands just under an integer).
inline std::size_t floor_count(double w, std::size_t n) {
  std::size_t k = 0;
  while (k < n && static_cast<double>(k + 1) <= w * static_cast<double>(n) + 1e-9) ++k;
  return k;
}

/// Per-silo tree counts expected from weighted aggregation: floor counts,
/// then one extra tree per silo per pass (heaviest first, positive weights
/// before zero weights) until the total reaches max n_i.
inline std::vector<std::size_t> expected_counts(const std::vector<double>& w, const std::vector<std::size_t>& n) {
  std::vector<std::size_t> k(w.size());
  std::size_t total = 0, target = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    k[i] = floor_count(w[i], n[i]);
    total += k[i];
    target = std::max(target, n[i]);
  }
  std::vector<std::size_t> order(w.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return w[a] > w[b]; });
  for (int tier = 0; tier < 2; ++tier) {
    bool moved = true;
    while (total < target && moved) {
      moved = false;
      for (auto i : order) {
        if (total == target) break;
        const bool positive = w[i] > 0.0;
        if (positive != (tier == 0) || k[i] == n[i]) continue;
        ++k[i];
        ++total;
        moved = true;
      }
    }
  }
  return k;
}

}  // namespace fedrf::oracle
