#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedrf/dataset.hpp"

namespace fedrf::forest {

inline constexpr std::int32_t kLeaf = -1;

/// One node of a flat CART tree. Internal nodes route a row left iff
/// row[feature] <= threshold. Leaves have feature == kLeaf and zero children.
struct TreeNode {
  std::int32_t feature = kLeaf;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;

  bool is_leaf() const noexcept { return feature == kLeaf; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// A trained classification tree stored as flat arrays, root at index 0.
/// Children always sit at higher indices than their parent (preorder layout).
class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::uint32_t n_features, std::uint32_t n_classes)
      : n_features_(n_features), n_classes_(n_classes) {}

  /// Appends a node with its per-class sample counts; returns its index.
  std::uint32_t add_node(const TreeNode& node, std::span<const std::uint32_t> counts);
  void set_children(std::uint32_t node, std::int32_t feature, double threshold,
                    std::uint32_t left, std::uint32_t right);

  std::size_t size() const noexcept { return nodes_.size(); }
  const TreeNode& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::span<const std::uint32_t> class_counts(std::size_t i) const {
    return {counts_.data() + i * n_classes_, n_classes_};
  }
  std::uint32_t n_features() const noexcept { return n_features_; }
  std::uint32_t n_classes() const noexcept { return n_classes_; }

  /// Index of the leaf reached by `row`.
  std::size_t leaf_for(std::span<const double> row) const;

  /// Argmax of the reached leaf's class counts; ties go to the lowest id.
  ClassId predict(std::span<const double> row) const;

  /// Throws Error(CorruptIndex) unless the node arrays form a proper binary
  /// tree with forward child pointers and in-range features.
  void validate() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::uint32_t n_features_ = 0;
  std::uint32_t n_classes_ = 0;
  std::vector<TreeNode> nodes_;
  std::vector<std::uint32_t> counts_;
};

struct MaxFeatures {
  enum class Kind { Sqrt, Log2, All, Fixed };
  Kind kind = Kind::Sqrt;
  std::uint32_t k = 0;  // only for Fixed

  static MaxFeatures sqrt() { return {Kind::Sqrt, 0}; }
  static MaxFeatures log2() { return {Kind::Log2, 0}; }
  static MaxFeatures all() { return {Kind::All, 0}; }
  static MaxFeatures fixed(std::uint32_t k) { return {Kind::Fixed, k}; }

  /// Number of features tried per split for a dataset of n_features columns.
  std::uint32_t resolve(std::uint32_t n_features) const;

  /// "sqrt", "log2", "all" or a decimal count.
  std::string to_string() const;
  static MaxFeatures parse(const std::string& text);

  friend bool operator==(const MaxFeatures&, const MaxFeatures&) = default;
};

struct ForestParams {
  std::uint32_t n_estimators = 100;
  MaxFeatures max_features = MaxFeatures::sqrt();
  std::optional<std::uint32_t> max_depth;
  std::uint32_t min_samples_split = 2;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  ForestParams params;
  std::vector<std::string> label_names;
  std::vector<std::string> feature_names;

  std::size_t n_features() const noexcept { return feature_names.size(); }
  std::size_t n_classes() const noexcept { return label_names.size(); }

  /// Trees, feature names and label names agree; params are not compared.
  bool same_structure(const RandomForest& other) const;
  bool same_schema(const RandomForest& other) const;
  /// Throws Error(CorruptIndex) / Error(EmptyForest) on any invariant breach.
  void validate() const;
};

/// Binary classification report. Confusion is indexed [actual][predicted]
/// with index 1 meaning "positive label".
struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::array<std::array<std::uint64_t, 2>, 2> confusion{};
  std::uint64_t n_samples = 0;

  std::uint64_t tp() const noexcept { return confusion[1][1]; }
  std::uint64_t fp() const noexcept { return confusion[0][1]; }
  std::uint64_t fn() const noexcept { return confusion[1][0]; }
  std::uint64_t tn() const noexcept { return confusion[0][0]; }

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Trains params.n_estimators Gini CART trees. Tree i uses the RNG stream
/// derive_seed(params.seed, i), so the result does not depend on `threads`
/// (0 = hardware concurrency).
RandomForest fit_forest(const Dataset& data, const ForestParams& params, unsigned threads = 0);

/// Returns a copy of `forest` with n_additional new trees appended. New tree j
/// gets stream derive_seed(seed, |forest| + j).
RandomForest warm_start_extend(const RandomForest& forest, const Dataset& data,
                               std::uint32_t n_additional, std::uint64_t seed,
                               unsigned threads = 0);

/// Majority vote over per-tree predictions; ties go to the lowest class id.
ClassId predict(const RandomForest& forest, std::span<const double> row);

std::vector<ClassId> predict_all(const RandomForest& forest, const Dataset& data);

Metrics evaluate(const RandomForest& forest, const Dataset& data, ClassId positive_label);

/// Metrics from already-computed predictions (same rules as evaluate).
Metrics compute_metrics(std::span<const ClassId> actual, std::span<const ClassId> predicted,
                        ClassId positive_label);

/// Checks that `data` can be used with `forest`: same feature names in the
/// same order and labels inside the forest's table.
void check_schema(const RandomForest& forest, const Dataset& data);

}  // namespace fedrf::forest
