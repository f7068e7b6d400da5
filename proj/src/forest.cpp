#include "fedrf/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "fedrf/error.hpp"
#include "fedrf/rng.hpp"

namespace fedrf::forest {

// ---------------------------------------------------------------------------
// DecisionTree

std::uint32_t DecisionTree::add_node(const TreeNode& node, std::span<const std::uint32_t> counts) {
  if (counts.size() != n_classes_) {
    throw Error(ErrorCode::InvalidArgument, "class_counts length differs from n_classes");
  }
  nodes_.push_back(node);
  counts_.insert(counts_.end(), counts.begin(), counts.end());
  return static_cast<std::uint32_t>(nodes_.size() - 1);
}

void DecisionTree::set_children(std::uint32_t node, std::int32_t feature, double threshold,
                                std::uint32_t left, std::uint32_t right) {
  auto& n = nodes_.at(node);
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
}

std::size_t DecisionTree::leaf_for(std::span<const double> row) const {
  std::size_t i = 0;
  for (;;) {
    const TreeNode& n = nodes_[i];
    if (n.is_leaf()) return i;
    i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
}

namespace {

ClassId argmax_lowest(std::span<const std::uint32_t> counts) {
  ClassId best = 0;
  for (ClassId c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return best;
}

}  // namespace

ClassId DecisionTree::predict(std::span<const double> row) const {
  return argmax_lowest(class_counts(leaf_for(row)));
}

void DecisionTree::validate() const {
  auto corrupt = [](const std::string& what) { throw Error(ErrorCode::CorruptIndex, what); };
  if (nodes_.empty()) corrupt("tree has no nodes");
  if (n_classes_ == 0) corrupt("tree has zero classes");
  if (counts_.size() != nodes_.size() * n_classes_) corrupt("class count table size mismatch");
  const auto size = nodes_.size();
  std::vector<std::uint8_t> indegree(size, 0);
  for (std::size_t i = 0; i < size; ++i) {
    const TreeNode& n = nodes_[i];
    const auto where = "node " + std::to_string(i);
    if (!std::isfinite(n.threshold)) corrupt(where + ": non-finite threshold");
    if (n.is_leaf()) {
      if (n.left != 0 || n.right != 0) corrupt(where + ": leaf with children");
      auto c = class_counts(i);
      if (std::accumulate(c.begin(), c.end(), std::uint64_t{0}) == 0) {
        corrupt(where + ": leaf with zero samples");
      }
      continue;
    }
    if (n.feature < 0 || static_cast<std::uint32_t>(n.feature) >= n_features_) {
      corrupt(where + ": feature index out of range");
    }
    for (std::uint32_t child : {n.left, n.right}) {
      if (child <= i || child >= size) corrupt(where + ": child index out of range");
      if (++indegree[child] > 1) corrupt(where + ": node has two parents");
    }
  }
  for (std::size_t i = 1; i < size; ++i) {
    if (indegree[i] != 1) corrupt("node " + std::to_string(i) + " unreachable");
  }
}

// ---------------------------------------------------------------------------
// MaxFeatures

std::uint32_t MaxFeatures::resolve(std::uint32_t n_features) const {
  const double p = n_features;
  std::uint32_t m = 0;
  switch (kind) {
    case Kind::Sqrt:
      m = static_cast<std::uint32_t>(std::floor(std::sqrt(p)));
      break;
    case Kind::Log2:
      m = static_cast<std::uint32_t>(std::floor(std::log2(p)));
      break;
    case Kind::All:
      m = n_features;
      break;
    case Kind::Fixed:
      if (k == 0 || k > n_features) {
        throw Error(ErrorCode::InvalidArgument, "max_features " + std::to_string(k) +
                                                    " outside [1, " + std::to_string(n_features) + "]");
      }
      m = k;
      break;
  }
  return std::clamp<std::uint32_t>(m, 1, std::max<std::uint32_t>(n_features, 1));
}

std::string MaxFeatures::to_string() const {
  switch (kind) {
    case Kind::Sqrt: return "sqrt";
    case Kind::Log2: return "log2";
    case Kind::All: return "all";
    case Kind::Fixed: return std::to_string(k);
  }
  return "sqrt";
}

MaxFeatures MaxFeatures::parse(const std::string& text) {
  if (text == "sqrt") return sqrt();
  if (text == "log2") return log2();
  if (text == "all") return all();
  std::uint32_t k = 0;
  for (char c : text) {
    if (c < '0' || c > '9' || k > 100'000'000) {
      throw Error(ErrorCode::InvalidArgument, "bad max_features '" + text + "'");
    }
    k = k * 10 + static_cast<std::uint32_t>(c - '0');
  }
  if (text.empty() || k == 0) throw Error(ErrorCode::InvalidArgument, "bad max_features '" + text + "'");
  return fixed(k);
}

// ---------------------------------------------------------------------------
// RandomForest

bool RandomForest::same_schema(const RandomForest& other) const {
  return feature_names == other.feature_names && label_names == other.label_names;
}

bool RandomForest::same_structure(const RandomForest& other) const {
  return same_schema(other) && trees == other.trees;
}

void RandomForest::validate() const {
  if (trees.empty()) throw Error(ErrorCode::EmptyForest, "forest has no trees");
  for (const auto& t : trees) {
    if (t.n_features() != feature_names.size() || t.n_classes() != label_names.size()) {
      throw Error(ErrorCode::CorruptIndex, "tree shape disagrees with forest tables");
    }
    t.validate();
  }
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Split {
  std::uint32_t feature = 0;
  double threshold = 0.0;
  double score = -1.0;  // sum_c l_c^2 / n_l + sum_c r_c^2 / n_r, maximised
};

/// Column-major copy of the training matrix shared by all tree builders.
struct Columns {
  std::size_t n_rows = 0;
  std::vector<double> values;

  explicit Columns(const Dataset& data) : n_rows(data.n_samples()), values(data.features().size()) {
    const auto p = data.n_features();
    for (std::size_t r = 0; r < n_rows; ++r) {
      for (std::size_t f = 0; f < p; ++f) values[f * n_rows + r] = data.at(r, f);
    }
  }
  double at(std::size_t row, std::size_t feature) const { return values[feature * n_rows + row]; }
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const Columns& cols, const ForestParams& params,
              std::uint64_t stream_seed)
      : data_(data),
        cols_(cols),
        params_(params),
        rng_(stream_seed),
        n_classes_(static_cast<std::uint32_t>(data.n_classes())),
        n_features_(static_cast<std::uint32_t>(data.n_features())),
        mtry_(params.max_features.resolve(n_features_)),
        tree_(n_features_, n_classes_),
        feature_order_(n_features_) {}

  DecisionTree build() {
    const auto n = data_.n_samples();
    samples_.resize(n);
    if (params_.bootstrap) {
      for (auto& s : samples_) s = static_cast<std::uint32_t>(rng_.below(n));
    } else {
      std::iota(samples_.begin(), samples_.end(), 0);
    }
    scratch_.resize(n);
    grow(0, samples_.size(), 0);
    return std::move(tree_);
  }

 private:
  std::uint32_t grow(std::size_t begin, std::size_t end, std::uint32_t depth) {
    std::vector<std::uint32_t> counts(n_classes_, 0);
    for (std::size_t i = begin; i < end; ++i) ++counts[data_.label(samples_[i])];
    const auto id = tree_.add_node(TreeNode{}, counts);

    const auto n = end - begin;
    const auto nonzero = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
    if (nonzero <= 1 || n < params_.min_samples_split ||
        (params_.max_depth && depth >= *params_.max_depth)) {
      return id;
    }
    auto split = best_split(begin, end, counts);
    if (!split) return id;

    auto mid = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                              samples_.begin() + static_cast<std::ptrdiff_t>(end),
                              [&](std::uint32_t s) { return cols_.at(s, split->feature) <= split->threshold; });
    const auto split_at = static_cast<std::size_t>(mid - samples_.begin());
    const auto left = grow(begin, split_at, depth + 1);
    const auto right = grow(split_at, end, depth + 1);
    tree_.set_children(id, static_cast<std::int32_t>(split->feature), split->threshold, left, right);
    return id;
  }

  // Features are drawn without replacement in random order; the search stops
  // once mtry non-constant features have been scored, or all were drawn.
  std::optional<Split> best_split(std::size_t begin, std::size_t end,
                                  const std::vector<std::uint32_t>& totals) {
    std::iota(feature_order_.begin(), feature_order_.end(), 0);
    const auto n = end - begin;
    std::uint64_t total_sq = 0;
    for (auto c : totals) total_sq += std::uint64_t{c} * c;

    std::optional<Split> best;
    std::uint32_t scored = 0;
    std::vector<std::uint32_t> left(n_classes_);
    std::vector<std::uint32_t> right(n_classes_);
    for (std::uint32_t i = 0; i < n_features_ && scored < mtry_; ++i) {
      const auto j = i + static_cast<std::uint32_t>(rng_.below(n_features_ - i));
      std::swap(feature_order_[i], feature_order_[j]);
      const auto f = feature_order_[i];

      auto* buf = scratch_.data();
      for (std::size_t k = 0; k < n; ++k) {
        const auto s = samples_[begin + k];
        buf[k] = {cols_.at(s, f), data_.label(s)};
      }
      std::sort(buf, buf + n, [](const auto& a, const auto& b) { return a.first < b.first; });
      if (!(buf[0].first < buf[n - 1].first)) continue;  // constant at this node
      ++scored;

      std::fill(left.begin(), left.end(), 0);
      right = totals;
      std::uint64_t left_sq = 0;
      std::uint64_t right_sq = total_sq;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const auto c = buf[k].second;
        left_sq += 2 * std::uint64_t{left[c]} + 1;
        ++left[c];
        right_sq -= 2 * std::uint64_t{right[c]} - 1;
        --right[c];
        if (!(buf[k].first < buf[k + 1].first)) continue;
        const auto n_left = static_cast<double>(k + 1);
        const auto n_right = static_cast<double>(n - k - 1);
        const double score = static_cast<double>(left_sq) / n_left + static_cast<double>(right_sq) / n_right;
        if (!best || score > best->score) {
          double threshold = buf[k].first + (buf[k + 1].first - buf[k].first) / 2.0;
          if (!(threshold < buf[k + 1].first)) threshold = buf[k].first;
          best = Split{f, threshold, score};
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  const Columns& cols_;
  const ForestParams& params_;
  Rng rng_;
  std::uint32_t n_classes_;
  std::uint32_t n_features_;
  std::uint32_t mtry_;
  DecisionTree tree_;
  std::vector<std::uint32_t> samples_;
  std::vector<std::pair<double, ClassId>> scratch_;
  std::vector<std::uint32_t> feature_order_;
};

void check_trainable(const Dataset& data, const ForestParams& params) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "training set has no rows");
  if (data.n_features() == 0) throw Error(ErrorCode::EmptyDataset, "training set has no feature columns");
  if (data.distinct_classes() < 2) {
    throw Error(ErrorCode::SingleClassDataset, "training set holds a single class");
  }
  if (params.n_estimators == 0) throw Error(ErrorCode::InvalidArgument, "n_estimators must be >= 1");
  if (params.min_samples_split == 0) throw Error(ErrorCode::InvalidArgument, "min_samples_split must be >= 1");
  if (params.max_depth && *params.max_depth == 0) throw Error(ErrorCode::InvalidArgument, "max_depth must be >= 1");
  params.max_features.resolve(static_cast<std::uint32_t>(data.n_features()));
}

/// Trains trees for streams [first, first + count) into out[0..count).
void train_trees(const Dataset& data, const ForestParams& params, std::uint64_t seed,
                 std::size_t first, std::vector<DecisionTree>& out, unsigned threads) {
  const Columns cols(data);
  const auto count = out.size();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[i] = TreeBuilder(data, cols, params, derive_seed(seed, first + i)).build();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

RandomForest fit_forest(const Dataset& data, const ForestParams& params, unsigned threads) {
  check_trainable(data, params);
  RandomForest forest;
  forest.params = params;
  forest.label_names = data.label_names();
  forest.feature_names = data.feature_names();
  forest.trees.resize(params.n_estimators);
  train_trees(data, params, params.seed, 0, forest.trees, threads);
  return forest;
}

void check_schema(const RandomForest& forest, const Dataset& data) {
  if (data.feature_names() != forest.feature_names) {
    throw Error(ErrorCode::SchemaMismatch, "feature names or order differ from the forest's");
  }
  const auto& ours = forest.label_names;
  const auto& theirs = data.label_names();
  for (std::size_t i = 0; i < std::min(ours.size(), theirs.size()); ++i) {
    if (ours[i] != theirs[i]) {
      throw Error(ErrorCode::SchemaMismatch, "label table differs at class " + std::to_string(i));
    }
  }
  for (ClassId c : data.labels()) {
    if (c >= ours.size()) {
      throw Error(ErrorCode::UnknownLabel, "class id " + std::to_string(c) + " not in forest label table");
    }
  }
}

RandomForest warm_start_extend(const RandomForest& forest, const Dataset& data,
                               std::uint32_t n_additional, std::uint64_t seed, unsigned threads) {
  if (n_additional == 0) throw Error(ErrorCode::InvalidArgument, "n_additional must be >= 1");
  check_schema(forest, data);
  if (data.n_classes() != forest.n_classes()) {
    throw Error(ErrorCode::SchemaMismatch, "label table size differs from the forest's");
  }
  check_trainable(data, forest.params);

  RandomForest extended = forest;
  const auto existing = forest.trees.size();
  std::vector<DecisionTree> fresh(n_additional);
  train_trees(data, forest.params, seed, existing, fresh, threads);
  extended.trees.insert(extended.trees.end(), std::make_move_iterator(fresh.begin()),
                        std::make_move_iterator(fresh.end()));
  extended.params.n_estimators = static_cast<std::uint32_t>(extended.trees.size());
  return extended;
}

// ---------------------------------------------------------------------------
// Prediction and metrics

ClassId predict(const RandomForest& forest, std::span<const double> row) {
  if (row.size() != forest.n_features()) {
    throw Error(ErrorCode::DimensionMismatch, "row has " + std::to_string(row.size()) +
                                                  " values, forest expects " +
                                                  std::to_string(forest.n_features()));
  }
  if (forest.trees.empty()) throw Error(ErrorCode::EmptyForest, "cannot predict with an empty forest");
  std::vector<std::uint32_t> votes(forest.n_classes(), 0);
  for (const auto& tree : forest.trees) ++votes[tree.predict(row)];
  return argmax_lowest(votes);
}

std::vector<ClassId> predict_all(const RandomForest& forest, const Dataset& data) {
  std::vector<ClassId> out;
  out.reserve(data.n_samples());
  for (std::size_t i = 0; i < data.n_samples(); ++i) out.push_back(predict(forest, data.row(i)));
  return out;
}

Metrics compute_metrics(std::span<const ClassId> actual, std::span<const ClassId> predicted,
                        ClassId positive_label) {
  if (actual.size() != predicted.size()) {
    throw Error(ErrorCode::DimensionMismatch, "actual and predicted lengths differ");
  }
  if (actual.empty()) throw Error(ErrorCode::EmptyDataset, "no samples to evaluate");
  Metrics m;
  m.n_samples = actual.size();
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == predicted[i]) ++correct;
    ++m.confusion[actual[i] == positive_label][predicted[i] == positive_label];
  }
  const auto ratio = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(correct, m.n_samples);
  m.precision = ratio(m.tp(), m.tp() + m.fp());
  m.recall = ratio(m.tp(), m.tp() + m.fn());
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

Metrics evaluate(const RandomForest& forest, const Dataset& data, ClassId positive_label) {
  check_schema(forest, data);
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "evaluation set has no rows");
  if (positive_label >= forest.n_classes()) {
    throw Error(ErrorCode::InvalidArgument, "positive label outside the label table");
  }
  const auto predicted = predict_all(forest, data);
  return compute_metrics(data.labels(), predicted, positive_label);
}

}  // namespace fedrf::forest
