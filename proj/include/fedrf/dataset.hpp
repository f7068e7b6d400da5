#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedrf {

using ClassId = std::uint32_t;

/// Numeric feature matrix (row-major) plus class-id labels.
///
/// Class ids index into label_names, which is the federation-wide class
/// table; a dataset may hold fewer distinct classes than the table lists.
class Dataset {
 public:
  Dataset() = default;

  /// Validates every invariant; throws Error(InvalidArgument) on violation
  /// (NaN/inf features, label out of range, shape mismatch).
  Dataset(std::vector<std::string> feature_names, std::vector<double> features,
          std::vector<ClassId> labels, std::vector<std::string> label_names);

  std::size_t n_samples() const noexcept { return labels_.size(); }
  std::size_t n_features() const noexcept { return feature_names_.size(); }
  std::size_t n_classes() const noexcept { return label_names_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * n_features(), n_features()};
  }
  double at(std::size_t row, std::size_t feature) const {
    return features_[row * n_features() + feature];
  }
  ClassId label(std::size_t i) const { return labels_[i]; }

  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const std::vector<std::string>& label_names() const noexcept { return label_names_; }
  const std::vector<double>& features() const noexcept { return features_; }
  const std::vector<ClassId>& labels() const noexcept { return labels_; }

  /// Number of distinct class ids actually present.
  std::size_t distinct_classes() const;

  /// New dataset holding the given rows, in the given order.
  Dataset select(std::span<const std::size_t> rows) const;

  /// Deterministic row subsample of round(fraction * n) rows (at least one),
  /// preserving the original row order. fraction must be in (0, 1].
  Dataset subsample(double fraction, std::uint64_t seed) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<std::string> feature_names_;
  std::vector<double> features_;
  std::vector<ClassId> labels_;
  std::vector<std::string> label_names_;
};

}  // namespace fedrf
