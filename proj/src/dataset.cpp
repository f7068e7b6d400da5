#include "fedrf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedrf/error.hpp"
#include "fedrf/rng.hpp"

namespace fedrf {

Dataset::Dataset(std::vector<std::string> feature_names, std::vector<double> features,
                 std::vector<ClassId> labels, std::vector<std::string> label_names)
    : feature_names_(std::move(feature_names)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      label_names_(std::move(label_names)) {
  if (features_.size() != labels_.size() * feature_names_.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "feature matrix has " + std::to_string(features_.size()) + " cells, expected " +
                    std::to_string(labels_.size()) + " x " + std::to_string(feature_names_.size()));
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (!std::isfinite(features_[i])) {
      throw Error(ErrorCode::InvalidArgument,
                  "non-finite feature value at row " + std::to_string(i / feature_names_.size()));
    }
  }
  for (ClassId c : labels_) {
    if (c >= label_names_.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  "label id " + std::to_string(c) + " outside label table of size " +
                      std::to_string(label_names_.size()));
    }
  }
}

std::size_t Dataset::distinct_classes() const {
  std::vector<bool> seen(label_names_.size(), false);
  std::size_t n = 0;
  for (ClassId c : labels_) {
    if (!seen[c]) {
      seen[c] = true;
      ++n;
    }
  }
  return n;
}

Dataset Dataset::select(std::span<const std::size_t> rows) const {
  std::vector<double> features;
  features.reserve(rows.size() * n_features());
  std::vector<ClassId> labels;
  labels.reserve(rows.size());
  for (std::size_t r : rows) {
    auto src = row(r);
    features.insert(features.end(), src.begin(), src.end());
    labels.push_back(labels_[r]);
  }
  return Dataset(feature_names_, std::move(features), std::move(labels), label_names_);
}

Dataset Dataset::subsample(double fraction, std::uint64_t seed) const {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "sample_fraction must be in (0, 1]");
  }
  if (fraction == 1.0) return *this;
  const auto n = n_samples();
  auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  keep = std::clamp<std::size_t>(keep, 1, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return select(idx);
}

}  // namespace fedrf
