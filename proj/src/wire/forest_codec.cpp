#include "fedrf/wire/forest_codec.hpp"

#include <algorithm>
#include <limits>

#include "fedrf/error.hpp"
#include "fedrf/wire/byte_io.hpp"

namespace fedrf::wire {

namespace {

constexpr std::size_t kNodeFixedBytes = 4 + 8 + 4 + 4;

void check_count(std::uint64_t count, std::uint64_t min_bytes_each, const ByteReader& in, const char* what) {
  if (min_bytes_each != 0 && count > in.remaining() / min_bytes_each) {
    throw Error(ErrorCode::TruncatedPayload, std::string(what) + " count " + std::to_string(count) +
                                                 " exceeds the remaining " + std::to_string(in.remaining()) +
                                                 " bytes");
  }
}

}  // namespace

std::vector<std::uint8_t> encode_forest(const forest::RandomForest& forest) {
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.bytes(kForestMagic);
  w.u16(kForestFormatVersion);
  w.u32(static_cast<std::uint32_t>(forest.trees.size()));
  w.u32(static_cast<std::uint32_t>(forest.feature_names.size()));
  w.u32(static_cast<std::uint32_t>(forest.label_names.size()));
  for (const auto& name : forest.feature_names) w.string(name);
  for (const auto& name : forest.label_names) w.string(name);
  for (const auto& tree : forest.trees) {
    w.u32(static_cast<std::uint32_t>(tree.size()));
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const auto& n = tree.node(i);
      w.i32(n.feature);
      w.f64(n.threshold);
      w.u32(n.left);
      w.u32(n.right);
      for (auto c : tree.class_counts(i)) w.u32(c);
    }
  }
  return out;
}

forest::RandomForest decode_forest(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  if (in.remaining() < sizeof(kForestMagic) ||
      !std::equal(std::begin(kForestMagic), std::end(kForestMagic), bytes.begin())) {
    throw Error(ErrorCode::BadMagic, "forest blob does not start with FRF1");
  }
  in.bytes(sizeof(kForestMagic));
  const auto version = in.u16();
  if (version != kForestFormatVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "forest format version " + std::to_string(version) +
                                                   " (supported: " + std::to_string(kForestFormatVersion) + ")");
  }
  const auto n_trees = in.u32();
  const auto n_features = in.u32();
  const auto n_classes = in.u32();
  if (n_classes == 0) throw Error(ErrorCode::CorruptIndex, "forest declares zero classes");
  if (n_trees == 0) throw Error(ErrorCode::CorruptIndex, "forest declares zero trees");

  forest::RandomForest forest;
  check_count(n_features, 4, in, "feature name");
  forest.feature_names.reserve(n_features);
  for (std::uint32_t i = 0; i < n_features; ++i) forest.feature_names.push_back(in.string());
  check_count(n_classes, 4, in, "label name");
  forest.label_names.reserve(n_classes);
  for (std::uint32_t i = 0; i < n_classes; ++i) forest.label_names.push_back(in.string());

  const std::uint64_t record = kNodeFixedBytes + 4ULL * n_classes;
  check_count(n_trees, 4 + record, in, "tree");
  forest.trees.reserve(n_trees);
  std::vector<std::uint32_t> counts(n_classes);
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    const auto n_nodes = in.u32();
    if (n_nodes == 0) throw Error(ErrorCode::CorruptIndex, "tree " + std::to_string(t) + " has no nodes");
    check_count(n_nodes, record, in, "node");
    forest::DecisionTree tree(n_features, n_classes);
    for (std::uint32_t i = 0; i < n_nodes; ++i) {
      forest::TreeNode node;
      node.feature = in.i32();
      node.threshold = in.f64();
      node.left = in.u32();
      node.right = in.u32();
      for (auto& c : counts) c = in.u32();
      tree.add_node(node, counts);
    }
    try {
      tree.validate();
    } catch (const Error& e) {
      throw Error(e.code(), "tree " + std::to_string(t) + ": " + e.detail());
    }
    forest.trees.push_back(std::move(tree));
  }
  if (in.remaining() != 0) {
    throw Error(ErrorCode::TrailingData, std::to_string(in.remaining()) + " bytes after the last tree");
  }
  forest.params.n_estimators = n_trees;
  return forest;
}

}  // namespace fedrf::wire
