#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedrf/forest.hpp"

namespace fedrf::wire {

inline constexpr std::uint8_t kForestMagic[4] = {'F', 'R', 'F', '1'};
inline constexpr std::uint16_t kForestFormatVersion = 1;

/// Canonical forest blob (all integers little-endian):
///
///   "FRF1" | version u16 | n_trees u32 | n_features u32 | n_classes u32
///   | n_features x (len u32, utf-8 bytes)        feature names
///   | n_classes  x (len u32, utf-8 bytes)        label names
///   | n_trees x ( node_count u32
///               | node_count x ( feature i32 (-1 = leaf) | threshold f64
///                              | left u32 | right u32
///                              | class_counts u32 x n_classes ) )
///
/// Hyperparameters are not part of the blob.
std::vector<std::uint8_t> encode_forest(const forest::RandomForest& forest);

/// Inverse of encode_forest. Rejects anything that is not canonical:
/// BadMagic, UnsupportedVersion, TruncatedPayload, CorruptIndex (bad child or
/// feature index, unreachable node, empty leaf), TrailingData. The decoded
/// forest has default params with n_estimators = tree count.
forest::RandomForest decode_forest(std::span<const std::uint8_t> bytes);

}  // namespace fedrf::wire
