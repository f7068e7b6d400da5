#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fedrf/forest.hpp"

namespace fedrf::aggregation {

using SiloId = std::string;

/// Per-silo weights in declaration order. Before resolution entries may be
/// absent; after resolution all are present and sum to 1.
struct ClientWeights {
  std::vector<std::pair<SiloId, std::optional<double>>> entries;

  std::optional<double> get(const SiloId& silo) const;
  double sum_present() const;
  bool all_present() const;
};

enum class Strategy { Uniform, Weighted };

/// How absent weights share the undeclared mass.
enum class FillMode { Equal, Proportional };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& text);
std::string to_string(FillMode m);
FillMode parse_fill_mode(const std::string& text);

inline constexpr double kWeightTolerance = 1e-9;

/// Fills in missing weights over the successful silos.
///
/// Failed silos are dropped first. Declared values of the survivors are kept
/// and the mass 1 - sum(all declared) goes to the surviving silos without a
/// weight (equally, or in proportion to `sample_counts` in Proportional
/// mode). The survivors are then renormalised; if their total is zero each
/// gets an equal share. Successful silos missing from
/// `declared` count as absent. Declared silos that did not succeed are
/// reported in `dropped` when provided.
ClientWeights resolve_weights(const ClientWeights& declared, const std::set<SiloId>& successful,
                              FillMode mode = FillMode::Equal,
                              const std::map<SiloId, std::uint64_t>& sample_counts = {},
                              std::vector<SiloId>* dropped = nullptr);

/// One silo's contribution to an aggregation.
struct ClientForest {
  SiloId silo;
  forest::RandomForest forest;
};

/// Per-silo outcome of a sampling pass.
struct Selection {
  SiloId silo;
  std::size_t available = 0;  // N_i
  std::size_t sampled = 0;    // floor(w_i * N_i)
  std::size_t topped_up = 0;  // extra trees taken to reach the target size
  std::vector<std::size_t> tree_indices;  // into the silo's forest, in output order
};

struct AggregationResult {
  forest::RandomForest forest;
  std::vector<Selection> selections;
};

/// k_i = floor(w_i * N_i) for the given resolved weight.
std::size_t quota(double weight, std::size_t n_trees);

/// Draws floor(w_i * N_i) trees without replacement from each silo, then tops
/// the global forest up to max_i N_i with unsampled trees, round-robin over
/// silos in descending weight order (zero-weight silos only once the others
/// are exhausted). Output order: silo order, then sampled, then top-up.
AggregationResult aggregate_detailed(const std::vector<ClientForest>& forests,
                                     const ClientWeights& weights, std::uint64_t seed);

forest::RandomForest aggregate(const std::vector<ClientForest>& forests,
                               const ClientWeights& weights, std::uint64_t seed);

/// aggregate() with all silos weighted equally.
forest::RandomForest uniform_aggregate(const std::vector<ClientForest>& forests, std::uint64_t seed);

/// Every tree of every silo, in silo order. Debug comparison only.
forest::RandomForest concatenate(const std::vector<ClientForest>& forests);

}  // namespace fedrf::aggregation
