#include "fedrf/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedrf/error.hpp"
#include "fedrf/rng.hpp"

namespace fedrf::aggregation {

std::optional<double> ClientWeights::get(const SiloId& silo) const {
  for (const auto& [id, w] : entries) {
    if (id == silo) return w;
  }
  return std::nullopt;
}

double ClientWeights::sum_present() const {
  double s = 0.0;
  for (const auto& [id, w] : entries) s += w.value_or(0.0);
  return s;
}

bool ClientWeights::all_present() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.second.has_value(); });
}

std::string to_string(Strategy s) { return s == Strategy::Uniform ? "uniform" : "weighted"; }

Strategy parse_strategy(const std::string& text) {
  if (text == "uniform") return Strategy::Uniform;
  if (text == "weighted") return Strategy::Weighted;
  throw Error(ErrorCode::InvalidArgument, "unknown aggregation strategy '" + text + "'");
}

std::string to_string(FillMode m) { return m == FillMode::Equal ? "equal" : "proportional"; }

FillMode parse_fill_mode(const std::string& text) {
  if (text == "equal") return FillMode::Equal;
  if (text == "proportional") return FillMode::Proportional;
  throw Error(ErrorCode::InvalidArgument, "unknown weight mode '" + text + "'");
}

ClientWeights resolve_weights(const ClientWeights& declared, const std::set<SiloId>& successful,
                              FillMode mode, const std::map<SiloId, std::uint64_t>& sample_counts,
                              std::vector<SiloId>* dropped) {
  double declared_total = 0.0;
  for (const auto& [id, w] : declared.entries) {
    if (!w) continue;
    if (!std::isfinite(*w) || *w < 0.0 || *w > 1.0) {
      throw Error(ErrorCode::InvalidArgument, "weight of silo '" + id + "' outside [0, 1]");
    }
    declared_total += *w;
  }
  if (declared_total > 1.0 + kWeightTolerance) {
    throw Error(ErrorCode::DeclaredWeightsExceedOne,
                "declared weights sum to " + std::to_string(declared_total));
  }
  if (successful.empty()) throw Error(ErrorCode::NoSuccessfulClients, "no silo completed the round");

  // Survivors in declaration order, then successful silos nobody declared.
  std::vector<std::pair<SiloId, std::optional<double>>> survivors;
  for (const auto& [id, w] : declared.entries) {
    if (successful.count(id)) {
      survivors.emplace_back(id, w);
    } else if (dropped) {
      dropped->push_back(id);
    }
  }
  for (const auto& id : successful) {
    if (std::none_of(declared.entries.begin(), declared.entries.end(),
                     [&](const auto& e) { return e.first == id; })) {
      survivors.emplace_back(id, std::nullopt);
    }
  }

  const double remaining = std::max(0.0, 1.0 - declared_total);
  std::vector<std::size_t> absent;
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    if (!survivors[i].second) absent.push_back(i);
  }
  if (!absent.empty()) {
    std::uint64_t total_samples = 0;
    if (mode == FillMode::Proportional) {
      for (auto i : absent) {
        auto it = sample_counts.find(survivors[i].first);
        total_samples += it == sample_counts.end() ? 0 : it->second;
      }
    }
    for (auto i : absent) {
      double share = remaining / static_cast<double>(absent.size());
      if (total_samples > 0) {
        auto it = sample_counts.find(survivors[i].first);
        const auto n = it == sample_counts.end() ? 0 : it->second;
        share = remaining * static_cast<double>(n) / static_cast<double>(total_samples);
      }
      survivors[i].second = share;
    }
  }

  double total = 0.0;
  for (const auto& [id, w] : survivors) total += *w;
  ClientWeights resolved;
  for (auto& [id, w] : survivors) {
    const double v = total > kWeightTolerance ? *w / total : 1.0 / static_cast<double>(survivors.size());
    resolved.entries.emplace_back(id, v);
  }
  return resolved;
}

std::size_t quota(double weight, std::size_t n_trees) {
  const double raw = std::floor(weight * static_cast<double>(n_trees) + kWeightTolerance);
  if (raw <= 0.0) return 0;
  return std::min(n_trees, static_cast<std::size_t>(raw));
}

namespace {

void check_inputs(const std::vector<ClientForest>& forests, const ClientWeights& weights) {
  if (forests.empty()) throw Error(ErrorCode::EmptyForest, "no client forests to aggregate");
  if (weights.entries.size() != forests.size()) {
    throw Error(ErrorCode::InvalidArgument, "weights do not cover exactly the client forests");
  }
  for (const auto& cf : forests) {
    if (cf.forest.trees.empty()) throw Error(ErrorCode::EmptyForest, "silo '" + cf.silo + "' sent no trees");
    auto w = weights.get(cf.silo);
    if (!w) throw Error(ErrorCode::InvalidArgument, "no resolved weight for silo '" + cf.silo + "'");
    if (!cf.forest.same_schema(forests.front().forest)) {
      throw Error(ErrorCode::SchemaMismatch, "silo '" + cf.silo + "' uses a different feature/label schema");
    }
  }
}

forest::RandomForest empty_like(const forest::RandomForest& model) {
  forest::RandomForest out;
  out.params = model.params;
  out.label_names = model.label_names;
  out.feature_names = model.feature_names;
  return out;
}

}  // namespace

AggregationResult aggregate_detailed(const std::vector<ClientForest>& forests,
                                     const ClientWeights& weights, std::uint64_t seed) {
  check_inputs(forests, weights);

  const auto n = forests.size();
  std::vector<double> w(n);
  std::vector<std::vector<std::size_t>> order(n);  // shuffled tree indices per silo
  std::vector<std::size_t> taken(n, 0);
  AggregationResult result;
  result.selections.resize(n);

  std::size_t target = 0;
  std::size_t selected = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cf = forests[i];
    const auto size = cf.forest.trees.size();
    w[i] = *weights.get(cf.silo);
    target = std::max(target, size);
    order[i].resize(size);
    std::iota(order[i].begin(), order[i].end(), 0);
    Rng rng(derive_seed(seed, hash_label(cf.silo)));
    rng.shuffle(std::span<std::size_t>(order[i]));

    auto& sel = result.selections[i];
    sel.silo = cf.silo;
    sel.available = size;
    sel.sampled = quota(w[i], size);
    taken[i] = sel.sampled;
    selected += sel.sampled;
  }

  // Top-up: positive weights first (descending, ties in silo order), then
  // zero weights, one tree per silo per pass.
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](auto a, auto b) { return w[a] > w[b]; });
  auto deficit = target > selected ? target - selected : 0;
  for (bool positive_tier : {true, false}) {
    bool progressed = true;
    while (deficit > 0 && progressed) {
      progressed = false;
      for (auto i : rank) {
        if (deficit == 0) break;
        if ((w[i] > 0.0) != positive_tier || taken[i] >= order[i].size()) continue;
        ++taken[i];
        ++result.selections[i].topped_up;
        --deficit;
        progressed = true;
      }
    }
  }

  result.forest = empty_like(forests.front().forest);
  for (std::size_t i = 0; i < n; ++i) {
    auto& sel = result.selections[i];
    sel.tree_indices.assign(order[i].begin(), order[i].begin() + static_cast<std::ptrdiff_t>(taken[i]));
    for (auto t : sel.tree_indices) result.forest.trees.push_back(forests[i].forest.trees[t]);
  }
  result.forest.params.n_estimators = static_cast<std::uint32_t>(result.forest.trees.size());
  if (result.forest.trees.empty()) throw Error(ErrorCode::EmptyForest, "aggregation selected no trees");
  return result;
}

forest::RandomForest aggregate(const std::vector<ClientForest>& forests, const ClientWeights& weights,
                               std::uint64_t seed) {
  return aggregate_detailed(forests, weights, seed).forest;
}

forest::RandomForest uniform_aggregate(const std::vector<ClientForest>& forests, std::uint64_t seed) {
  ClientWeights declared;
  std::set<SiloId> all;
  for (const auto& cf : forests) {
    declared.entries.emplace_back(cf.silo, std::nullopt);
    all.insert(cf.silo);
  }
  if (forests.empty()) throw Error(ErrorCode::EmptyForest, "no client forests to aggregate");
  return aggregate(forests, resolve_weights(declared, all), seed);
}

forest::RandomForest concatenate(const std::vector<ClientForest>& forests) {
  if (forests.empty()) throw Error(ErrorCode::EmptyForest, "no client forests to concatenate");
  auto out = empty_like(forests.front().forest);
  for (const auto& cf : forests) {
    if (!cf.forest.same_schema(forests.front().forest)) {
      throw Error(ErrorCode::SchemaMismatch, "silo '" + cf.silo + "' uses a different feature/label schema");
    }
    out.trees.insert(out.trees.end(), cf.forest.trees.begin(), cf.forest.trees.end());
  }
  out.params.n_estimators = static_cast<std::uint32_t>(out.trees.size());
  return out;
}

}  // namespace fedrf::aggregation
