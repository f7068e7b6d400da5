#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedrf/error.hpp"
#include "fedrf/harness.hpp"
#include "fedrf/rng.hpp"

namespace fedrf::harness {

Partition partition(const Dataset& data, std::size_t n_silos, double test_fraction, std::uint64_t seed,
                    bool stratify) {
  if (n_silos == 0) throw Error(ErrorCode::InvalidArgument, "n_silos must be at least 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "test_fraction must lie in (0, 1)");
  }
  const std::size_t n = data.n_samples();
  const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n) - 1e-9));
  if (n_test == 0 || n_test >= n || n - n_test < n_silos) {
    throw Error(ErrorCode::TooFewRows, std::to_string(n) + " rows cannot give a test set and " +
                                           std::to_string(n_silos) + " non-empty silos");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));

  Partition p;
  p.part_rows.resize(n_silos);
  if (!stratify) {
    p.test_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    const std::size_t rest = n - n_test;
    std::size_t pos = n_test;
    for (std::size_t k = 0; k < n_silos; ++k) {
      const std::size_t size = rest / n_silos + (k < rest % n_silos ? 1 : 0);
      p.part_rows[k].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                            order.begin() + static_cast<std::ptrdiff_t>(pos + size));
      pos += size;
    }
  } else {
    // Class-sorted view of the shuffled order; evenly spaced picks from it
    // keep each class's share in the test set and in every silo.
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i;
    auto sorted = order;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](std::size_t a, std::size_t b) { return data.label(a) < data.label(b); });
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i) {
      if ((i + 1) * n_test / n > i * n_test / n) {
        p.test_rows.push_back(sorted[i]);
      } else {
        rest.push_back(sorted[i]);
      }
    }
    for (std::size_t i = 0; i < rest.size(); ++i) p.part_rows[i % n_silos].push_back(rest[i]);
    auto by_rank = [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; };
    std::sort(p.test_rows.begin(), p.test_rows.end(), by_rank);
    for (auto& rows : p.part_rows) std::sort(rows.begin(), rows.end(), by_rank);
  }

  p.test = data.select(p.test_rows);
  for (std::size_t k = 0; k < n_silos; ++k) {
    p.parts.push_back(data.select(p.part_rows[k]));
    if (p.parts.back().distinct_classes() < 2) {
      throw Error(ErrorCode::SingleClassPartition,
                  "silo " + std::to_string(k) + " holds a single class (" +
                      std::to_string(p.parts.back().n_samples()) + " rows)");
    }
  }
  return p;
}

csv::Table to_table(const Dataset& data, const std::string& target) {
  csv::Table t;
  t.header = data.feature_names();
  t.header.push_back(target);
  t.rows.reserve(data.n_samples());
  for (std::size_t r = 0; r < data.n_samples(); ++r) {
    std::vector<std::string> cells;
    cells.reserve(data.n_features() + 1);
    for (double v : data.row(r)) cells.push_back(csv::format_double(v));
    cells.push_back(data.label_names()[data.label(r)]);
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace fedrf::harness
