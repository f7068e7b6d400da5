#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "fedrf/datasite.hpp"
#include "fedrf/error.hpp"

namespace fedrf::datasite {

namespace {

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<ClassId> match_label(const std::string& cell, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == cell) return static_cast<ClassId>(i);
  }
  // "1.0" in the file still matches label "1".
  if (auto v = parse_number(cell)) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (auto w = parse_number(names[i]); w && *w == *v) return static_cast<ClassId>(i);
    }
  }
  return std::nullopt;
}

}  // namespace

Dataset load_dataset(const csv::Table& table, const wire::DataParams& params) {
  params.validate();
  const auto& header = table.header;
  auto target_it = std::find(header.begin(), header.end(), params.target_column);
  if (target_it == header.end()) {
    throw Error(ErrorCode::MissingColumn, "target column '" + params.target_column + "' not in header");
  }
  if (table.rows.empty()) throw Error(ErrorCode::EmptyFile, "CSV has a header but no data rows");
  const auto target = static_cast<std::size_t>(target_it - header.begin());

  std::vector<std::size_t> columns;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == target) continue;
    const auto& ignored = params.ignored_columns;
    if (std::find(ignored.begin(), ignored.end(), header[c]) != ignored.end()) continue;
    columns.push_back(c);
    feature_names.push_back(header[c]);
  }

  std::vector<double> features;
  features.reserve(table.rows.size() * columns.size());
  std::vector<ClassId> labels;
  labels.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    for (auto c : columns) {
      auto v = parse_number(row[c]);
      if (!v) {
        throw Error(ErrorCode::NonNumericFeature, "row " + std::to_string(r + 1) + ", column '" + header[c] +
                                                      "': '" + row[c] + "' is not a finite number");
      }
      features.push_back(*v);
    }
    auto label = match_label(row[target], params.label_names);
    if (!label) {
      throw Error(ErrorCode::UnknownLabelValue,
                  "row " + std::to_string(r + 1) + ": label '" + row[target] + "' not in label_names");
    }
    labels.push_back(*label);
  }
  return Dataset(std::move(feature_names), std::move(features), std::move(labels), params.label_names);
}

Dataset load_dataset(const std::filesystem::path& path, const wire::DataParams& params) {
  return load_dataset(csv::read_table(path), params);
}

std::vector<std::string> discover_labels(const csv::Table& table, const std::string& target_column) {
  auto it = std::find(table.header.begin(), table.header.end(), target_column);
  if (it == table.header.end()) {
    throw Error(ErrorCode::MissingColumn, "target column '" + target_column + "' not in header");
  }
  const auto target = static_cast<std::size_t>(it - table.header.begin());
  std::set<std::string> distinct;
  for (const auto& row : table.rows) distinct.insert(row[target]);
  std::vector<std::string> labels(distinct.begin(), distinct.end());
  const bool numeric = std::all_of(labels.begin(), labels.end(), [](const auto& s) { return parse_number(s); });
  if (numeric) {
    std::stable_sort(labels.begin(), labels.end(),
                     [](const auto& a, const auto& b) { return *parse_number(a) < *parse_number(b); });
  }
  return labels;
}

}  // namespace fedrf::datasite
