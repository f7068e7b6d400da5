#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fedrf/dataset.hpp"

namespace fedrf::csv {

/// Raw CSV contents: header plus text cells. Fields may be double-quoted
/// ("" escapes a quote); unquoted fields are trimmed; blank lines skipped.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Throws EmptyFile (no header), Io (unreadable), MissingColumn (ragged row).
Table read_table(const std::filesystem::path& path);
Table parse_table(const std::string& text);

/// Writes header and rows, quoting cells that need it.
void write_table(const std::filesystem::path& path, const Table& table);

/// Writes feature columns then `target_column`, labels as their names.
/// Doubles use the shortest round-trip representation.
void write_dataset(const std::filesystem::path& path, const Dataset& data, const std::string& target_column);

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace fedrf::csv
