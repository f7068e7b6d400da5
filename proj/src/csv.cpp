#include "fedrf/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fedrf/error.hpp"

namespace fedrf::csv {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Splits the whole text into records; quoted fields may span lines.
std::vector<std::vector<std::string>> split_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  bool any = false;

  auto end_field = [&] {
    record.push_back(was_quoted ? field : trim(field));
    field.clear();
    was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty() && !any;
    if (!blank) records.push_back(std::move(record));
    record.clear();
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (trim(field).empty()) {
          field.clear();
          quoted = true;
          was_quoted = true;
          any = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        any = true;
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        if (c != '\r' && c != ' ' && c != '\t') any = true;
        break;
    }
  }
  if (!field.empty() || !record.empty() || any) end_record();
  return records;
}

}  // namespace

Table parse_table(const std::string& text) {
  auto records = split_records(text);
  if (records.empty()) throw Error(ErrorCode::EmptyFile, "CSV has no header row");
  Table t;
  t.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size()) {
      throw Error(ErrorCode::MissingColumn, "data row " + std::to_string(i) + " has " +
                                                std::to_string(records[i].size()) + " fields, header has " +
                                                std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_table(buf.str());
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos && s == trim(s)) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  return q + "\"";
}

void write_record(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << quote(cells[i]);
  }
  out << '\n';
}

}  // namespace

void write_table(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_record(out, table.header);
  for (const auto& row : table.rows) write_record(out, row);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_dataset(const std::filesystem::path& path, const Dataset& data, const std::string& target_column) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  auto header = data.feature_names();
  header.push_back(target_column);
  write_record(out, header);
  std::vector<std::string> cells;
  for (std::size_t r = 0; r < data.n_samples(); ++r) {
    cells.clear();
    for (double v : data.row(r)) cells.push_back(format_double(v));
    cells.push_back(data.label_names()[data.label(r)]);
    write_record(out, cells);
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace fedrf::csv
