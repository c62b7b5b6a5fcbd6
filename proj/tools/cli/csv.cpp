#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

namespace simix::cli {

namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

}  // namespace

CsvTable parse_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;       // inside a quoted field
  bool was_quoted = false;   // current field started with a quote
  bool pending = false;      // something was read for the current record
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    pending = false;
  };

  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || was_quoted) {
          throw InputError(where(source, line) + ": stray quote inside an unquoted field");
        }
        quoted = true;
        was_quoted = true;
        pending = true;
        break;
      case ',':
        end_field();
        pending = true;
        break;
      case '\r':
        if (in.peek() != '\n') throw InputError(where(source, line) + ": bare carriage return");
        break;
      case '\n':
        if (pending || !field.empty()) {
          end_record();
        } else if (!records.empty() || !record.empty()) {
          throw InputError(where(source, line) + ": empty line");
        }
        ++line;
        record_line = line;
        break;
      default:
        if (was_quoted) {
          throw InputError(where(source, line) + ": text after a closing quote");
        }
        field += c;
        pending = true;
    }
  }
  if (quoted) throw InputError(where(source, record_line) + ": unterminated quoted field");
  if (pending || !field.empty()) end_record();

  if (records.empty()) throw InputError(source + ": no header row");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t c2 = 0; c2 < table.header.size(); ++c2) {
    if (table.header[c2].empty()) {
      throw InputError(source + ": header column " + std::to_string(c2 + 1) + " is empty");
    }
    for (std::size_t d = 0; d < c2; ++d) {
      if (table.header[d] == table.header[c2]) {
        throw InputError(source + ": duplicate column name '" + table.header[c2] + "'");
      }
    }
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw InputError(source + ": data row " + std::to_string(r) + " has " +
                       std::to_string(records[r].size()) + " fields, header has " +
                       std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return parse_csv(in, path);
}

NumericColumns to_numeric(const CsvTable& table, const std::string& source) {
  NumericColumns out;
  out.names = table.header;
  const auto rows = static_cast<Eigen::Index>(table.rows.size());
  const auto cols = static_cast<Eigen::Index>(table.header.size());
  out.values.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::string text = table.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      const auto first = text.find_first_not_of(" \t");
      const auto last = text.find_last_not_of(" \t");
      const std::string cell = first == std::string::npos ? "" : text.substr(first, last - first + 1);
      const std::string at = source + ": row " + std::to_string(r + 1) + ", column '" +
                             table.header[static_cast<std::size_t>(c)] + "'";
      if (cell.empty()) throw InputError(at + ": missing value");
      const char* begin = cell.data();
      const char* end = begin + cell.size();
      if (*begin == '+') ++begin;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw InputError(at + ": '" + cell + "' is not a finite number");
      }
      out.values(r, c) = v;
    }
  }
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return ec == std::errc() ? std::string(buf, ptr) : std::string();
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace simix::cli
