#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace simix::cli {

// Malformed input: bad CSV, missing cells, unknown columns, bad artifacts.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC-4180 style: comma separated, double-quoted fields with "" escapes,
/// LF or CRLF line ends, header row required, every row as wide as the header.
CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv_file(const std::string& path);

struct NumericColumns {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // rows x columns
};

/// Every cell must be a finite decimal number; empty cells are rejected.
NumericColumns to_numeric(const CsvTable& table, const std::string& source);

/// Shortest text that reads back to the same double.
std::string format_double(double x);

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_field(const std::string& text);

}  // namespace simix::cli
