#pragma once

// Minimal CSV with '#'-prefixed metadata lines. Numbers are written in the
// shortest form that round-trips exactly, so files re-read bit-identically.

#include <iosfwd>
#include <string>
#include <vector>

namespace bistab::csv {

std::string format_double(double value);

struct Table {
  std::vector<std::string> metadata;  // '#' lines without the prefix
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws io-error when absent.
  std::size_t column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
};

void write(std::ostream& out, const std::vector<std::string>& metadata,
           const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows);
Table read(std::istream& in);

}  // namespace bistab::csv
