#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nnquad {

/// Numeric table with a named header. Every cell is a double.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column index by name, or -1.
  int Column(const std::string& name) const;
  /// Column index by name; throws kIoError naming the column if absent.
  int RequireColumn(const std::string& name) const;
};

/// Shortest text that parses back to the same double.
std::string FormatDouble(double x);

void WriteCsv(const std::filesystem::path& path, const CsvTable& table);
/// Throws kIoError with the offending line number on malformed input.
CsvTable ReadCsv(const std::filesystem::path& path);

/// Flat `key=value` report, one pair per line, in insertion order.
using KeyValues = std::vector<std::pair<std::string, std::string>>;
void WriteKeyValues(const std::filesystem::path& path, const KeyValues& kv);

}  // namespace nnquad
