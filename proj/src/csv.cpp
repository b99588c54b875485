#include "nnquad/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "nnquad/errors.hpp"

namespace nnquad {

int CsvTable::Column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int CsvTable::RequireColumn(const std::string& name) const {
  int c = Column(name);
  if (c < 0) throw Error(ErrorCode::kIoError, "missing CSV column '" + name + "'");
  return c;
}

std::string FormatDouble(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

void WriteCsv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  std::string line;
  for (size_t i = 0; i < table.header.size(); ++i) {
    if (i) line += ',';
    line += table.header[i];
  }
  out << line << '\n';
  for (const auto& row : table.rows) {
    line.clear();
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) line += ',';
      line += FormatDouble(row[i]);
    }
    out << line << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

CsvTable ReadCsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kIoError, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.header.size());
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        throw Error(ErrorCode::kIoError,
                    path.string() + ":" + std::to_string(lineno) + ": bad number");
      }
      row.push_back(v);
      if (next == end) break;
      if (*next != ',') {
        throw Error(ErrorCode::kIoError,
                    path.string() + ":" + std::to_string(lineno) + ": expected ','");
      }
      p = next + 1;
    }
    if (row.size() != table.header.size()) {
      throw Error(ErrorCode::kIoError, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                           std::to_string(table.header.size()) + " columns, got " +
                                           std::to_string(row.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void WriteKeyValues(const std::filesystem::path& path, const KeyValues& kv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

}  // namespace nnquad
