#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crlab/types.hpp"

namespace crlab {

inline void write_csv(std::ostream& out, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

// Batch of values with a per-column prefix (z1..zN or x1..xN) and a trailing
// env_id column.
inline void write_batch_csv(std::ostream& out, const Matrix& values, const std::string& prefix,
                            int env_id) {
  for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << prefix << (j + 1);
  out << ",env_id\n";
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << values(i, j);
    out << ',' << env_id << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

// Numeric CSV with one header row. Non-numeric cells throw.
inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_csv: empty input");
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.header.size())
      throw std::runtime_error("read_csv: ragged row");
    rows.push_back(std::move(row));
  }
  table.values.resize(rows.size(), table.header.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) table.values(i, j) = rows[i][j];
  return table;
}

}  // namespace crlab
