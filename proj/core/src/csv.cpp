#include "smcglmm/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "smcglmm/errors.hpp"

namespace smcglmm {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable CsvTable::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse(in, path);
}

CsvTable CsvTable::parse(std::istream& in, const std::string& origin) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(origin + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header_ = split_line(line);
  t.columns_.resize(t.header_.size());
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header_.size())
      throw IoError(origin + ": ragged row with " +
                    std::to_string(cells.size()) + " cells, expected " +
                    std::to_string(t.header_.size()));
    for (std::size_t j = 0; j < cells.size(); ++j)
      t.columns_[j].push_back(std::move(cells[j]));
    ++t.rows_;
  }
  return t;
}

CsvTable CsvTable::from_columns(std::vector<std::string> header,
                                std::vector<std::vector<std::string>> columns) {
  if (header.size() != columns.size())
    throw ValidationError("csv: header/column count mismatch");
  CsvTable t;
  t.header_ = std::move(header);
  t.columns_ = std::move(columns);
  t.rows_ = t.columns_.empty() ? 0 : t.columns_[0].size();
  for (const auto& col : t.columns_)
    if (col.size() != t.rows_) throw ValidationError("csv: ragged columns");
  return t;
}

void CsvTable::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t j = 0; j < header_.size(); ++j) {
    if (j) out << ',';
    out << header_[j];
  }
  out << '\n';
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      if (j) out << ',';
      out << columns_[j][i];
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& h : header_)
    if (h == name) return true;
  return false;
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < header_.size(); ++j)
    if (header_[j] == name) return j;
  throw IoError("missing column '" + name + "'");
}

const std::vector<std::string>& CsvTable::strings(
    const std::string& name) const {
  return columns_[column_index(name)];
}

Eigen::VectorXd CsvTable::numeric(const std::string& name) const {
  const auto& col = columns_[column_index(name)];
  Eigen::VectorXd v(static_cast<Eigen::Index>(col.size()));
  for (std::size_t i = 0; i < col.size(); ++i) {
    double value = 0.0;
    const char* first = col[i].data();
    const char* last = first + col[i].size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
      throw IoError("column '" + name + "' row " + std::to_string(i + 1) +
                    ": not a number: '" + col[i] + "'");
    v[static_cast<Eigen::Index>(i)] = value;
  }
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values) {
  if (header.size() != static_cast<std::size_t>(values.cols()))
    throw ValidationError("write_csv: header/column count mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(values(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace smcglmm
