#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace smcglmm {

// Minimal CSV table: header row + string cells, with numeric accessors.
// Quoting is not supported; the engine's own outputs never need it.
class CsvTable {
 public:
  static CsvTable read_file(const std::string& path);
  static CsvTable parse(std::istream& in, const std::string& origin);
  static CsvTable from_columns(std::vector<std::string> header,
                               std::vector<std::vector<std::string>> columns);

  void write_file(const std::string& path) const;

  const std::vector<std::string>& header() const { return header_; }
  std::size_t n_rows() const { return rows_; }
  bool has_column(const std::string& name) const;
  std::size_t column_index(const std::string& name) const;  // throws IoError
  const std::vector<std::string>& strings(const std::string& name) const;
  Eigen::VectorXd numeric(const std::string& name) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> columns_;
  std::size_t rows_ = 0;
};

// Writes a rectangular table; values are formatted with max_digits10 so a
// rerun with the same seed reproduces files byte-for-byte.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values);

std::string format_double(double v);

}  // namespace smcglmm
