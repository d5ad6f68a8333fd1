#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace hsie {

// Rectangular numeric table with a '#'-prefixed metadata header. Complex
// quantities are stored as paired columns named <base>_re / <base>_im.
class ResultTable {
 public:
  ResultTable() = default;
  explicit ResultTable(std::vector<std::string> columns);

  void set_meta(const std::string& key, const std::string& value);
  void add_row(const std::vector<double>& row);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  const std::vector<std::pair<std::string, std::string>>& metadata() const { return metadata_; }

  std::size_t column(const std::string& name) const;  // throws if absent
  double at(std::size_t row, const std::string& name) const;

  // RFC-4180-style: metadata as '# key: value' lines, then the header row,
  // then one record per row; '.' decimal, LF line endings; doubles printed
  // with round-trip precision.
  std::string to_csv() const;
  static ResultTable from_csv(const std::string& text);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::pair<std::string, std::string>> metadata_;
};

}  // namespace hsie
