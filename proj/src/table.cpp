#include "hsie/table.hpp"

#include <charconv>
#include <stdexcept>
#include <system_error>

namespace hsie {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("table: bad numeric field '" + s + "'");
  return v;
}

std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

ResultTable::ResultTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw std::invalid_argument("table: need at least one column");
}

void ResultTable::set_meta(const std::string& key, const std::string& value) {
  for (auto& kv : metadata_)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  metadata_.emplace_back(key, value);
}

void ResultTable::add_row(const std::vector<double>& row) {
  if (row.size() != columns_.size())
    throw std::invalid_argument("table: row width " + std::to_string(row.size()) +
                                " != column count " + std::to_string(columns_.size()));
  rows_.push_back(row);
}

std::size_t ResultTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return i;
  throw std::out_of_range("table: no column '" + name + "'");
}

double ResultTable::at(std::size_t row, const std::string& name) const {
  return rows_.at(row).at(column(name));
}

std::string ResultTable::to_csv() const {
  std::string out;
  for (const auto& kv : metadata_) out += "# " + kv.first + ": " + kv.second + "\n";
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out += ',';
    out += columns_[i];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

ResultTable ResultTable::from_csv(const std::string& text) {
  ResultTable t;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::size_t sep = line.find(": ");
      if (sep == std::string::npos || sep < 2)
        throw std::runtime_error("table: bad metadata line '" + line + "'");
      t.metadata_.emplace_back(line.substr(2, sep - 2), line.substr(sep + 2));
      continue;
    }
    if (!have_header) {
      t.columns_ = split_record(line);
      have_header = true;
      continue;
    }
    const std::vector<std::string> fields = split_record(line);
    if (fields.size() != t.columns_.size())
      throw std::runtime_error("table: ragged record '" + line + "'");
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) row[i] = parse_double(fields[i]);
    t.rows_.push_back(std::move(row));
  }
  if (!have_header) throw std::runtime_error("table: missing header row");
  return t;
}

}  // namespace hsie
