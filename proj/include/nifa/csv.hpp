#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "nifa/common.hpp"

namespace nifa {

struct CsvTable {
  std::vector<std::string> header;  // empty when the file had none
  Eigen::MatrixXd values;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view field, double& out) {
  field = trim(field);
  if (field.empty()) return false;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace detail

//! Reads a numeric CSV. A first row that fails to parse as numbers is
//! treated as the header. Ragged or non-numeric rows raise a validation
//! error naming the 1-based line.
inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    const auto fields = detail::split_fields(view);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!detail::parse_double(fields[i], row[i])) {
        numeric = false;
        break;
      }
    }
    if (first_content) {
      first_content = false;
      columns = fields.size();
      if (!numeric) {
        for (const auto f : fields) table.header.emplace_back(detail::trim(f));
        continue;
      }
    }
    if (!numeric)
      throw ValidationError(path.string() + " line " + std::to_string(line_no) +
                            ": non-numeric field");
    if (fields.size() != columns)
      throw ValidationError(path.string() + " line " + std::to_string(line_no) +
                            ": expected " + std::to_string(columns) + " fields, got " +
                            std::to_string(fields.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw ValidationError(path.string() + ": no data rows");
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(columns));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < columns; ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return table;
}

// 17 significant digits: enough for doubles to round-trip bit exactly.
inline std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

inline void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& values,
                      const std::vector<std::string>& header = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  if (!header.empty()) {
    if (static_cast<Eigen::Index>(header.size()) != values.cols())
      throw ValidationError("write_csv: header size does not match the columns");
    for (std::size_t i = 0; i < header.size(); ++i)
      out << (i ? "," : "") << header[i];
    out << '\n';
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

//! Feature matrix plus integer labels taken from the last column.
struct LabeledData {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

inline LabeledData split_labels(const CsvTable& table, const std::string& origin) {
  if (table.values.cols() < 2)
    throw ValidationError(origin + ": need at least one feature column plus the label");
  LabeledData out;
  out.features = table.values.leftCols(table.values.cols() - 1);
  out.labels.resize(static_cast<std::size_t>(table.values.rows()));
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    const double raw = table.values(i, table.values.cols() - 1);
    const int label = static_cast<int>(raw);
    if (static_cast<double>(label) != raw || label < 0)
      throw ValidationError(origin + ": labels must be integers 0..J-1 (row " +
                            std::to_string(i + 1) + ")");
    out.labels[static_cast<std::size_t>(i)] = label;
  }
  return out;
}

}  // namespace nifa
