#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sgldlab {

/// Shortest text that round-trips the double; "nan"/"inf" spelled out.
std::string format_double(double v);

/// Column-ordered table written as CSV. Cells are preformatted strings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parse a CSV produced by CsvTable (no quoting). First line is the header.
CsvTable read_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace sgldlab
