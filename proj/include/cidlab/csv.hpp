#pragma once

#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cidlab {

// Minimal comma-separated reader for the numeric/id schemas this project
// uses. No quoting or embedded commas; fields are trimmed of surrounding
// spaces. Parse failures carry 1-based row numbers.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path);

  const std::vector<std::string>& header() const { return header_; }
  // Column position, or -1 when absent.
  int column(const std::string& name) const;
  // Column position, DataError when absent.
  int require_column(const std::string& name) const;

  // Reads the next data row into `fields`; false at EOF. Blank lines are
  // skipped. Row width must match the header.
  bool next_row(std::vector<std::string>& fields);

  // 1-based line number of the row most recently returned.
  size_t row_number() const { return row_number_; }
  const std::string& path() const { return path_; }

  double parse_double(const std::string& field, const std::string& what) const;
  long long parse_int(const std::string& field, const std::string& what) const;

 private:
  std::string path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  size_t row_number_ = 0;
};

// Locale-free shortest round-trip formatting (std::to_chars).
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void write_row(const std::vector<std::string>& fields);
  void close();

 private:
  std::string path_;
  std::ofstream out_;
  size_t width_;
};

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace cidlab
