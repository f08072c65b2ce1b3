#include "cidlab/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "cidlab/errors.hpp"

namespace cidlab {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

CsvReader::CsvReader(const std::string& path) : path_(path), in_(path) {
  if (!in_) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in_, line)) throw DataError("'" + path + "': empty file, header expected");
  header_ = split_csv_line(line);
  row_number_ = 1;
  for (const auto& h : header_)
    if (h.empty()) throw DataError("'" + path + "': malformed header (empty column name)");
}

int CsvReader::column(const std::string& name) const {
  auto it = std::find(header_.begin(), header_.end(), name);
  return it == header_.end() ? -1 : static_cast<int>(it - header_.begin());
}

int CsvReader::require_column(const std::string& name) const {
  int c = column(name);
  if (c < 0) throw DataError("'" + path_ + "': missing required column '" + name + "'");
  return c;
}

bool CsvReader::next_row(std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in_, line)) {
    ++row_number_;
    if (trim(line).empty()) continue;
    fields = split_csv_line(line);
    if (fields.size() != header_.size())
      throw DataError("'" + path_ + "' row " + std::to_string(row_number_) + ": expected " +
                      std::to_string(header_.size()) + " fields, got " +
                      std::to_string(fields.size()));
    return true;
  }
  return false;
}

double CsvReader::parse_double(const std::string& field, const std::string& what) const {
  double v = 0.0;
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || p != field.data() + field.size() || !std::isfinite(v))
    throw DataError("'" + path_ + "' row " + std::to_string(row_number_) +
                    ": bad numeric value '" + field + "' for " + what);
  return v;
}

long long CsvReader::parse_int(const std::string& field, const std::string& what) const {
  long long v = 0;
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || p != field.data() + field.size())
    throw DataError("'" + path_ + "' row " + std::to_string(row_number_) +
                    ": bad integer value '" + field + "' for " + what);
  return v;
}

std::string format_double(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), out_(path), width_(header.size()) {
  if (!out_) throw DataError("cannot write '" + path + "'");
  for (size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
  if (fields.size() != width_)
    throw DataError("'" + path_ + "': row width " + std::to_string(fields.size()) +
                    " does not match header width " + std::to_string(width_));
  for (size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
  out_ << '\n';
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw DataError("write failed for '" + path_ + "'");
}

}  // namespace cidlab
