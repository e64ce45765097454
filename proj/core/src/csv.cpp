#include "mfsc/csv.hpp"

#include <cstdio>
#include <stdexcept>

namespace mfsc {

std::string csv_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_fmt(int v) { return std::to_string(v); }
std::string csv_fmt(long long v) { return std::to_string(v); }
std::string csv_fmt(unsigned long long v) { return std::to_string(v); }

CsvFile::CsvFile(const std::string& path,
                 const std::vector<std::string>& header)
    : path_(path), out_(path), columns_(header.size()) {
  if (!out_) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  row(header);
}

void CsvFile::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw std::runtime_error("csv row width mismatch in " + path_);
  }
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

}  // namespace mfsc
