#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace mfsc {

// Floating-point cell with 17 significant digits: round-trips doubles
// exactly, so repeated runs produce byte-identical files.
std::string csv_fmt(double v);
std::string csv_fmt(int v);
std::string csv_fmt(long long v);
std::string csv_fmt(unsigned long long v);

class CsvFile {
 public:
  CsvFile(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  size_t columns_ = 0;
};

}  // namespace mfsc
