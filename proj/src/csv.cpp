#include "kld/csv.hpp"

#include <cmath>
#include <stdexcept>

namespace kld {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";  // folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
  file_ = std::fopen(path.string().c_str(), "wb");
  if (!file_) throw std::runtime_error("cannot write " + path.string());
  std::string h;
  for (std::size_t k = 0; k < header.size(); ++k) h += (k ? "," : "") + header[k];
  line(h);
}

CsvWriter::~CsvWriter() {
  if (file_) std::fclose(file_);
}

void CsvWriter::line(const std::string& text) {
  if (!file_) throw std::runtime_error("write to closed file " + path_.string());
  if (std::fputs(text.c_str(), file_) < 0 || std::fputc('\n', file_) == EOF)
    throw std::runtime_error("write failed for " + path_.string());
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw std::logic_error("row width does not match header of " + path_.string());
  std::string s;
  for (std::size_t k = 0; k < values.size(); ++k) s += (k ? "," : "") + format_number(values[k]);
  line(s);
}

void CsvWriter::labelled(const std::string& label, double value) {
  if (columns_ != 2) throw std::logic_error("labelled rows need two columns");
  line(label + "," + format_number(value));
}

void CsvWriter::close() {
  if (file_ && std::fclose(file_) != 0) {
    file_ = nullptr;
    throw std::runtime_error("close failed for " + path_.string());
  }
  file_ = nullptr;
}

}  // namespace kld
