#pragma once

// Deterministic CSV output: one header line, then rows of numbers printed
// with 17 significant digits.

#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

namespace kld {

std::string format_number(double value);

class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);
  void row(std::initializer_list<double> values) { row(std::vector<double>(values)); }
  /// A row whose first cell is text, e.g. quantity,value tables.
  void labelled(const std::string& label, double value);
  void close();

private:
  void line(const std::string& text);

  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::size_t columns_;
};

}  // namespace kld
