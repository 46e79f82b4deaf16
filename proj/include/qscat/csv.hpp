// csv.hpp — CSV emission with '#'-prefixed metadata lines and a fixed
// significant-digit format chosen so re-reading reproduces the doubles.

#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace qscat {

std::string format_sig(double value, int precision = 17);

class CsvWriter {
  public:
    CsvWriter(const std::string& path, int precision = 17);

    void metadata(const std::string& key, const std::string& value);
    void header(const std::vector<std::string>& columns);
    void row(const std::vector<std::string>& cells);
    void row_values(const std::vector<double>& values);

    std::string cell(double value) const { return format_sig(value, precision_); }

  private:
    std::ofstream out_;
    int precision_;
    std::size_t columns_ = 0;
};

}  // namespace qscat
