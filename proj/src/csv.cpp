#include "qscat/csv.hpp"

#include <cstdio>
#include <stdexcept>

namespace qscat {

std::string format_sig(double value, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, int precision)
    : out_(path), precision_(precision) {
    if (!out_) throw std::runtime_error("csv: cannot open " + path);
}

void CsvWriter::metadata(const std::string& key, const std::string& value) {
    out_ << "# " << key << ": " << value << "\n";
}

void CsvWriter::header(const std::vector<std::string>& columns) {
    columns_ = columns.size();
    for (std::size_t i = 0; i < columns.size(); ++i)
        out_ << columns[i] << (i + 1 == columns.size() ? "\n" : ",");
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (columns_ != 0 && cells.size() != columns_)
        throw std::logic_error("csv: row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i)
        out_ << cells[i] << (i + 1 == cells.size() ? "\n" : ",");
}

void CsvWriter::row_values(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_sig(v, precision_));
    row(cells);
}

}  // namespace qscat
