#pragma once

#include <string>
#include <vector>

namespace credit {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 if absent
    int require_column(const std::string& name) const;
};

std::vector<std::string> split_csv_line(const std::string& line, char sep = ',');

CsvTable read_csv(const std::string& path, char sep = ',');

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows, char sep = ',');

std::string format_double(double v);  // round-trip-safe shortest form

}  // namespace credit
