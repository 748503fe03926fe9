#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "flam/core.hpp"

namespace flam::csv {

// Comma-separated, header row required, '.' decimal point, no quoting.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const;  // throws DataError when absent
    bool has_column(const std::string& name) const;
};

// Every cell must parse completely as a finite double. Errors name the
// 1-based line and the column header.
Table read(std::istream& in, const std::string& source = "input");
Table read_file(const std::string& path);

// Shortest text that parses back to the same double.
std::string format_number(double value);

void write_row(std::ostream& out, const std::vector<std::string>& cells);
void write_row(std::ostream& out, const std::vector<double>& cells);

// Pull `response` out as y and the listed columns (in order) as X.
Dataset to_dataset(const Table& table, const std::string& response, const std::vector<std::string>& features);
Matrix to_matrix(const Table& table, const std::vector<std::string>& columns);

}  // namespace flam::csv
