#include "flam/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "flam/errors.hpp"

namespace flam::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == name) return c;
    }
    throw DataError("column '" + name + "' not found");
}

bool Table::has_column(const std::string& name) const {
    for (const auto& h : header) {
        if (h == name) return true;
    }
    return false;
}

Table read(std::istream& in, const std::string& source) {
    Table table;
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    for (const auto& cell : split(line)) table.header.push_back(trim(cell));
    if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty())) {
        throw DataError(source + ": empty header row");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != table.header.size()) {
            throw DataError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(table.header.size()));
        }
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string text = trim(cells[c]);
            const char* begin = text.data();
            const char* end = begin + text.size();
            if (!text.empty() && *begin == '+') ++begin;
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(begin, end, value);
            if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
                throw DataError(source + ": line " + std::to_string(line_no) + ", column '" + table.header[c] +
                                "': " + (text.empty() ? std::string("missing value") : "cannot parse '" + text + "'"));
            }
            row[c] = value;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return read(in, path);
}

std::string format_number(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw NumericFailure("format_number: conversion failed");
    return std::string(buf, ptr);
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (c > 0) out << ',';
        out << cells[c];
    }
    out << '\n';
}

void write_row(std::ostream& out, const std::vector<double>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (c > 0) out << ',';
        out << format_number(cells[c]);
    }
    out << '\n';
}

Matrix to_matrix(const Table& table, const std::vector<std::string>& columns) {
    std::vector<std::string> missing;
    std::vector<std::size_t> index;
    for (const auto& name : columns) {
        if (table.has_column(name)) {
            index.push_back(table.column(name));
        } else {
            missing.push_back(name);
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw DataError("missing columns: " + list);
    }
    Matrix X(static_cast<Index>(table.rows.size()), static_cast<Index>(columns.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c < index.size(); ++c) {
            X(static_cast<Index>(r), static_cast<Index>(c)) = table.rows[r][index[c]];
        }
    }
    return X;
}

Dataset to_dataset(const Table& table, const std::string& response, const std::vector<std::string>& features) {
    const std::size_t yc = table.column(response);
    Vector y(static_cast<Index>(table.rows.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) y[static_cast<Index>(r)] = table.rows[r][yc];
    return Dataset(std::move(y), to_matrix(table, features));
}

}  // namespace flam::csv
