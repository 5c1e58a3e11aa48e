// SPDX-License-Identifier: MIT
//
// Minimal CSV writing/reading with bit-stable number formatting: doubles
// are printed via to_chars (shortest round-trip form), so identical inputs
// produce identical bytes and a parse-back recovers identical values.
#pragma once

#include <charconv>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ganctl/common.hpp"

namespace ganctl {

inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw ConfigError("csv: cannot parse number '" + s + "'");
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) {
        // trim surrounding whitespace
        const auto b = cur.find_first_not_of(" \t\r");
        const auto e = cur.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline void write_csv_row(std::ostream& os, const std::vector<double>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << format_double(row[i]);
    }
    os << '\n';
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) os << ',';
        os << header[i];
    }
    os << '\n';
    for (const auto& row : rows) write_csv_row(os, row);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) return t;
    t.header = split_csv_line(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace ganctl
