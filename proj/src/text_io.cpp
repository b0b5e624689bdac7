#include "prism/text_io.hpp"

#include <charconv>
#include <cmath>

#include "prism/errors.hpp"

namespace prism {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

std::string format_real(double value)
{
    char buffer[32];
    const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) {
        throw Error("format_real: conversion failed");
    }
    return std::string(buffer, end);
}

void write_row(std::ostream& out, const std::vector<std::string>& cells)
{
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            out << ',';
        }
        out << cells[i];
    }
    out << '\n';
}

CsvReader::CsvReader(std::istream& in, std::string_view source_name)
    : in_(in), source_(source_name)
{
}

bool CsvReader::next(std::vector<std::string>& cells)
{
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (line_ == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3);
        }
        if (trim(line).empty()) {
            continue;
        }
        cells.clear();
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            cells.emplace_back(trim(rest.substr(0, comma)));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        return true;
    }
    return false;
}

std::string CsvReader::location() const
{
    return source_ + ": row " + std::to_string(line_);
}

double CsvReader::number(std::string_view cell, std::string_view column) const
{
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    if (!cell.empty() && cell.front() == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (cell.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw ParseError(location() + ", column " + std::string(column) + ": '" +
                         std::string(cell) + "' is not a finite number");
    }
    return value;
}

} // namespace prism
