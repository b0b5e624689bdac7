#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace prism {

/// Shortest decimal text that round-trips to the same double.
std::string format_real(double value);

/// Writes comma-separated cells followed by a newline.
void write_row(std::ostream& out, const std::vector<std::string>& cells);

/// Minimal comma-delimited reader (no quoting). Tracks the 1-based line number
/// so errors can cite "row N, column NAME".
class CsvReader {
public:
    CsvReader(std::istream& in, std::string_view source_name);

    /// Reads the next non-blank line; returns false at end of input.
    bool next(std::vector<std::string>& cells);

    /// "<source>: row N" for the most recently read line.
    std::string location() const;

    /// Parses a finite real; throws ParseError citing row and column on failure.
    double number(std::string_view cell, std::string_view column) const;

private:
    std::istream& in_;
    std::string source_;
    long long line_ = 0;
};

} // namespace prism
