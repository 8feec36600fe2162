#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mwspill::csv {

// Header-indexed CSV table. Fields may be double-quoted; no embedded newlines.
class Table {
public:
    static Table read_file(const std::string& path);
    static Table parse(std::string_view text, std::string source = "<memory>");

    const std::vector<std::string>& header() const { return header_; }
    std::size_t rows() const { return rows_.size(); }
    const std::string& source() const { return source_; }

    bool has_column(std::string_view name) const;
    std::size_t column(std::string_view name) const;  // throws schema error when absent
    void require_columns(const std::vector<std::string>& names) const;

    const std::string& at(std::size_t row, std::size_t col) const { return rows_[row][col]; }
    double number(std::size_t row, std::size_t col) const;
    // Empty field or "NA" maps to nullopt.
    std::optional<double> optional_number(std::size_t row, std::size_t col) const;
    long long integer(std::size_t row, std::size_t col) const;

    // File line number of a data row (header is line 1).
    std::size_t line_of(std::size_t row) const { return row + 2; }

private:
    std::string source_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// Shortest decimal representation that parses back to the identical double.
std::string format_double(double value);

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

}  // namespace mwspill::csv
