#include "mwspill/csv.hpp"

#include "mwspill/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mwspill::csv {

namespace {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string location(const Table& t, std::size_t row) {
    return t.source() + ":" + std::to_string(t.line_of(row));
}

}  // namespace

Table Table::read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

Table Table::parse(std::string_view text, std::string source) {
    Table t;
    t.source_ = std::move(source);
    std::size_t pos = 0;
    bool first = true;
    std::size_t line_no = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        pos = end + 1;
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        auto fields = split_line(line);
        if (first) {
            t.header_ = std::move(fields);
            first = false;
        } else {
            if (fields.size() != t.header_.size()) {
                throw Error("schema", t.source_ + ":" + std::to_string(line_no) + ": expected " +
                                          std::to_string(t.header_.size()) + " fields, found " +
                                          std::to_string(fields.size()));
            }
            t.rows_.push_back(std::move(fields));
        }
        if (end == text.size()) break;
    }
    if (first) throw Error("schema", t.source_ + ": missing header row");
    return t;
}

bool Table::has_column(std::string_view name) const {
    return std::find(header_.begin(), header_.end(), name) != header_.end();
}

std::size_t Table::column(std::string_view name) const {
    auto it = std::find(header_.begin(), header_.end(), name);
    if (it == header_.end()) {
        throw Error("schema", source_ + ": missing column '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - header_.begin());
}

void Table::require_columns(const std::vector<std::string>& names) const {
    for (const auto& n : names) column(n);
}

double Table::number(std::size_t row, std::size_t col) const {
    auto v = optional_number(row, col);
    if (!v) {
        throw Error("schema", location(*this, row) + ": missing value in column '" + header_[col] + "'");
    }
    return *v;
}

std::optional<double> Table::optional_number(std::size_t row, std::size_t col) const {
    const std::string& s = rows_[row][col];
    if (s.empty() || s == "NA") return std::nullopt;
    if (s == "inf" || s == "Inf") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw Error("schema", location(*this, row) + ": column '" + header_[col] +
                                  "' is not a number: '" + s + "'");
    }
    return v;
}

long long Table::integer(std::size_t row, std::size_t col) const {
    const std::string& s = rows_[row][col];
    long long v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw Error("schema", location(*this, row) + ": column '" + header_[col] +
                                  "' is not an integer: '" + s + "'");
    }
    return v;
}

std::string format_double(double value) {
    if (std::isnan(value)) return "NA";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, r.ptr);
}

void Writer::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        const auto& f = fields[i];
        if (f.find_first_of(",\"") != std::string::npos) {
            out_ << '"';
            for (char c : f) {
                if (c == '"') out_ << '"';
                out_ << c;
            }
            out_ << '"';
        } else {
            out_ << f;
        }
    }
    out_ << '\n';
}

}  // namespace mwspill::csv
