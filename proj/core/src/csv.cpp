#include "sppca/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sppca/errors.hpp"

namespace sppca {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end) return false;
    return std::isfinite(out);
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("read_csv: cannot open " + path);

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) throw ParseError("read_csv: empty file " + path, 1, 1);

    CsvTable table;
    std::size_t first_data = 0;
    const std::vector<std::string> head = split_fields(lines[0]);
    double tmp;
    for (const std::string& f : head) {
        if (!parse_double(f, tmp)) {
            table.had_header = true;
            table.header = head;
            first_data = 1;
            break;
        }
    }

    const std::size_t n_cols = head.size();
    const std::size_t n_rows = lines.size() - first_data;
    if (n_rows == 0) throw ParseError("read_csv: no data rows in " + path, 1, 1);

    table.values = DenseMatrix(n_rows, n_cols);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t line_no = first_data + r + 1;  // 1-based
        const std::vector<std::string> fields = split_fields(lines[first_data + r]);
        if (fields.size() != n_cols)
            throw ParseError("read_csv: line " + std::to_string(line_no) + " has " +
                                 std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(n_cols),
                             line_no, 1);
        for (std::size_t c = 0; c < n_cols; ++c) {
            double v;
            if (!parse_double(fields[c], v))
                throw ParseError("read_csv: line " + std::to_string(line_no) +
                                     ", field " + std::to_string(c + 1) +
                                     ": cannot parse '" + fields[c] + "'",
                                 line_no, c + 1);
            table.values(r, c) = v;
        }
    }
    return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const DenseMatrix& values) {
    std::ofstream out(path);
    if (!out) throw Error("write_csv: cannot open " + path);
    if (!header.empty()) {
        if (header.size() != values.cols)
            throw DimensionMismatch("write_csv: header size differs from column count");
        for (std::size_t c = 0; c < header.size(); ++c)
            out << header[c] << (c + 1 == header.size() ? "\n" : ",");
    }
    char buf[40];
    for (std::size_t r = 0; r < values.rows; ++r) {
        for (std::size_t c = 0; c < values.cols; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", values(r, c));
            out << buf << (c + 1 == values.cols ? "\n" : ",");
        }
    }
    if (!out) throw Error("write_csv: write failed for " + path);
}

}  // namespace sppca
