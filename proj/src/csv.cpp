#include "dispatchd/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace dispatchd::csv {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

Table read_file(const std::string& path, const std::vector<std::string>& expected_header) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_fields(line);
        if (lineno == 1) {
            t.header = fields;
            if (!expected_header.empty() && fields != expected_header) {
                throw parse_error(path, lineno, "unexpected header");
            }
            continue;
        }
        if (!t.header.empty() && fields.size() != t.header.size()) {
            throw parse_error(path, lineno, "expected " + std::to_string(t.header.size()) +
                                                " fields, got " + std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

long long parse_int(const std::string& path, std::size_t line, const std::string& field) {
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(field.c_str(), &end, 10);
    if (errno != 0 || end == field.c_str() || *end != '\0') {
        throw parse_error(path, line, "bad integer '" + field + "'");
    }
    return v;
}

double parse_double(const std::string& path, std::size_t line, const std::string& field) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(field.c_str(), &end);
    if (errno != 0 || end == field.c_str() || *end != '\0') {
        throw parse_error(path, line, "bad number '" + field + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace dispatchd::csv
