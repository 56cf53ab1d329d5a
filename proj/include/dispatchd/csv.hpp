#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dispatchd::csv {

// Raised on malformed input; carries the 1-based line number.
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Splits one line on commas. No quoting support; our formats never need it.
std::vector<std::string> split_fields(const std::string& line);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Reads a whole CSV file. The first line is treated as the header and must
// match `expected_header` exactly when non-empty.
Table read_file(const std::string& path, const std::vector<std::string>& expected_header);

long long parse_int(const std::string& path, std::size_t line, const std::string& field);
double parse_double(const std::string& path, std::size_t line, const std::string& field);

// Formats a double with enough digits to round-trip the slot ledger (the
// state CSV contract asks for >= 9 significant digits).
std::string format_double(double v);

} // namespace dispatchd::csv
