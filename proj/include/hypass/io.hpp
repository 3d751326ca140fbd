#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hypass {

// Malformed or unreadable input files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace hypass
