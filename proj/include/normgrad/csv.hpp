#pragma once

#include <string>
#include <vector>

namespace normgrad::csv {

// Shortest representation that parses back to exactly the same double, so
// write -> read -> write is byte-identical.
std::string format_double(double v);

// Inverse of format_double; accepts any from_chars-parsable double.
// Throws std::invalid_argument on malformed input.
double parse_double(const std::string& s);

std::vector<std::string> split_line(const std::string& line);

// Splits into lines on '\n', dropping a trailing empty line.
std::vector<std::string> split_lines(const std::string& text);

}  // namespace normgrad::csv
