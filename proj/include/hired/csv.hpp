#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hired::csv {

/// Splits one CSV line on commas. Surrounding whitespace and a trailing '\r'
/// are trimmed from each field; double-quoted fields may contain commas.
std::vector<std::string> split_line(std::string_view line);

/// Parses a numeric cell. Empty cells and NaN spellings return quiet NaN;
/// anything else unparseable returns false.
bool parse_number(const std::string& cell, double& out);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace hired::csv
