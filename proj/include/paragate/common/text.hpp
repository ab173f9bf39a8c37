// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace paragate::text {

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// Splits on any run of spaces/tabs.
std::vector<std::string_view> split_ws(std::string_view line);
std::string_view trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

// Parses a full token as a double; returns false on trailing garbage.
bool parse_double(std::string_view token, double& out);
bool parse_size(std::string_view token, std::size_t& out);

/// Six significant digits, the fixed numeric format for parasitic files.
std::string format_g6(double v);
/// Shortest text that reads back to the same double.
std::string format_exact(double v);

}  // namespace paragate::text
