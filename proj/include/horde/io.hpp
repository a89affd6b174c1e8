#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace horde::io {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double x);
void append_double(std::string& out, double x);

// Full-match parse; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);
std::optional<std::uint64_t> parse_uint(std::string_view s);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string_view trim(std::string_view s);

}  // namespace horde::io
