#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mup {

/// Shortest decimal that round-trips, independent of the C locale.
/// Non-finite values print as nan, inf, -inf.
std::string format_number(double x);
/// Fixed-point with `digits` decimals, locale independent.
std::string format_fixed(double x, int digits);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string to_lower(std::string_view s);

/// Strict parsers: the whole (trimmed) token must be consumed.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

}  // namespace mup
