#include "mup/text.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

#include "mup/error.hpp"

namespace mup {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

std::string format_fixed(double x, int digits) {
  if (!std::isfinite(x)) return format_number(x);
  std::array<char, 128> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::fixed, digits);
  return std::string(buf.data(), res.ptr);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double parse_double(std::string_view s) {
  const auto t = trim(s);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw InvalidArgument("not a number: '" + std::string(s) + "'");
  return value;
}

long long parse_int(std::string_view s) {
  const auto t = trim(s);
  long long value = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw InvalidArgument("not an integer: '" + std::string(s) + "'");
  return value;
}

}  // namespace mup
