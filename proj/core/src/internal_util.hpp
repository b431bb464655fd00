#pragma once

// Shared helpers for the .cpp files; not installed.

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

namespace trafficsynth::detail {

// Shortest round-trip decimal form, locale independent.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

}  // namespace trafficsynth::detail
