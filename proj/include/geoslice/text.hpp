#pragma once

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "geoslice/errors.hpp"

namespace geoslice::text {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_plain_real(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(context + ": cannot parse number '" + s + "'");
  }
}

/// Reals with an optional multiple of pi: "1.5", "inf", "pi", "2pi", "pi/2", "0.5pi/3".
inline double parse_real(const std::string& raw, const std::string& context) {
  const std::string s = trim(raw);
  if (s == "inf" || s == "infinity") return INFINITY;
  const auto at = s.find("pi");
  if (at == std::string::npos) return parse_plain_real(s, context);
  double factor = 1.0;
  if (at > 0) {
    std::string head = s.substr(0, at);
    if (!head.empty() && head.back() == '*') head.pop_back();
    factor = parse_plain_real(head, context);
  }
  double divisor = 1.0;
  const std::string tail = s.substr(at + 2);
  if (!tail.empty()) {
    if (tail[0] != '/') throw InvalidArgument(context + ": cannot parse number '" + s + "'");
    divisor = parse_plain_real(tail.substr(1), context);
  }
  return factor * std::numbers::pi / divisor;
}

inline long long parse_int(const std::string& raw, const std::string& context) {
  const std::string s = trim(raw);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(context + ": cannot parse integer '" + s + "'");
  }
}

inline std::vector<double> parse_real_list(const std::string& s, const std::string& context) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_real(part, context));
  return out;
}

/// Shortest text that round-trips; used wherever output must be reproducible.
inline std::string exact(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out << std::setprecision(17) << v;
  const std::string full = out.str();
  for (int prec = 1; prec < 17; ++prec) {
    std::ostringstream shorter;
    shorter << std::setprecision(prec) << v;
    if (std::stod(shorter.str()) == v) return shorter.str();
  }
  return full;
}

/// Human-facing rendering with the given number of significant digits.
inline std::string fixed_digits(double v, int digits = 12) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out << std::setprecision(digits) << v;
  return out.str();
}

}  // namespace geoslice::text
