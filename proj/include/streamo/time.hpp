#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

#include "streamo/errors.hpp"

namespace streamo {

/// Half-open-by-convention temporal span in seconds. end_s > start_s always.
struct TimeInterval {
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }

  bool operator==(const TimeInterval& other) const {
    return start_s == other.start_s && end_s == other.end_s;
  }
};

inline TimeInterval make_interval(double start_s, double end_s) {
  if (!(std::isfinite(start_s) && std::isfinite(end_s)))
    throw NonRepresentable("interval bounds must be finite");
  if (start_s < 0.0) throw NonRepresentable("interval start must be >= 0");
  if (!(end_s > start_s))
    throw NonRepresentable("interval end must exceed start");
  return TimeInterval{start_s, end_s};
}

namespace detail {

// Accepts only the digit forms the marker grammar allows: INT or INT "." INT.
inline bool parse_seconds(std::string_view text, double* out) {
  if (text.empty()) return false;
  bool seen_dot = false;
  bool digit_before_dot = false;
  bool digit_after_dot = false;
  for (char c : text) {
    if (c == '.') {
      if (seen_dot) return false;
      seen_dot = true;
    } else if (c >= '0' && c <= '9') {
      (seen_dot ? digit_after_dot : digit_before_dot) = true;
    } else {
      return false;
    }
  }
  if (!digit_before_dot) return false;
  if (seen_dot && !digit_after_dot) return false;
  const auto result =
      std::from_chars(text.data(), text.data() + text.size(), *out);
  return result.ec == std::errc() && result.ptr == text.data() + text.size();
}

inline std::string format_seconds(double value) {
  if (value == std::floor(value) && value < 1e15) {
    return std::to_string(static_cast<long long>(value));
  }
  // Shortest round-trip decimal; the marker grammar forbids exponents, so
  // fall back to plain fixed notation for the rare magnitudes that need them.
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  std::string text(buf, ptr);
  if (text.find('e') == std::string::npos &&
      text.find('E') == std::string::npos) {
    return text;
  }
  std::snprintf(buf, sizeof(buf), "%.17f", value);
  text = buf;
  while (!text.empty() && text.back() == '0') text.pop_back();
  if (!text.empty() && text.back() == '.') text.pop_back();
  return text;
}

}  // namespace detail

/// Parses a temporal marker of shape "<Xs-Ys>" (X, Y non-negative integers
/// or decimals, Y > X). Anything else raises MalformedMarker.
inline TimeInterval parse_time_marker(std::string_view text) {
  const auto fail = [&](const char* why) -> TimeInterval {
    throw MalformedMarker(std::string(why) + " in \"" + std::string(text) +
                          "\"");
  };
  if (text.size() < 7) return fail("marker too short");
  if (text.front() != '<' || text.back() != '>') return fail("missing <>");
  std::string_view body = text.substr(1, text.size() - 2);
  const auto dash = body.find('-');
  if (dash == std::string_view::npos) return fail("missing '-'");
  std::string_view left = body.substr(0, dash);
  std::string_view right = body.substr(dash + 1);
  if (left.size() < 2 || left.back() != 's') return fail("missing 's'");
  if (right.size() < 2 || right.back() != 's') return fail("missing 's'");
  left.remove_suffix(1);
  right.remove_suffix(1);
  double start = 0.0, end = 0.0;
  if (!detail::parse_seconds(left, &start)) return fail("bad start seconds");
  if (!detail::parse_seconds(right, &end)) return fail("bad end seconds");
  if (!(end > start)) return fail("end must exceed start");
  return TimeInterval{start, end};
}

/// Formats an interval as "<Xs-Ys>". parse_time_marker(format_time_marker(x))
/// is the identity for every representable interval.
inline std::string format_time_marker(const TimeInterval& interval) {
  if (!(std::isfinite(interval.start_s) && std::isfinite(interval.end_s)))
    throw NonRepresentable("non-finite interval bound");
  if (interval.start_s < 0.0 || interval.end_s < 0.0)
    throw NonRepresentable("negative interval bound");
  if (!(interval.end_s > interval.start_s))
    throw NonRepresentable("zero or negative length interval");
  return "<" + detail::format_seconds(interval.start_s) + "s-" +
         detail::format_seconds(interval.end_s) + "s>";
}

}  // namespace streamo
