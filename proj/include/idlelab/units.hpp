#pragma once

#include <cstdint>
#include <string>

namespace idlelab {

// Event times and durations are integer nanoseconds internally; seconds
// (double) only at reporting boundaries, microseconds only in file formats.
using Nanos = std::int64_t;

inline constexpr double kNanosPerSecond = 1e9;
inline constexpr Nanos kNanosPerMicro = 1000;

double ns_to_s(Nanos ns);
Nanos s_to_ns(double seconds);

// Fixed-point microsecond text used by the CSV formats. Values print with
// up to three fractional digits (nanosecond resolution), trailing zeros
// trimmed, so format/parse round-trip exactly.
std::string format_us(Nanos ns);
// Accepts "12", "12.345", "+" and scientific notation rejected. Digits past
// the third fractional place round to the nearest nanosecond, half away
// from zero. Throws ParseError on anything else.
Nanos parse_us(const std::string& text);

// Duration flag values require a unit suffix: "100us", "2ms", "1.5s".
// Bare numbers are rejected. Returns seconds.
double parse_duration_s(const std::string& text);

// 6-significant-digit formatting used in every output document.
std::string format_sig6(double value);
// Value rounded to what format_sig6 would print (for JSON payloads).
double round_sig6(double value);

} // namespace idlelab
