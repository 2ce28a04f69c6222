#include "idlelab/units.hpp"

#include "idlelab/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace idlelab {

double ns_to_s(Nanos ns) {
    return static_cast<double>(ns) / kNanosPerSecond;
}

Nanos s_to_ns(double seconds) {
    return static_cast<Nanos>(std::llround(seconds * kNanosPerSecond));
}

std::string format_us(Nanos ns) {
    bool negative = ns < 0;
    std::uint64_t mag = negative ? static_cast<std::uint64_t>(-(ns + 1)) + 1
                                 : static_cast<std::uint64_t>(ns);
    std::uint64_t whole = mag / 1000;
    std::uint64_t frac = mag % 1000;
    char buf[40];
    if (frac == 0) {
        std::snprintf(buf, sizeof buf, "%s%llu", negative ? "-" : "",
                      static_cast<unsigned long long>(whole));
        return buf;
    }
    std::snprintf(buf, sizeof buf, "%s%llu.%03llu", negative ? "-" : "",
                  static_cast<unsigned long long>(whole),
                  static_cast<unsigned long long>(frac));
    std::string out = buf;
    while (out.back() == '0')
        out.pop_back();
    return out;
}

Nanos parse_us(const std::string& text) {
    if (text.empty())
        throw ParseError("empty duration field");
    std::size_t i = 0;
    bool any_digit = false;
    std::uint64_t whole = 0;
    for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
        any_digit = true;
        if (whole > (std::numeric_limits<std::uint64_t>::max() - 9) / 10)
            throw ParseError("duration out of range: '" + text + "'");
        whole = whole * 10 + static_cast<std::uint64_t>(text[i] - '0');
    }
    std::uint64_t frac_ns = 0;
    if (i < text.size() && text[i] == '.') {
        ++i;
        int digits = 0;
        std::uint64_t frac = 0;
        bool round_up = false;
        for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
            any_digit = true;
            if (digits < 3) {
                frac = frac * 10 + static_cast<std::uint64_t>(text[i] - '0');
                ++digits;
            } else if (digits == 3) {
                round_up = text[i] >= '5';
                ++digits;
            }
        }
        while (digits < 3) {
            frac *= 10;
            ++digits;
        }
        frac_ns = frac + (round_up ? 1 : 0);
    }
    if (!any_digit || i != text.size())
        throw ParseError("malformed microsecond value: '" + text + "'");
    if (whole > static_cast<std::uint64_t>(std::numeric_limits<Nanos>::max() / 1000 - 1))
        throw ParseError("duration out of range: '" + text + "'");
    return static_cast<Nanos>(whole * 1000 + frac_ns);
}

double parse_duration_s(const std::string& text) {
    std::size_t pos = text.size();
    while (pos > 0 && !std::isdigit(static_cast<unsigned char>(text[pos - 1])) &&
           text[pos - 1] != '.')
        --pos;
    std::string number = text.substr(0, pos);
    std::string suffix = text.substr(pos);
    double scale;
    if (suffix == "us")
        scale = 1e-6;
    else if (suffix == "ms")
        scale = 1e-3;
    else if (suffix == "s")
        scale = 1.0;
    else if (suffix.empty())
        throw ValidationError("duration '" + text +
                              "' is missing a unit suffix (us, ms, s)");
    else
        throw ValidationError("duration '" + text + "' has unknown unit '" +
                              suffix + "' (expected us, ms, s)");
    if (number.empty())
        throw ValidationError("duration '" + text + "' has no numeric value");
    char* end = nullptr;
    double value = std::strtod(number.c_str(), &end);
    if (end == nullptr || *end != '\0' || !(value >= 0) || !std::isfinite(value))
        throw ValidationError("duration '" + text + "' is not a valid number");
    return value * scale;
}

std::string format_sig6(double value) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

double round_sig6(double value) {
    if (!std::isfinite(value) || value == 0.0)
        return value;
    return std::strtod(format_sig6(value).c_str(), nullptr);
}

} // namespace idlelab
