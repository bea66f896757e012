#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace perfsig {

using Duration = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Duration>;

namespace detail {

inline bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) {
        return false;
    }
    int value = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        const char c = s[i];
        if (c < '0' || c > '9') {
            return false;
        }
        value = value * 10 + (c - '0');
    }
    out = value;
    return true;
}

} // namespace detail

/// Parses `YYYY-MM-DDTHH:MM:SS[.fff...](Z|±HH:MM)`. Sub-millisecond digits are truncated.
inline std::optional<Timestamp> parse_rfc3339(std::string_view s) {
    using namespace std::chrono;
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    if (!detail::parse_fixed(s, 0, 4, year) || s.size() < 20 || s[4] != '-' ||
        !detail::parse_fixed(s, 5, 2, month) || s[7] != '-' || !detail::parse_fixed(s, 8, 2, day) ||
        (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || !detail::parse_fixed(s, 11, 2, hour) ||
        s[13] != ':' || !detail::parse_fixed(s, 14, 2, minute) || s[16] != ':' ||
        !detail::parse_fixed(s, 17, 2, second)) {
        return std::nullopt;
    }
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                             std::chrono::day{static_cast<unsigned>(day)}};
    // Leap seconds are not representable in sys_time.
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 59) {
        return std::nullopt;
    }

    std::size_t pos = 19;
    std::int64_t millis = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t digits = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            if (digits < 3) {
                millis = millis * 10 + (s[pos] - '0');
            }
            ++digits;
            ++pos;
        }
        if (digits == 0) {
            return std::nullopt;
        }
        for (std::size_t d = digits; d < 3; ++d) {
            millis *= 10;
        }
    }

    std::int64_t offset_minutes = 0;
    if (pos >= s.size()) {
        return std::nullopt;
    }
    if (s[pos] == 'Z' || s[pos] == 'z') {
        ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
        int oh = 0, om = 0;
        if (!detail::parse_fixed(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
            !detail::parse_fixed(s, pos + 4, 2, om) || oh > 23 || om > 59) {
            return std::nullopt;
        }
        offset_minutes = (s[pos] == '+' ? 1 : -1) * (oh * 60 + om);
        pos += 6;
    } else {
        return std::nullopt;
    }
    if (pos != s.size()) {
        return std::nullopt;
    }

    const auto local = sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second} + milliseconds{millis};
    return time_point_cast<Duration>(local - minutes{offset_minutes});
}

/// Parses a plain (optionally negative) integer count of epoch milliseconds.
inline std::optional<Timestamp> parse_epoch_ms(std::string_view s) {
    std::int64_t value = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end || s.empty()) {
        return std::nullopt;
    }
    return Timestamp{Duration{value}};
}

/// Formats as `YYYY-MM-DDTHH:MM:SS.mmmZ` (UTC).
inline std::string format_rfc3339(Timestamp t) {
    using namespace std::chrono;
    const auto day_point = floor<days>(t);
    const year_month_day ymd{day_point};
    const hh_mm_ss<Duration> tod{t - day_point};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()), static_cast<int>(tod.subseconds().count()));
    return buf;
}

inline std::int64_t epoch_ms(Timestamp t) {
    return t.time_since_epoch().count();
}

} // namespace perfsig
