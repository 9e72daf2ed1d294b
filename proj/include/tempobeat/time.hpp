#pragma once

#include <array>
#include <charconv>
#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "tempobeat/error.hpp"

namespace tempobeat {

/// Monday-first weekday numbering (Mon = 0 .. Sun = 6).
enum class Weekday : int { Mon = 0, Tue, Wed, Thu, Fri, Sat, Sun };

inline constexpr std::array<std::string_view, 7> kWeekdayNames{"Mon", "Tue", "Wed", "Thu",
                                                               "Fri", "Sat", "Sun"};

inline std::string_view to_string(Weekday w) { return kWeekdayNames[static_cast<int>(w)]; }

inline std::optional<Weekday> parse_weekday(std::string_view s) {
    for (int i = 0; i < 7; ++i) {
        if (kWeekdayNames[i] == s) {
            return static_cast<Weekday>(i);
        }
    }
    return std::nullopt;
}

/// Calendar date as a day count since 1970-01-01 (proleptic Gregorian).
struct CivilDate {
    std::int64_t days = 0;

    static CivilDate from_ymd(int y, unsigned m, unsigned d) {
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                              std::chrono::day{d}};
        if (!ymd.ok()) {
            throw Error(ErrorKind::ParseError, "invalid calendar date");
        }
        return CivilDate{std::chrono::sys_days{ymd}.time_since_epoch().count()};
    }

    [[nodiscard]] std::chrono::year_month_day ymd() const {
        return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days}}};
    }
    [[nodiscard]] int year() const { return static_cast<int>(ymd().year()); }
    [[nodiscard]] unsigned month() const { return static_cast<unsigned>(ymd().month()); }
    [[nodiscard]] unsigned day() const { return static_cast<unsigned>(ymd().day()); }

    [[nodiscard]] Weekday weekday() const {
        const std::chrono::weekday w{std::chrono::sys_days{std::chrono::days{days}}};
        return static_cast<Weekday>(w.iso_encoding() - 1);
    }

    [[nodiscard]] std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
        return buf;
    }

    auto operator<=>(const CivilDate&) const = default;
};

/// (year, month) pair; distinguishes May 2018 from May 2019.
struct MonthYear {
    int year = 1970;
    unsigned month = 1;

    [[nodiscard]] std::int64_t index() const { return std::int64_t{year} * 12 + (month - 1); }
    [[nodiscard]] std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u", year, month);
        return buf;
    }
    auto operator<=>(const MonthYear&) const = default;
};

/// An instant truncated to the hour, stored as whole hours since
/// 1970-01-01T00:00 in the dataset's fixed (naive) zone.
struct HourStamp {
    std::int64_t hours = 0;

    static HourStamp from_civil(CivilDate date, int hour) {
        return HourStamp{date.days * 24 + hour};
    }

    [[nodiscard]] CivilDate date() const {
        return CivilDate{hours >= 0 ? hours / 24 : (hours - 23) / 24};
    }
    [[nodiscard]] int hour_of_day() const {
        return static_cast<int>(hours - date().days * 24);
    }

    [[nodiscard]] std::string to_string() const {
        char buf[8];
        std::snprintf(buf, sizeof buf, "T%02d:00", hour_of_day());
        return date().to_string() + buf;
    }

    HourStamp operator+(std::int64_t h) const { return HourStamp{hours + h}; }
    std::int64_t operator-(HourStamp other) const { return hours - other.hours; }
    auto operator<=>(const HourStamp&) const = default;
};

struct CalendarKey {
    int hour_of_day = 0;
    Weekday weekday = Weekday::Mon;
    CivilDate date;
    MonthYear month_year;

    bool operator==(const CalendarKey&) const = default;
};

inline CalendarKey calendar_key(HourStamp stamp) {
    const CivilDate date = stamp.date();
    return CalendarKey{stamp.hour_of_day(), date.weekday(), date, MonthYear{date.year(), date.month()}};
}

namespace detail {

inline bool parse_fixed_int(std::string_view s, int& out) {
    if (s.empty()) {
        return false;
    }
    for (char c : s) {
        if (c < '0' || c > '9') {
            return false;
        }
    }
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

} // namespace detail

/// Parses `YYYY-MM-DD`.
inline CivilDate parse_date(std::string_view s, std::size_t line = 0) {
    int y = 0;
    int m = 0;
    int d = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !detail::parse_fixed_int(s.substr(0, 4), y) ||
        !detail::parse_fixed_int(s.substr(5, 2), m) || !detail::parse_fixed_int(s.substr(8, 2), d)) {
        throw Error(ErrorKind::ParseError, "malformed date '" + std::string(s) + "'", line);
    }
    try {
        return CivilDate::from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
    } catch (const Error&) {
        throw Error(ErrorKind::ParseError, "invalid date '" + std::string(s) + "'", line);
    }
}

/// Parses `YYYY-MM-DDTHH:MM[:SS]` (a space may replace `T`). Minutes and
/// seconds must be zero.
inline HourStamp parse_hour_stamp(std::string_view s, std::size_t line = 0) {
    if (s.size() != 16 && s.size() != 19) {
        throw Error(ErrorKind::ParseError, "malformed timestamp '" + std::string(s) + "'", line);
    }
    if (s[10] != 'T' && s[10] != ' ') {
        throw Error(ErrorKind::ParseError, "malformed timestamp '" + std::string(s) + "'", line);
    }
    const CivilDate date = parse_date(s.substr(0, 10), line);
    int hh = 0;
    int mm = 0;
    int ss = 0;
    bool ok = s[13] == ':' && detail::parse_fixed_int(s.substr(11, 2), hh) &&
              detail::parse_fixed_int(s.substr(14, 2), mm);
    if (ok && s.size() == 19) {
        ok = s[16] == ':' && detail::parse_fixed_int(s.substr(17, 2), ss);
    }
    if (!ok || hh > 23 || mm > 59 || ss > 59) {
        throw Error(ErrorKind::ParseError, "malformed timestamp '" + std::string(s) + "'", line);
    }
    if (mm != 0 || ss != 0) {
        throw Error(ErrorKind::NonHourStamp, "timestamp '" + std::string(s) + "' is not on the hour",
                    line);
    }
    return HourStamp::from_civil(date, hh);
}

} // namespace tempobeat
