#pragma once

#include <charconv>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "stx/errors.hpp"

namespace stx {

// Proleptic Gregorian calendar date, ISO-8601 text form (YYYY-MM-DD).
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    static bool is_leap(int y) {
        return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    }

    static int days_in_month(int y, int m) {
        static const int len[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        if (m == 2 && is_leap(y)) return 29;
        return len[m - 1];
    }

    bool valid() const {
        return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
    }

    Date next() const {
        Date d = *this;
        if (++d.day > days_in_month(d.year, d.month)) {
            d.day = 1;
            if (++d.month > 12) {
                d.month = 1;
                ++d.year;
            }
        }
        return d;
    }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }
};

inline Date parse_date(std::string_view s) {
    Date d;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw ParseError("bad date '" + std::string(s) + "' (expected YYYY-MM-DD)");
    auto num = [&](int lo, int hi, int& out) {
        auto r = std::from_chars(s.data() + lo, s.data() + hi, out);
        if (r.ec != std::errc{} || r.ptr != s.data() + hi)
            throw ParseError("bad date '" + std::string(s) + "'");
    };
    num(0, 4, d.year);
    num(5, 7, d.month);
    num(8, 10, d.day);
    if (!d.valid()) throw ParseError("invalid calendar date '" + std::string(s) + "'");
    return d;
}

} // namespace stx
