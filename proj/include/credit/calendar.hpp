#pragma once

#include <compare>
#include <stdexcept>
#include <string>

namespace credit {

struct Date {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31

    auto operator<=>(const Date&) const = default;
};

struct YearMonth {
    int year = 1970;
    int month = 1;

    auto operator<=>(const YearMonth&) const = default;
};

inline bool is_leap_year(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

inline int days_in_month(int year, int month) {
    static const int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month < 1 || month > 12) throw std::invalid_argument("month out of range");
    if (month == 2 && is_leap_year(year)) return 29;
    return lengths[month - 1];
}

// Days since 1970-01-01 (proleptic Gregorian), Hinnant's civil-days algorithm.
inline long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

inline long day_number(const Date& d) { return days_from_civil(d.year, d.month, d.day); }

inline int month_index(const YearMonth& ym) { return ym.year * 12 + (ym.month - 1); }

inline YearMonth year_month_from_index(int idx) {
    YearMonth ym;
    ym.year = idx >= 0 ? idx / 12 : (idx - 11) / 12;
    ym.month = idx - ym.year * 12 + 1;
    return ym;
}

inline YearMonth add_months(const YearMonth& ym, int delta) {
    return year_month_from_index(month_index(ym) + delta);
}

inline YearMonth year_month_of(const Date& d) { return {d.year, d.month}; }

std::string to_string(const YearMonth& ym);  // "2020-06"
std::string to_string(const Date& d);        // "2020-06-15"
Date parse_date(const std::string& iso);     // "2020-06-15"
YearMonth parse_year_month(const std::string& s);

// Pentad layout: days 1-5, 6-10, 11-15, 16-20, 21-25, 26-end of month.
// Returns the 0-based pentad index of a day-of-month.
inline int pentad_of_day(int day_of_month) {
    int p = (day_of_month - 1) / 5;
    return p > 5 ? 5 : p;
}

}  // namespace credit
