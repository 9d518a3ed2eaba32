#include "credit/calendar.hpp"

#include <cstdio>

namespace credit {

std::string to_string(const YearMonth& ym) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", ym.year, ym.month);
    return buf;
}

std::string to_string(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

Date parse_date(const std::string& iso) {
    Date d;
    if (std::sscanf(iso.c_str(), "%d-%d-%d", &d.year, &d.month, &d.day) != 3)
        throw std::invalid_argument("bad date: " + iso);
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
        throw std::invalid_argument("date out of range: " + iso);
    return d;
}

YearMonth parse_year_month(const std::string& s) {
    YearMonth ym;
    if (std::sscanf(s.c_str(), "%d-%d", &ym.year, &ym.month) != 2)
        throw std::invalid_argument("bad year-month: " + s);
    if (ym.month < 1 || ym.month > 12)
        throw std::invalid_argument("year-month out of range: " + s);
    return ym;
}

}  // namespace credit
