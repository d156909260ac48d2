#pragma once

#include <stdexcept>
#include <string>

namespace ebmine {

// Calendar months are carried as a flat index year*12 + (month-1) so window
// arithmetic is plain integer arithmetic. Text form is YYYY-MM.
using Month = int;

inline Month make_month(int year, int month) {
    if (month < 1 || month > 12) throw std::invalid_argument("month out of range: " + std::to_string(month));
    return year * 12 + (month - 1);
}

inline int month_year(Month m) { return m >= 0 ? m / 12 : -((-m + 11) / 12); }
inline int month_of_year(Month m) { return m - month_year(m) * 12 + 1; }

Month parse_month(const std::string& text);
std::string format_month(Month m);

} // namespace ebmine
