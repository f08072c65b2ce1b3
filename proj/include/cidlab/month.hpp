#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cidlab {

// Months are encoded as year*100 + month (196307 = July 1963). Quarterly
// series reuse the encoding through their quarter-end month (196303 =
// 1963Q1). Daily panels use yyyymmdd ids; those only ever pass through the
// position-based time axis, never the calendar helpers below.
using MonthId = int32_t;

inline int year_of(MonthId m) { return m / 100; }
inline int month_of(MonthId m) { return m % 100; }

inline bool is_valid_month(MonthId m) {
  int mm = month_of(m);
  return m > 0 && mm >= 1 && mm <= 12;
}

inline MonthId make_month(int year, int month) {
  return static_cast<MonthId>(year * 100 + month);
}

inline MonthId next_month(MonthId m) {
  int mm = month_of(m);
  return mm == 12 ? make_month(year_of(m) + 1, 1) : m + 1;
}

inline MonthId prev_month(MonthId m) {
  int mm = month_of(m);
  return mm == 1 ? make_month(year_of(m) - 1, 12) : m - 1;
}

// Number of calendar months from a to b (b - a); negative when b < a.
inline int months_between(MonthId a, MonthId b) {
  return (year_of(b) - year_of(a)) * 12 + (month_of(b) - month_of(a));
}

inline MonthId add_months(MonthId m, int n) {
  int idx = year_of(m) * 12 + (month_of(m) - 1) + n;
  return make_month(idx / 12, idx % 12 + 1);
}

inline int quarter_of(MonthId m) { return (month_of(m) - 1) / 3 + 1; }

// Quarter-end month id of the quarter containing m.
inline MonthId quarter_end(MonthId m) {
  return make_month(year_of(m), quarter_of(m) * 3);
}

// Parses YYYYMM or YYYYQn ("1963Q1" -> 196303). Throws std::invalid_argument.
MonthId parse_period(const std::string& text);

std::string format_month(MonthId m);

}  // namespace cidlab
