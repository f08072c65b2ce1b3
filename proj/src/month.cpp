#include "cidlab/month.hpp"

#include <charconv>

namespace cidlab {

MonthId parse_period(const std::string& text) {
  if (text.size() == 6 && text.find('Q') == std::string::npos) {
    int v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc() && p == text.data() + text.size() && is_valid_month(v)) return v;
  }
  // YYYYQn
  auto q = text.find('Q');
  if (q == 4 && text.size() == 6) {
    int yr = 0, qq = 0;
    auto [p1, e1] = std::from_chars(text.data(), text.data() + 4, yr);
    auto [p2, e2] = std::from_chars(text.data() + 5, text.data() + 6, qq);
    if (e1 == std::errc() && e2 == std::errc() && qq >= 1 && qq <= 4)
      return make_month(yr, qq * 3);
  }
  throw std::invalid_argument("unparsable period '" + text + "' (want YYYYMM or YYYYQn)");
}

std::string format_month(MonthId m) {
  std::string s = std::to_string(m);
  if (m < 100000 && m > 0) s.insert(s.begin(), '0');  // keep YYYYMM width
  return s;
}

}  // namespace cidlab
