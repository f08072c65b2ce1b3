#include "cidlab/industry.hpp"

#include <algorithm>
#include <set>

#include "cidlab/csv.hpp"
#include "cidlab/errors.hpp"

namespace cidlab {

IndustryScheme::IndustryScheme(std::string name, std::vector<SicRange> ranges)
    : name_(std::move(name)), ranges_(std::move(ranges)) {
  std::sort(ranges_.begin(), ranges_.end(),
            [](const SicRange& a, const SicRange& b) { return a.sic_low < b.sic_low; });
  std::set<int> codes;
  for (size_t i = 0; i < ranges_.size(); ++i) {
    const auto& r = ranges_[i];
    if (r.sic_low > r.sic_high || r.sic_low < 0 || r.sic_high > 9999)
      throw DataError("scheme '" + name_ + "': bad SIC range " + std::to_string(r.sic_low) +
                      "-" + std::to_string(r.sic_high));
    if (i > 0 && r.sic_low <= ranges_[i - 1].sic_high)
      throw DataError("scheme '" + name_ + "': overlapping SIC ranges at " +
                      std::to_string(r.sic_low));
    if (r.industry_code < 1)
      throw DataError("scheme '" + name_ + "': industry codes must be positive");
    codes.insert(r.industry_code);
  }
  num_industries_ = codes.empty() ? 0 : *codes.rbegin();
}

IndustryScheme IndustryScheme::sic_digits(int digits) {
  if (digits < 1 || digits > 4) throw ConfigError("SIC truncation digits must be 1..4");
  IndustryScheme s("SIC" + std::to_string(digits), {});
  s.truncate_digits_ = digits;
  int div = 1;
  for (int i = digits; i < 4; ++i) div *= 10;
  s.num_industries_ = 10000 / div;
  return s;
}

IndustryScheme IndustryScheme::load(const std::string& path_or_name) {
  if (path_or_name.size() == 4 && path_or_name.rfind("SIC", 0) == 0 &&
      path_or_name[3] >= '1' && path_or_name[3] <= '4')
    return sic_digits(path_or_name[3] - '0');

  CsvReader csv(path_or_name);
  const int c_lo = csv.require_column("sic_low");
  const int c_hi = csv.require_column("sic_high");
  const int c_code = csv.require_column("industry_code");
  const int c_name = csv.column("industry_name");
  std::vector<SicRange> ranges;
  std::vector<std::string> f;
  while (csv.next_row(f)) {
    SicRange r;
    r.sic_low = static_cast<int>(csv.parse_int(f[static_cast<size_t>(c_lo)], "sic_low"));
    r.sic_high = static_cast<int>(csv.parse_int(f[static_cast<size_t>(c_hi)], "sic_high"));
    r.industry_code =
        static_cast<int>(csv.parse_int(f[static_cast<size_t>(c_code)], "industry_code"));
    if (c_name >= 0) r.industry_name = f[static_cast<size_t>(c_name)];
    ranges.push_back(r);
  }
  std::string name = path_or_name;
  auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  auto dot = name.find_last_of('.');
  if (dot != std::string::npos) name = name.substr(0, dot);
  return IndustryScheme(name, std::move(ranges));
}

int IndustryScheme::classify_sic(int sic) const {
  if (sic < 0 || sic > 9999) return kNoIndustry;
  if (truncate_digits_ > 0) {
    int div = 1;
    for (int i = truncate_digits_; i < 4; ++i) div *= 10;
    int code = sic / div;
    return code >= 1 ? code : kNoIndustry;  // leading-zero groups stay unmapped
  }
  // ranges_ sorted by sic_low and non-overlapping
  auto it = std::upper_bound(ranges_.begin(), ranges_.end(), sic,
                             [](int v, const SicRange& r) { return v < r.sic_low; });
  if (it == ranges_.begin()) return kNoIndustry;
  --it;
  return sic <= it->sic_high ? it->industry_code : kNoIndustry;
}

ReturnPanel classify(const ReturnPanel& panel, const IndustryScheme& scheme) {
  std::vector<StockObservation> obs = panel.observations();
  for (auto& o : obs) o.industry = scheme.classify_sic(o.sic);
  return ReturnPanel(panel.symbols(), std::move(obs));
}

}  // namespace cidlab
