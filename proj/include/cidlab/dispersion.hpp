#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cidlab/econometrics.hpp"
#include "cidlab/industry.hpp"
#include "cidlab/panel.hpp"

namespace cidlab {

struct IndustryReturn {
  double vw_return = 0.0;  // weights from prior-month caps
  int firm_count = 0;      // classified firms with returns this month
};

// Value-weighted industry returns at one month. Firms lacking a prior-month
// cap count toward firm_count but not the weighted return; an industry
// where no firm has a prior cap is omitted.
std::map<int, IndustryReturn> industry_returns(const ReturnPanel& panel, MonthId month);

struct MonthDispersion {
  double cid = 0.0;
  double wid = 0.0;
  double csd = 0.0;
  int industries_used = 0;
  bool valid = false;  // false when no industry clears min_firms
};

enum class CsdWeighting {
  kNested,  // 1/N over industries, 1/M_j within: makes csd <= cid + wid exact
  kFlat,    // plain firm-equal mean absolute deviation
};

// CID: mean absolute deviation of industry vw returns from the market
// return, over industries with firm_count >= min_firms.
std::pair<double, int> compute_cid(const std::map<int, IndustryReturn>& industries,
                                   int min_firms, double market_return);

struct DispersionOptions {
  int min_firms = 10;
  CsdWeighting csd_weighting = CsdWeighting::kNested;
  // Market return per month; from the factor table or recomputed panel
  // vw return (see market_return_series below).
  // Abnormal mode replaces each industry's deviation with the residual of
  // a full-sample time-series regression of the industry vw return on the
  // given factor columns (CID only; WID/CSD stay raw).
  bool abnormal = false;
  std::vector<std::string> abnormal_factors;  // e.g. {MKT_RF,SMB,HML}
};

struct DispersionSeries {
  std::vector<MonthId> months;  // only months with a valid measure
  std::vector<double> cid;
  std::vector<double> wid;
  std::vector<double> csd;
  std::vector<int> industries_used;
  std::string scheme_name;
  DispersionOptions options;

  std::optional<size_t> index_of(MonthId m) const;
  std::vector<double> series(const std::string& which) const;  // "cid"|"wid"|"csd"
};

// One month, all three measures. market_return is in the same units as the
// panel returns (excess vs excess: the risk-free leg cancels inside the
// absolute deviations).
MonthDispersion dispersion_month(const ReturnPanel& panel, MonthId month,
                                 const DispersionOptions& options, double market_return);

enum class MarketSource { kFactor, kPanel };

// Market return per panel month: the factor table's MKT_RF or the panel's
// own prior-cap-weighted mean return.
std::vector<std::pair<MonthId, double>> market_return_series(
    const ReturnPanel& panel, const FactorTable& factors, MarketSource source);

// Per-month measures over the whole panel; months where every industry
// fails min_firms are absent (missing, not zero). `factors` is required
// only for abnormal mode.
DispersionSeries dispersion_series(const ReturnPanel& panel, const IndustryScheme& scheme,
                                   const DispersionOptions& options,
                                   const std::vector<std::pair<MonthId, double>>& market,
                                   const FactorTable* factors = nullptr);

void save_dispersion(const DispersionSeries& series, const std::string& path);

}  // namespace cidlab
