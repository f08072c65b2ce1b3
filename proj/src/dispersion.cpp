#include "cidlab/dispersion.hpp"

#include <algorithm>
#include <cmath>

#include "cidlab/csv.hpp"
#include "cidlab/errors.hpp"

namespace cidlab {

std::map<int, IndustryReturn> industry_returns(const ReturnPanel& panel, MonthId month) {
  std::map<int, IndustryReturn> out;
  std::map<int, double> weight_sum, weighted_ret;
  const MonthId prev = prev_month(month);
  for (int64_t idx : panel.month_slice(month)) {
    const auto& o = panel.observations()[static_cast<size_t>(idx)];
    if (o.industry == kNoIndustry) continue;
    out[o.industry].firm_count += 1;
    const double cap = panel.cap_at(o.stock, prev);
    if (cap > 0) {
      weight_sum[o.industry] += cap;
      weighted_ret[o.industry] += cap * o.excess_return;
    }
  }
  for (auto it = out.begin(); it != out.end();) {
    auto w = weight_sum.find(it->first);
    if (w == weight_sum.end() || w->second <= 0) {
      it = out.erase(it);  // no weightable firm: industry absent this month
    } else {
      it->second.vw_return = weighted_ret[it->first] / w->second;
      ++it;
    }
  }
  return out;
}

std::pair<double, int> compute_cid(const std::map<int, IndustryReturn>& industries,
                                   int min_firms, double market_return) {
  if (min_firms < 1) throw DataError("compute_cid: min_firms must be >= 1");
  double sum = 0.0;
  int n = 0;
  for (const auto& [code, ind] : industries) {
    if (ind.firm_count < min_firms) continue;
    sum += std::abs(ind.vw_return - market_return);
    ++n;
  }
  return {n > 0 ? sum / n : 0.0, n};
}

MonthDispersion dispersion_month(const ReturnPanel& panel, MonthId month,
                                 const DispersionOptions& options, double market_return) {
  auto industries = industry_returns(panel, month);
  MonthDispersion d;
  auto [cid, n] = compute_cid(industries, options.min_firms, market_return);
  if (n == 0) return d;  // missing: no industry clears the filter
  d.cid = cid;
  d.industries_used = n;
  d.valid = true;

  // One pass over the month's stocks, accumulated per industry. The
  // within-industry and cross-sectional deviations share the
  // industry-equal outer weighting so that csd <= cid + wid is exact.
  std::map<int, std::pair<double, double>> dev;  // industry -> (|r - r_ind|, |r - mkt|)
  std::map<int, int> firm_counts;
  for (int64_t idx : panel.month_slice(month)) {
    const auto& o = panel.observations()[static_cast<size_t>(idx)];
    auto it = industries.find(o.industry);
    if (it == industries.end() || it->second.firm_count < options.min_firms) continue;
    auto& [d_ind, d_mkt] = dev[o.industry];
    d_ind += std::abs(o.excess_return - it->second.vw_return);
    d_mkt += std::abs(o.excess_return - market_return);
    firm_counts[o.industry] += 1;
  }
  double wid_sum = 0.0, csd_nested = 0.0, flat_sum = 0.0;
  int flat_count = 0;
  for (const auto& [code, sums] : dev) {
    const int m = firm_counts[code];
    wid_sum += sums.first / m;
    csd_nested += sums.second / m;
    flat_sum += sums.second;
    flat_count += m;
  }
  d.wid = wid_sum / n;
  d.csd = options.csd_weighting == CsdWeighting::kNested
              ? csd_nested / n
              : (flat_count > 0 ? flat_sum / flat_count : 0.0);
  return d;
}

std::vector<std::pair<MonthId, double>> market_return_series(
    const ReturnPanel& panel, const FactorTable& factors, MarketSource source) {
  std::vector<std::pair<MonthId, double>> out;
  if (source == MarketSource::kFactor) {
    if (!factors.has("MKT_RF")) throw DataError("market source 'factor' needs MKT_RF column");
    for (MonthId m : panel.months()) {
      auto v = factors.at("MKT_RF", m);
      if (v) out.emplace_back(m, *v);
    }
    return out;
  }
  for (MonthId m : panel.months()) {
    double wsum = 0.0, wret = 0.0;
    const MonthId prev = prev_month(m);
    for (int64_t idx : panel.month_slice(m)) {
      const auto& o = panel.observations()[static_cast<size_t>(idx)];
      const double cap = panel.cap_at(o.stock, prev);
      if (cap > 0) {
        wsum += cap;
        wret += cap * o.excess_return;
      }
    }
    if (wsum > 0) out.emplace_back(m, wret / wsum);
  }
  return out;
}

namespace {

// Abnormal-return mode: each industry's deviation becomes the residual of a
// full-sample regression of its vw return on the factor columns (intercept
// removed with the loadings, so a zero-loading industry reduces to its
// demeaned return series).
std::map<int, std::map<MonthId, double>> abnormal_residuals(
    const ReturnPanel& panel, const DispersionOptions& options, const FactorTable& factors) {
  std::map<int, std::vector<std::pair<MonthId, double>>> series;
  for (MonthId m : panel.months()) {
    for (const auto& [code, ind] : industry_returns(panel, m)) {
      if (ind.firm_count < options.min_firms) continue;
      series[code].emplace_back(m, ind.vw_return);
    }
  }
  const auto& cols = options.abnormal_factors;
  std::map<int, std::map<MonthId, double>> out;
  for (auto& [code, rows] : series) {
    std::vector<std::pair<MonthId, double>> usable;
    for (auto& [m, r] : rows) {
      bool ok = true;
      for (const auto& c : cols)
        if (!factors.at(c, m)) ok = false;
      if (ok) usable.emplace_back(m, r);
    }
    const Eigen::Index n = static_cast<Eigen::Index>(usable.size());
    if (n < static_cast<Eigen::Index>(cols.size()) + 4) continue;  // too short to residualize
    Eigen::VectorXd y(n);
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
      y(i) = usable[static_cast<size_t>(i)].second;
      for (size_t j = 0; j < cols.size(); ++j)
        x(i, static_cast<Eigen::Index>(j)) =
            *factors.at(cols[j], usable[static_cast<size_t>(i)].first);
    }
    RegressionResult fit = ols(y, x, true, cols);
    for (Eigen::Index i = 0; i < n; ++i)
      out[code][usable[static_cast<size_t>(i)].first] = fit.residuals(i);
  }
  return out;
}

}  // namespace

DispersionSeries dispersion_series(const ReturnPanel& panel, const IndustryScheme& scheme,
                                   const DispersionOptions& options,
                                   const std::vector<std::pair<MonthId, double>>& market,
                                   const FactorTable* factors) {
  DispersionSeries out;
  out.scheme_name = scheme.name();
  out.options = options;

  std::map<MonthId, double> market_at(market.begin(), market.end());

  std::map<int, std::map<MonthId, double>> residuals;
  if (options.abnormal) {
    if (factors == nullptr)
      throw ConfigError("abnormal dispersion mode needs a factor table");
    if (options.abnormal_factors.empty())
      throw ConfigError("abnormal dispersion mode needs at least one factor column");
    residuals = abnormal_residuals(panel, options, *factors);
  }

  for (MonthId m : panel.months()) {
    auto mk = market_at.find(m);
    if (mk == market_at.end()) continue;  // no market return: month unusable
    MonthDispersion d = dispersion_month(panel, m, options, mk->second);
    if (!d.valid) continue;
    if (options.abnormal) {
      // CID from residual deviations; WID/CSD stay raw.
      double sum = 0.0;
      int n = 0;
      for (const auto& [code, by_month] : residuals) {
        auto it = by_month.find(m);
        if (it == by_month.end()) continue;
        sum += std::abs(it->second);
        ++n;
      }
      if (n == 0) continue;
      d.cid = sum / n;
      d.industries_used = n;
    }
    out.months.push_back(m);
    out.cid.push_back(d.cid);
    out.wid.push_back(d.wid);
    out.csd.push_back(d.csd);
    out.industries_used.push_back(d.industries_used);
  }
  return out;
}

std::optional<size_t> DispersionSeries::index_of(MonthId m) const {
  auto it = std::lower_bound(months.begin(), months.end(), m);
  if (it == months.end() || *it != m) return std::nullopt;
  return static_cast<size_t>(it - months.begin());
}

std::vector<double> DispersionSeries::series(const std::string& which) const {
  if (which == "cid") return cid;
  if (which == "wid") return wid;
  if (which == "csd") return csd;
  throw DataError("unknown dispersion measure '" + which + "'");
}

void save_dispersion(const DispersionSeries& series, const std::string& path) {
  CsvWriter out(path, {"month", "cid", "wid", "csd", "n_industries"});
  for (size_t i = 0; i < series.months.size(); ++i) {
    out.write_row({format_month(series.months[i]), format_double(series.cid[i]),
                   format_double(series.wid[i]), format_double(series.csd[i]),
                   std::to_string(series.industries_used[i])});
  }
  out.close();
}

}  // namespace cidlab
