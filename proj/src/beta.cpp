#include "cidlab/beta.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "cidlab/csv.hpp"
#include "cidlab/errors.hpp"

namespace cidlab {

namespace {

constexpr double kVarianceFloor = 1e-18;

// Slope of r on u over paired points, centered sums. Returns false when the
// regressor has no variance.
bool window_slope(const std::vector<double>& u, const std::vector<double>& r, double* beta) {
  const size_t n = u.size();
  double mu = 0, mr = 0;
  for (size_t i = 0; i < n; ++i) {
    mu += u[i];
    mr += r[i];
  }
  mu /= n;
  mr /= n;
  double suu = 0, sur = 0;
  for (size_t i = 0; i < n; ++i) {
    suu += (u[i] - mu) * (u[i] - mu);
    sur += (u[i] - mu) * (r[i] - mr);
  }
  if (suu < kVarianceFloor) return false;
  *beta = sur / suu;
  return true;
}

// Two-regressor slope (innovation + market control) via the 2x2 normal
// equations on centered data; small and exact enough at window sizes.
bool window_slope_controlled(const std::vector<double>& u, const std::vector<double>& mkt,
                             const std::vector<double>& r, double* beta) {
  const size_t n = u.size();
  double mu = 0, mm = 0, mr = 0;
  for (size_t i = 0; i < n; ++i) {
    mu += u[i];
    mm += mkt[i];
    mr += r[i];
  }
  mu /= n;
  mm /= n;
  mr /= n;
  double suu = 0, smm = 0, sum = 0, sur = 0, smr = 0;
  for (size_t i = 0; i < n; ++i) {
    const double du = u[i] - mu, dm = mkt[i] - mm, dr = r[i] - mr;
    suu += du * du;
    smm += dm * dm;
    sum += du * dm;
    sur += du * dr;
    smr += dm * dr;
  }
  const double det = suu * smm - sum * sum;
  if (det < kVarianceFloor || suu < kVarianceFloor) return false;
  *beta = (smm * sur - sum * smr) / det;
  return true;
}

}  // namespace

BetaPanel rolling_betas(const ReturnPanel& panel, const InnovationSeries& innovations,
                        const BetaConfig& config, const FactorTable* factors) {
  if (config.window < config.min_obs || config.min_obs < 3)
    throw ConfigError("rolling betas need window >= min_obs >= 3");
  if (config.market_control && (factors == nullptr || !factors->has("MKT_RF")))
    throw ConfigError("market control needs a factor table with MKT_RF");

  // Innovation (and optional market) lookup on the panel's month axis.
  const auto& months = panel.months();
  std::unordered_map<MonthId, size_t> month_pos;
  for (size_t i = 0; i < months.size(); ++i) month_pos[months[i]] = i;
  std::vector<double> innov(months.size(), 0.0);
  std::vector<char> has_innov(months.size(), 0);
  for (size_t i = 0; i < innovations.months.size(); ++i) {
    auto it = month_pos.find(innovations.months[i]);
    if (it == month_pos.end()) continue;
    innov[it->second] = innovations.values[i];
    has_innov[it->second] = 1;
  }
  std::vector<double> mkt(months.size(), 0.0);
  std::vector<char> has_mkt(months.size(), 0);
  if (config.market_control) {
    for (size_t i = 0; i < months.size(); ++i) {
      auto v = factors->at("MKT_RF", months[i]);
      if (v) {
        mkt[i] = *v;
        has_mkt[i] = 1;
      }
    }
  }

  BetaPanel out;
  out.config = config;
  std::map<MonthId, std::vector<BetaEntry>> by_month;

  const auto& obs = panel.observations();
  const int32_t n_stocks = static_cast<int32_t>(panel.symbols().size());
  std::vector<double> u, r, mk;
  for (int32_t stock = 0; stock < n_stocks; ++stock) {
    auto [b, e] = panel.stock_span(stock);
    if (b == e) continue;
    // Positions of this stock's observations on the month axis.
    std::vector<std::pair<size_t, double>> points;
    points.reserve(static_cast<size_t>(e - b));
    for (int64_t i = b; i < e; ++i)
      points.emplace_back(month_pos[obs[static_cast<size_t>(i)].month],
                          obs[static_cast<size_t>(i)].excess_return);

    size_t lo = 0;
    for (size_t hi = 0; hi < points.size(); ++hi) {
      const size_t end_pos = points[hi].first;
      // Formation month = months[end_pos]; window covers the previous
      // `window` calendar months inclusive.
      const size_t start_pos =
          end_pos + 1 >= static_cast<size_t>(config.window) ? end_pos + 1 - config.window : 0;
      while (points[lo].first < start_pos) ++lo;
      u.clear();
      r.clear();
      mk.clear();
      for (size_t k = lo; k <= hi; ++k) {
        const size_t pos = points[k].first;
        if (!has_innov[pos]) continue;
        if (config.market_control && !has_mkt[pos]) continue;
        u.push_back(innov[pos]);
        r.push_back(points[k].second);
        if (config.market_control) mk.push_back(mkt[pos]);
      }
      if (static_cast<int>(u.size()) < config.min_obs) continue;
      double beta = 0.0;
      bool ok = config.market_control ? window_slope_controlled(u, mk, r, &beta)
                                      : window_slope(u, r, &beta);
      if (!ok) {
        ++out.skipped_zero_variance;
        continue;
      }
      BetaEntry entry;
      entry.stock = stock;
      entry.month = months[end_pos];
      entry.beta = beta;
      entry.nobs = static_cast<int>(u.size());
      by_month[entry.month].push_back(entry);
    }
  }

  // Winsorize each formation month's cross-section, then flatten in
  // (month, stock) order.
  for (auto& [m, entries] : by_month) {
    std::sort(entries.begin(), entries.end(),
              [](const BetaEntry& a, const BetaEntry& b) { return a.stock < b.stock; });
    if (entries.size() >= 2 && (config.winsor_lo > 0.0 || config.winsor_hi < 1.0)) {
      std::vector<double> values(entries.size());
      for (size_t i = 0; i < entries.size(); ++i) values[i] = entries[i].beta;
      auto clamped = winsorize(values, config.winsor_lo, config.winsor_hi);
      for (size_t i = 0; i < entries.size(); ++i) entries[i].beta = clamped[i];
    }
    for (const auto& entry : entries) out.entries.push_back(entry);
  }
  return out;
}

std::pair<size_t, size_t> BetaPanel::month_span(MonthId m) const {
  auto lo = std::lower_bound(entries.begin(), entries.end(), m,
                             [](const BetaEntry& e, MonthId v) { return e.month < v; });
  auto hi = std::upper_bound(entries.begin(), entries.end(), m,
                             [](MonthId v, const BetaEntry& e) { return v < e.month; });
  return {static_cast<size_t>(lo - entries.begin()), static_cast<size_t>(hi - entries.begin())};
}

std::vector<MonthId> BetaPanel::months() const {
  std::vector<MonthId> out;
  for (const auto& e : entries)
    if (out.empty() || out.back() != e.month) out.push_back(e.month);
  return out;
}

void save_betas(const BetaPanel& betas, const ReturnPanel& panel, const std::string& path) {
  CsvWriter out(path, {"stock_id", "month", "beta", "nobs"});
  for (const auto& e : betas.entries)
    out.write_row({panel.symbol(e.stock), format_month(e.month), format_double(e.beta),
                   std::to_string(e.nobs)});
  out.close();
}

BetaPanel load_betas(const std::string& path, const ReturnPanel& panel,
                     const BetaConfig& config) {
  CsvReader csv(path);
  const int c_id = csv.require_column("stock_id");
  const int c_month = csv.require_column("month");
  const int c_beta = csv.require_column("beta");
  const int c_nobs = csv.require_column("nobs");
  std::unordered_map<std::string, int32_t> index;
  for (int32_t i = 0; i < static_cast<int32_t>(panel.symbols().size()); ++i)
    index[panel.symbols()[static_cast<size_t>(i)]] = i;
  BetaPanel out;
  out.config = config;
  std::vector<std::string> f;
  while (csv.next_row(f)) {
    auto it = index.find(f[static_cast<size_t>(c_id)]);
    if (it == index.end())
      throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                      ": stock '" + f[static_cast<size_t>(c_id)] + "' not in panel");
    BetaEntry e;
    e.stock = it->second;
    e.month = static_cast<MonthId>(csv.parse_int(f[static_cast<size_t>(c_month)], "month"));
    e.beta = csv.parse_double(f[static_cast<size_t>(c_beta)], "beta");
    e.nobs = static_cast<int>(csv.parse_int(f[static_cast<size_t>(c_nobs)], "nobs"));
    out.entries.push_back(e);
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const BetaEntry& a, const BetaEntry& b) {
    return a.month != b.month ? a.month < b.month : a.stock < b.stock;
  });
  return out;
}

double post_ranking_beta(const std::vector<MonthId>& months,
                         const std::vector<double>& returns,
                         const InnovationSeries& innovations) {
  std::vector<double> u, r;
  for (size_t i = 0; i < months.size(); ++i) {
    auto v = innovations.at(months[i]);
    if (!v) continue;
    u.push_back(*v);
    r.push_back(returns[i]);
  }
  if (u.size() < 4) throw DataError("post-ranking beta: too few overlapping months");
  double beta = 0.0;
  if (!window_slope(u, r, &beta)) throw DataError("post-ranking beta: flat innovations");
  return beta;
}

}  // namespace cidlab
