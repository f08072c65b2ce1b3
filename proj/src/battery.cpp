#include "cidlab/battery.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cidlab/errors.hpp"

namespace cidlab {

ModelSpec ModelSpec::preset(const std::string& name) {
  if (name == "CAPM") return {name, {"MKT_RF"}};
  if (name == "FF3") return {name, {"MKT_RF", "SMB", "HML"}};
  if (name == "Carhart") return {name, {"MKT_RF", "SMB", "HML", "MOM"}};
  if (name == "FF5") return {name, {"MKT_RF", "SMB", "HML", "RMW", "CMA"}};
  if (name == "FF5_UMD_STR")
    return {name, {"MKT_RF", "SMB", "HML", "RMW", "CMA", "MOM", "STR"}};
  throw DataError("unknown factor model '" + name + "'");
}

void ModelSpec::validate_against(const FactorTable& factors) const {
  for (const auto& c : factor_columns)
    if (!factors.has(c))
      throw DataError("model " + name + " needs factor column '" + c +
                      "' absent from the factor table");
}

AlphaRow alpha_regression(const PortfolioSeries& portfolio, const ModelSpec& model,
                          const FactorTable& factors) {
  model.validate_against(factors);
  std::vector<double> y;
  std::vector<std::vector<double>> x(model.factor_columns.size());
  for (size_t i = 0; i < portfolio.months.size(); ++i) {
    const MonthId m = portfolio.months[i];
    bool ok = true;
    for (const auto& c : model.factor_columns)
      if (!factors.at(c, m)) ok = false;
    if (!ok) continue;
    y.push_back(portfolio.returns[i]);
    for (size_t j = 0; j < model.factor_columns.size(); ++j)
      x[j].push_back(*factors.at(model.factor_columns[j], m));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(y.size());
  const Eigen::Index k = static_cast<Eigen::Index>(model.factor_columns.size());
  if (n < k + 10)
    throw DataError("alpha regression for " + portfolio.label + " on " + model.name +
                    ": only " + std::to_string(n) + " overlapping months");
  Eigen::VectorXd yv(n);
  Eigen::MatrixXd xm(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    yv(i) = y[static_cast<size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j)
      xm(i, j) = x[static_cast<size_t>(j)][static_cast<size_t>(i)];
  }
  RegressionResult fit = ols(yv, xm, true, model.factor_columns);

  AlphaRow row;
  row.portfolio = portfolio.label;
  row.model = model.name;
  row.alpha = fit.coef(0);
  row.t_alpha = fit.t_stat(0);
  row.factor_names = model.factor_columns;
  for (Eigen::Index j = 1; j <= k; ++j) {
    row.loadings.push_back(fit.coef(j));
    row.t_loadings.push_back(fit.t_stat(j));
  }
  row.adj_r2 = fit.adj_r2;
  row.nobs = static_cast<int>(n);
  SeriesStats stats = series_stats(y);
  row.mean_return = stats.mean;
  row.t_mean = stats.t_stat;
  return row;
}

std::vector<AlphaRow> loadings_table(const SortResult& sort, const ModelSpec& model,
                                     const FactorTable& factors) {
  std::vector<AlphaRow> rows;
  for (const auto& q : sort.quantiles) rows.push_back(alpha_regression(q, model, factors));
  rows.push_back(alpha_regression(sort.long_short, model, factors));
  return rows;
}

FMBReport fama_macbeth(const std::vector<CrossSection>& cross_sections, int nw_lags) {
  if (cross_sections.empty()) throw DataError("fama_macbeth: no cross-sections");
  const auto& names = cross_sections.front().names;
  const size_t k = names.size();

  FMBReport report;
  report.names.push_back("const");
  report.names.insert(report.names.end(), names.begin(), names.end());
  report.coef_series.resize(k + 1);
  report.nw_lags = nw_lags;

  double r2_sum = 0.0;
  for (const auto& cs : cross_sections) {
    if (cs.names != names) throw DataError("fama_macbeth: inconsistent regressor names");
    const Eigen::Index n = static_cast<Eigen::Index>(cs.y.size());
    if (n <= static_cast<Eigen::Index>(k) + 1) {
      ++report.periods_dropped;
      continue;
    }
    Eigen::VectorXd y(n);
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
      y(i) = cs.y[static_cast<size_t>(i)];
      for (size_t j = 0; j < k; ++j)
        x(i, static_cast<Eigen::Index>(j)) = cs.x[j][static_cast<size_t>(i)];
    }
    RegressionResult fit;
    try {
      fit = ols(y, x, true, names);
    } catch (const SingularityError&) {
      ++report.periods_dropped;
      continue;
    }
    for (size_t j = 0; j <= k; ++j)
      report.coef_series[j].push_back(fit.coef(static_cast<Eigen::Index>(j)));
    r2_sum += fit.adj_r2;
    ++report.periods_used;
  }

  if (report.periods_used == 0)
    throw DataError("fama_macbeth: every period dropped (rank-deficient or too small)");
  report.mean_adj_r2 = r2_sum / report.periods_used;

  const int t_count = report.periods_used;
  report.degenerate = t_count < 2;
  if (report.degenerate)
    report.note = "single usable period: means equal that period's OLS, t-stats undefined";
  for (size_t j = 0; j <= k; ++j) {
    const auto& series = report.coef_series[j];
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / t_count;
    report.mean_coef.push_back(mean);
    if (report.degenerate) {
      report.t_stat.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    if (nw_lags > 0 && t_count > nw_lags + 1) {
      // NW t on the coefficient series: regress on a constant.
      Eigen::VectorXd y(t_count);
      for (int i = 0; i < t_count; ++i) y(i) = series[static_cast<size_t>(i)];
      RegressionResult fit = ols(y, Eigen::MatrixXd(t_count, 0), true, {});
      fit = newey_west(fit, nw_lags);
      report.t_stat.push_back(fit.t_stat(0));
    } else {
      double ss = 0.0;
      for (double v : series) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / (t_count - 1));
      // A numerically constant coefficient series has no sampling
      // variation to build a t-statistic from; flag it as infinite.
      if (sd <= 1e-12 * std::max(std::abs(mean), 1e-300))
        report.t_stat.push_back(mean >= 0 ? std::numeric_limits<double>::infinity()
                                          : -std::numeric_limits<double>::infinity());
      else
        report.t_stat.push_back(mean / (sd / std::sqrt(static_cast<double>(t_count))));
    }
  }
  return report;
}

void build_factor(FactorTable& factors, const PortfolioSeries& series,
                  const std::string& name) {
  factors.add_column(name, series.months, series.returns);
}

namespace {

// Overlapping months where every listed column is present and finite.
std::vector<MonthId> common_months(const FactorTable& factors,
                                   const std::vector<std::string>& cols) {
  std::vector<MonthId> out;
  for (MonthId m : factors.months) {
    bool ok = true;
    for (const auto& c : cols) {
      auto v = factors.at(c, m);
      if (!v || !std::isfinite(*v)) ok = false;
    }
    if (ok) out.push_back(m);
  }
  return out;
}

}  // namespace

SpanningResult spanning_test(const std::string& target_name,
                             const std::vector<std::string>& rhs_names,
                             const std::string& candidate_name, const FactorTable& factors) {
  SpanningResult out;
  out.target = target_name;
  out.candidate = candidate_name;
  // Both fits run on the months where the candidate is also available so
  // the alpha comparison is like-for-like.
  std::vector<std::string> base = rhs_names;
  std::vector<std::string> augmented = rhs_names;
  augmented.push_back(candidate_name);
  auto months = common_months(factors, [&] {
    std::vector<std::string> all = augmented;
    all.push_back(target_name);
    return all;
  }());
  const Eigen::Index n = static_cast<Eigen::Index>(months.size());
  if (n < static_cast<Eigen::Index>(augmented.size()) + 10)
    throw DataError("spanning test: only " + std::to_string(n) + " overlapping months");
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(augmented.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = *factors.at(target_name, months[static_cast<size_t>(i)]);
    for (size_t j = 0; j < augmented.size(); ++j)
      x(i, static_cast<Eigen::Index>(j)) =
          *factors.at(augmented[j], months[static_cast<size_t>(i)]);
  }
  out.base = ols(y, x.leftCols(static_cast<Eigen::Index>(base.size())), true, base);
  out.augmented = ols(y, x, true, augmented);
  return out;
}

std::vector<std::pair<MonthId, double>> aggregate_to_quarters(
    const std::vector<MonthId>& months, const std::vector<double>& values,
    Aggregation how) {
  std::map<MonthId, std::pair<double, int>> buckets;  // quarter end -> (acc, count)
  std::map<MonthId, double> last_value;
  for (size_t i = 0; i < months.size(); ++i) {
    const MonthId q = quarter_end(months[i]);
    auto& b = buckets[q];
    b.first += values[i];
    b.second += 1;
    last_value[q] = values[i];
  }
  std::vector<std::pair<MonthId, double>> out;
  for (const auto& [q, b] : buckets) {
    if (b.second != 3) continue;  // incomplete quarter
    double v = b.first;
    if (how == Aggregation::kMean) v /= 3.0;
    if (how == Aggregation::kLast) v = last_value[q];
    out.emplace_back(q, v);
  }
  return out;
}

RegressionResult predictive_regression(const MacroSeries& dependent,
                                       const InnovationSeries& monthly_innovations,
                                       const FactorTable& factors,
                                       const PredictiveSpec& spec) {
  if (!dependent.quarterly)
    throw DataError("predictive regression expects a quarterly dependent series");

  // Innovations of the dependent level series.
  InnovationSeries dep = innovation_filter_spaced(dependent.months, dependent.values, 3);

  auto q_innov = aggregate_to_quarters(monthly_innovations.months,
                                       monthly_innovations.values, spec.aggregation);
  std::map<MonthId, double> innov_at(q_innov.begin(), q_innov.end());

  // Market return per quarter and trailing 24-month vol at quarter ends.
  std::map<MonthId, double> mkt_at, vol_at;
  if (spec.include_market || spec.include_volatility) {
    if (!factors.has("MKT_RF"))
      throw DataError("predictive regression market controls need MKT_RF");
    std::vector<double> mkt = factors.column("MKT_RF");
    if (factors.has("RF")) {
      const auto& rf = factors.column("RF");
      for (size_t i = 0; i < mkt.size(); ++i) mkt[i] += rf[i];
    }
    for (auto& [q, v] : aggregate_to_quarters(factors.months, mkt, spec.aggregation))
      mkt_at[q] = v;
    for (size_t i = 0; i < factors.months.size(); ++i) {
      if (factors.months[i] != quarter_end(factors.months[i])) continue;
      if (i + 1 < 24) continue;
      double mean = 0.0;
      for (size_t k = i + 1 - 24; k <= i; ++k) mean += mkt[k];
      mean /= 24.0;
      double ss = 0.0;
      for (size_t k = i + 1 - 24; k <= i; ++k) ss += (mkt[k] - mean) * (mkt[k] - mean);
      vol_at[factors.months[i]] = std::sqrt(ss / 23.0);
    }
  }

  // One-quarter-ahead rows: dependent innovation at q on predictors at q-1.
  std::vector<double> y;
  std::vector<std::vector<double>> x;
  std::vector<std::string> names = {"CID"};
  if (spec.include_market) names.push_back("Mkt");
  if (spec.include_volatility) names.push_back("Vol");
  x.resize(names.size());
  for (size_t i = 0; i < dep.months.size(); ++i) {
    const MonthId q = dep.months[i];
    const MonthId q_prev = quarter_end(add_months(q, -3));
    auto innov = innov_at.find(q_prev);
    if (innov == innov_at.end()) continue;
    if (spec.include_market && !mkt_at.count(q_prev)) continue;
    if (spec.include_volatility && !vol_at.count(q_prev)) continue;
    y.push_back(dep.values[i]);
    size_t col = 0;
    x[col++].push_back(innov->second);
    if (spec.include_market) x[col++].push_back(mkt_at[q_prev]);
    if (spec.include_volatility) x[col++].push_back(vol_at[q_prev]);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(y.size());
  if (n < static_cast<Eigen::Index>(names.size()) + 10)
    throw DataError("predictive regression: only " + std::to_string(n) + " aligned quarters");
  Eigen::VectorXd yv(n);
  Eigen::MatrixXd xm(n, static_cast<Eigen::Index>(names.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    yv(i) = y[static_cast<size_t>(i)];
    for (size_t j = 0; j < names.size(); ++j)
      xm(i, static_cast<Eigen::Index>(j)) = x[j][static_cast<size_t>(i)];
  }
  RegressionResult fit = ols(yv, xm, true, names);
  return spec.nw_lags > 0 ? newey_west(fit, spec.nw_lags) : fit;
}

RegressionResult panel_predictive(const PanelPredictiveInput& input, int lag,
                                  SignSubsample subsample) {
  if (lag < 0) throw DataError("panel predictive: lag must be >= 0");
  std::map<MonthId, double> mkt_at(input.market_returns.begin(), input.market_returns.end());

  // Growth of a level series keyed by period.
  auto growth_map = [](const MacroSeries& s) {
    std::map<MonthId, double> g;
    for (size_t i = 1; i < s.months.size(); ++i) {
      if (s.values[i - 1] == 0.0) continue;
      g[s.months[i]] = s.values[i] / s.values[i - 1] - 1.0;
    }
    return g;
  };
  auto agg_growth = growth_map(input.aggregate_employment);

  std::map<int, std::map<MonthId, double>> ret_at;
  for (const auto& [code, series] : input.industry_returns)
    ret_at[code] = std::map<MonthId, double>(series.begin(), series.end());

  std::vector<double> y, x;
  for (const auto& [code, emp] : input.industry_employment) {
    auto it = ret_at.find(code);
    if (it == ret_at.end())
      throw DataError("panel predictive: no return series for industry " +
                      std::to_string(code));
    auto growth = growth_map(emp);
    for (const auto& [period, g] : growth) {
      auto ag = agg_growth.find(period);
      if (ag == agg_growth.end()) continue;
      // Lagged period on the employment series' own grid.
      MonthId lagged = period;
      bool ok = true;
      for (int k = 0; k < lag; ++k) {
        auto pos = std::lower_bound(emp.months.begin(), emp.months.end(), lagged);
        if (pos == emp.months.begin()) {
          ok = false;
          break;
        }
        lagged = *(pos - 1);
      }
      if (!ok) continue;
      auto r = it->second.find(lagged);
      auto mr = mkt_at.find(lagged);
      if (r == it->second.end() || mr == mkt_at.end()) continue;
      const double excess_ret = r->second - mr->second;
      if (subsample == SignSubsample::kNegative && excess_ret >= 0) continue;
      if (subsample == SignSubsample::kPositive && excess_ret < 0) continue;
      y.push_back(g - ag->second);
      x.push_back(excess_ret);
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(y.size());
  if (n < 12) throw DataError("panel predictive: only " + std::to_string(n) + " pooled rows");
  Eigen::VectorXd yv(n);
  Eigen::MatrixXd xm(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    yv(i) = y[static_cast<size_t>(i)];
    xm(i, 0) = x[static_cast<size_t>(i)];
  }
  return ols(yv, xm, true, {"lag_return"});
}

CorrelationMatrix correlation_matrix(
    const std::vector<std::pair<std::string, MacroSeries>>& series) {
  CorrelationMatrix out;
  std::vector<InnovationSeries> filtered;
  for (const auto& [name, s] : series) {
    out.names.push_back(name);
    filtered.push_back(innovation_filter_spaced(s.months, s.values, s.quarterly ? 3 : 1));
  }
  const size_t k = filtered.size();
  out.values.assign(k, std::vector<double>(k, 1.0));
  for (size_t i = 0; i < k; ++i) {
    for (size_t j = i + 1; j < k; ++j) {
      std::vector<double> a, b;
      size_t p = 0, q = 0;
      while (p < filtered[i].months.size() && q < filtered[j].months.size()) {
        if (filtered[i].months[p] < filtered[j].months[q]) {
          ++p;
        } else if (filtered[j].months[q] < filtered[i].months[p]) {
          ++q;
        } else {
          a.push_back(filtered[i].values[p]);
          b.push_back(filtered[j].values[q]);
          ++p;
          ++q;
        }
      }
      if (a.size() < 3) throw DataError("correlation: series " + out.names[i] + " and " +
                                        out.names[j] + " share too few periods");
      out.values[i][j] = out.values[j][i] = pearson_correlation(a, b);
    }
  }
  return out;
}

}  // namespace cidlab
