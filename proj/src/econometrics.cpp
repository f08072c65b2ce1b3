#include "cidlab/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cidlab/errors.hpp"

namespace cidlab {

namespace {

std::vector<std::string> label_columns(const std::vector<std::string>& names, int k,
                                       bool intercept) {
  std::vector<std::string> out;
  if (intercept) out.push_back("const");
  for (int j = 0; j < k; ++j) {
    if (j < static_cast<int>(names.size()))
      out.push_back(names[j]);
    else
      out.push_back("x" + std::to_string(j + 1));
  }
  return out;
}

}  // namespace

double RegressionResult::coef_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return coef(static_cast<Eigen::Index>(i));
  throw DataError("no coefficient named '" + name + "'");
}

double RegressionResult::tstat_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return t_stat(static_cast<Eigen::Index>(i));
  throw DataError("no coefficient named '" + name + "'");
}

RegressionResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, bool intercept,
                     const std::vector<std::string>& names) {
  const Eigen::Index n = y.size();
  if (x.rows() != n) throw DataError("ols: y has " + std::to_string(n) + " rows, X has " +
                                     std::to_string(x.rows()));
  Eigen::MatrixXd design(n, x.cols() + (intercept ? 1 : 0));
  if (intercept) {
    design.col(0).setOnes();
    design.rightCols(x.cols()) = x;
  } else {
    design = x;
  }
  const Eigen::Index k = design.cols();
  if (n <= k)
    throw SingularityError("ols: " + std::to_string(n) + " observations for " +
                           std::to_string(k) + " regressors");

  auto labels = label_columns(names, static_cast<int>(x.cols()), intercept);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    // The permutation puts dependent columns last; name them in the error.
    std::string bad;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < k; ++i) {
      if (!bad.empty()) bad += ", ";
      bad += labels[static_cast<size_t>(perm(i))];
    }
    throw SingularityError("ols: rank-deficient design; collinear column(s): " + bad);
  }

  RegressionResult res;
  res.names = labels;
  res.has_intercept = intercept;
  res.nobs = static_cast<int>(n);
  res.coef = qr.solve(y);
  res.residuals = y - design * res.coef;
  res.design = design;

  const double rss = res.residuals.squaredNorm();
  double tss;
  if (intercept) {
    const double mean = y.mean();
    tss = (y.array() - mean).matrix().squaredNorm();
  } else {
    tss = y.squaredNorm();
  }
  res.r2 = tss > 0.0 ? 1.0 - rss / tss : (rss == 0.0 ? 1.0 : 0.0);
  const double dof = static_cast<double>(n - k);
  const double centered_n = static_cast<double>(n - (intercept ? 1 : 0));
  res.adj_r2 = dof > 0 ? 1.0 - (1.0 - res.r2) * centered_n / dof : res.r2;

  // (X'X)^-1 from the thin QR factor: R'R = P'X'XP.
  Eigen::MatrixXd r_factor =
      qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  Eigen::MatrixXd r_inv =
      r_factor.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd permuted = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  res.xtx_inv = perm * permuted * perm.transpose();

  const double sigma2 = rss / dof;
  res.std_err = (sigma2 * res.xtx_inv.diagonal().array()).sqrt();
  res.t_stat = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i)
    res.t_stat(i) = res.std_err(i) > 0 ? res.coef(i) / res.std_err(i) : 0.0;
  res.cov_method = "classical";
  return res;
}

RegressionResult newey_west(const RegressionResult& fit, int lags) {
  if (lags < 0 || lags >= fit.nobs)
    throw DataError("newey_west: lags " + std::to_string(lags) + " out of range for " +
                    std::to_string(fit.nobs) + " observations");
  const Eigen::MatrixXd& design = fit.design;
  const Eigen::VectorXd& u = fit.residuals;
  const Eigen::Index n = design.rows(), k = design.cols();

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index t = 0; t < n; ++t)
    meat += u(t) * u(t) * design.row(t).transpose() * design.row(t);
  for (int j = 1; j <= lags; ++j) {
    const double w = 1.0 - static_cast<double>(j) / (lags + 1);
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index t = j; t < n; ++t)
      gamma += u(t) * u(t - j) * design.row(t).transpose() * design.row(t - j);
    meat += w * (gamma + gamma.transpose());
  }

  RegressionResult out = fit;
  Eigen::MatrixXd cov = fit.xtx_inv * meat * fit.xtx_inv;
  out.std_err = cov.diagonal().array().max(0.0).sqrt();
  for (Eigen::Index i = 0; i < k; ++i)
    out.t_stat(i) = out.std_err(i) > 0 ? out.coef(i) / out.std_err(i) : 0.0;
  out.cov_method = lags == 0 ? "white" : "newey_west(" + std::to_string(lags) + ")";
  return out;
}

std::optional<double> InnovationSeries::at(MonthId m) const {
  auto it = std::lower_bound(months.begin(), months.end(), m);
  if (it == months.end() || *it != m) return std::nullopt;
  return values[static_cast<size_t>(it - months.begin())];
}

InnovationSeries innovation_filter(const std::vector<MonthId>& months,
                                   const std::vector<double>& values,
                                   int min_block_length) {
  return innovation_filter_spaced(months, values, 1, min_block_length);
}

InnovationSeries innovation_filter_spaced(const std::vector<MonthId>& months,
                                          const std::vector<double>& values,
                                          int month_step, int min_block_length) {
  if (months.size() != values.size())
    throw DataError("innovation_filter: months/values size mismatch");
  const size_t n = months.size();
  if (n == 0) throw DataError("innovation_filter: empty series");

  // Split on calendar gaps; each block contributes rows
  // (diff_t, diff_{t-1}, level_{t-1}) to one pooled regression.
  std::vector<std::pair<size_t, size_t>> blocks;
  size_t start = 0;
  for (size_t i = 1; i <= n; ++i) {
    if (i == n || months[i] != add_months(months[i - 1], month_step)) {
      blocks.emplace_back(start, i);
      start = i;
    }
  }
  for (const auto& [b, e] : blocks) {
    if (e - b < static_cast<size_t>(min_block_length))
      throw DataError("innovation_filter: contiguous block starting " +
                      format_month(months[b]) + " has " + std::to_string(e - b) +
                      " months, need at least " + std::to_string(min_block_length));
  }

  std::vector<MonthId> row_month;
  std::vector<double> dep, lag_diff, lag_level;
  for (const auto& [b, e] : blocks) {
    for (size_t i = b + 2; i < e; ++i) {
      dep.push_back(values[i] - values[i - 1]);
      lag_diff.push_back(values[i - 1] - values[i - 2]);
      lag_level.push_back(values[i - 1]);
      row_month.push_back(months[i]);
    }
  }
  const size_t rows = dep.size();
  if (rows < 4) throw DataError("innovation_filter: too few usable rows");

  // Numerically constant regressors (a linear ramp makes the lagged
  // difference constant) fold into the intercept and are dropped; a fully
  // constant series leaves nothing to regress on.
  auto varies = [](const std::vector<double>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double scale = std::max({std::abs(*lo), std::abs(*hi), 1e-300});
    return (*hi - *lo) > 1e-9 * scale;
  };
  std::vector<std::pair<std::string, const std::vector<double>*>> cols;
  if (varies(lag_diff)) cols.emplace_back("lag_diff", &lag_diff);
  if (varies(lag_level)) cols.emplace_back("lag_level", &lag_level);
  if (cols.empty())
    throw SingularityError("innovation_filter: constant series, nothing to regress on");

  Eigen::VectorXd y(rows);
  Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(cols.size()));
  std::vector<std::string> names;
  for (size_t j = 0; j < cols.size(); ++j) names.push_back(cols[j].first);
  for (size_t i = 0; i < rows; ++i) {
    y(static_cast<Eigen::Index>(i)) = dep[i];
    for (size_t j = 0; j < cols.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*cols[j].second)[i];
  }

  InnovationSeries out;
  out.fit = ols(y, x, true, names);
  out.months = row_month;
  out.values.resize(rows);
  for (size_t i = 0; i < rows; ++i) out.values[i] = out.fit.residuals(static_cast<Eigen::Index>(i));
  out.autocorr1 = rows > 3 ? autocorrelation(out.values, 1) : 0.0;
  return out;
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("quantile of empty collection");
  if (p < 0.0 || p > 1.0) throw DataError("quantile probability out of [0,1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<double> winsorize(const std::vector<double>& values, double lo_pct,
                              double hi_pct) {
  if (values.empty()) throw DataError("winsorize: empty collection");
  if (!(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 1.0))
    throw DataError("winsorize: need 0 <= lo < hi <= 1");
  const double lo = quantile_type7(values, lo_pct);
  const double hi = quantile_type7(values, hi_pct);
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = std::clamp(values[i], lo, hi);
  return out;
}

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 3)
    throw DataError("correlation: need equal-length series of at least 3");
  const double n = static_cast<double>(a.size());
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw DataError("correlation: constant series");
  return sab / std::sqrt(saa * sbb);
}

double autocorrelation(const std::vector<double>& series, int lag) {
  if (lag < 1) throw DataError("autocorrelation: lag must be >= 1");
  if (static_cast<int>(series.size()) <= lag + 2)
    throw DataError("autocorrelation: series too short for lag " + std::to_string(lag));
  std::vector<double> lead(series.begin() + lag, series.end());
  std::vector<double> lagged(series.begin(), series.end() - lag);
  return pearson_correlation(lead, lagged);
}

}  // namespace cidlab
