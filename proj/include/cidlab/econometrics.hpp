#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "cidlab/month.hpp"

namespace cidlab {

struct RegressionResult {
  std::vector<std::string> names;  // regressor names; "const" first if present
  Eigen::VectorXd coef;
  Eigen::VectorXd std_err;
  Eigen::VectorXd t_stat;
  Eigen::VectorXd residuals;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  int nobs = 0;
  bool has_intercept = true;
  std::string cov_method = "classical";

  // Kept so HAC covariances can be recomputed from a finished fit.
  Eigen::MatrixXd design;
  Eigen::MatrixXd xtx_inv;

  double coef_of(const std::string& name) const;
  double tstat_of(const std::string& name) const;
};

// OLS through a column-pivoted QR with relative rank tolerance 1e-10.
// Rank-deficient designs raise SingularityError naming the collinear
// columns. `names` labels the columns of x (unnamed columns get x1, x2...).
RegressionResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                     bool intercept = true, const std::vector<std::string>& names = {});

// Newey-West (Bartlett kernel, weights 1 - j/(lags+1)) covariance on a
// finished fit. lags = 0 collapses to White's heteroskedasticity-robust
// covariance. Coefficients are untouched; no small-sample adjustment.
RegressionResult newey_west(const RegressionResult& fit, int lags);

// Pastor-Stambaugh style innovation filter: regress the first difference
// of the series on [1, lagged difference, lagged level]; innovations are
// the residuals. Missing months split the input into contiguous blocks
// that share one pooled fit; any block shorter than min_block_length is a
// DataError.
struct InnovationSeries {
  std::vector<MonthId> months;   // month of each innovation
  std::vector<double> values;
  RegressionResult fit;          // the (const, lag_diff, lag_level) stage
  double autocorr1 = 0.0;        // 1-lag autocorrelation diagnostic

  std::optional<double> at(MonthId m) const;
};

InnovationSeries innovation_filter(const std::vector<MonthId>& months,
                                   const std::vector<double>& values,
                                   int min_block_length = 10);

// Same filter for series indexed every `month_step` months (3 for
// quarter-end ids).
InnovationSeries innovation_filter_spaced(const std::vector<MonthId>& months,
                                          const std::vector<double>& values,
                                          int month_step, int min_block_length = 10);

// Quantile with linear interpolation between order statistics (the R
// type-7 convention); p in [0,1].
double quantile_type7(std::vector<double> values, double p);

// Clamps below the lo-quantile / above the hi-quantile. Idempotent and
// order-preserving. 0 <= lo < hi <= 1; empty input is a DataError.
std::vector<double> winsorize(const std::vector<double>& values, double lo_pct,
                              double hi_pct);

// Pearson correlation of (x_t, x_{t-lag}) pairs; a constant series is an
// error (undefined).
double autocorrelation(const std::vector<double>& series, int lag);

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace cidlab
