#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cidlab/econometrics.hpp"
#include "cidlab/panel.hpp"
#include "cidlab/portfolio.hpp"

namespace cidlab {

struct ModelSpec {
  std::string name;
  std::vector<std::string> factor_columns;

  // CAPM, FF3, Carhart, FF5, FF5_UMD_STR; anything else is a DataError.
  static ModelSpec preset(const std::string& name);
  void validate_against(const FactorTable& factors) const;
};

struct AlphaRow {
  std::string portfolio;
  std::string model;
  double mean_return = 0.0;
  double t_mean = 0.0;
  double alpha = 0.0;
  double t_alpha = 0.0;
  std::vector<std::string> factor_names;
  std::vector<double> loadings;
  std::vector<double> t_loadings;
  double adj_r2 = 0.0;
  int nobs = 0;
};

// Time-series regression of a portfolio's excess return on a factor model;
// the intercept is the abnormal return. Requires at least
// #regressors + 10 overlapping months.
AlphaRow alpha_regression(const PortfolioSeries& portfolio, const ModelSpec& model,
                          const FactorTable& factors);

// alpha_regression per quantile plus the long-short row, one model.
std::vector<AlphaRow> loadings_table(const SortResult& sort, const ModelSpec& model,
                                     const FactorTable& factors);

// ---- Fama-MacBeth ----

struct CrossSection {
  MonthId month = 0;
  std::vector<double> y;
  std::vector<std::string> names;          // regressor names (no intercept)
  std::vector<std::vector<double>> x;      // [regressor][obs]
};

struct FMBReport {
  std::vector<std::string> names;          // "const" first
  std::vector<double> mean_coef;
  std::vector<double> t_stat;              // mean / (sd/sqrt(T)), or NW on the series
  std::vector<std::vector<double>> coef_series;  // [coef][period]
  double mean_adj_r2 = 0.0;
  int periods_used = 0;
  int periods_dropped = 0;                 // rank-deficient months
  bool degenerate = false;                 // T < 2: t-stats undefined
  std::string note;
  int nw_lags = 0;                         // 0 = plain Fama-MacBeth t
};

FMBReport fama_macbeth(const std::vector<CrossSection>& cross_sections, int nw_lags = 0);

// ---- spanning tests ----

// Registers a long-short series as a tradable factor column.
void build_factor(FactorTable& factors, const PortfolioSeries& series,
                  const std::string& name);

struct SpanningResult {
  RegressionResult base;       // target ~ rhs
  RegressionResult augmented;  // target ~ rhs + candidate
  std::string target, candidate;
};

SpanningResult spanning_test(const std::string& target_name,
                             const std::vector<std::string>& rhs_names,
                             const std::string& candidate_name,
                             const FactorTable& factors);

// ---- macro predictability ----

enum class Aggregation { kSum, kMean, kLast };

// Sums/means monthly values into quarter-end buckets; quarters missing any
// month are dropped.
std::vector<std::pair<MonthId, double>> aggregate_to_quarters(
    const std::vector<MonthId>& months, const std::vector<double>& values,
    Aggregation how);

struct PredictiveSpec {
  bool include_market = false;   // lagged quarterly market return
  bool include_volatility = false;  // trailing 24-month market vol at quarter end
  int nw_lags = 4;
  Aggregation aggregation = Aggregation::kSum;
};

// One-quarter-ahead regression of the macro series' innovations on the
// lagged quarterly innovation aggregate (plus optional market controls),
// with Newey-West errors. The dependent level series runs through the
// innovation filter first.
RegressionResult predictive_regression(const MacroSeries& dependent,
                                       const InnovationSeries& monthly_innovations,
                                       const FactorTable& factors,
                                       const PredictiveSpec& spec);

// ---- industry employment panel ----

enum class SignSubsample { kFull, kNegative, kPositive };

struct PanelPredictiveInput {
  // Per industry: employment level series and return series on a shared
  // quarterly (or other) period grid.
  std::vector<std::pair<int, MacroSeries>> industry_employment;
  MacroSeries aggregate_employment;
  std::vector<std::pair<int, std::vector<std::pair<MonthId, double>>>> industry_returns;
  std::vector<std::pair<MonthId, double>> market_returns;
};

// Pooled OLS of excess employment growth on the lag-k excess industry
// return; growth and returns are netted of their aggregate counterparts.
// Subsamples split on the sign of the lagged excess return.
RegressionResult panel_predictive(const PanelPredictiveInput& input, int lag,
                                  SignSubsample subsample);

// Pairwise correlations of innovation-filtered series over overlapping
// months.
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
};

CorrelationMatrix correlation_matrix(
    const std::vector<std::pair<std::string, MacroSeries>>& series);

}  // namespace cidlab
