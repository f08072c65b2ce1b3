#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cidlab/econometrics.hpp"
#include "cidlab/panel.hpp"

namespace cidlab {

struct BetaEntry {
  int32_t stock = -1;
  MonthId month = 0;
  double beta = 0.0;
  int nobs = 0;
};

struct BetaConfig {
  int window = 24;       // trailing periods, inclusive of the formation month
  int min_obs = 18;      // minimum paired observations inside the window
  double winsor_lo = 0.01;
  double winsor_hi = 0.99;
  bool market_control = false;  // optionally partial out MKT_RF
  // Label for the panel's period grid; daily or quarterly panels reuse the
  // same estimator with the window counted in their own periods.
  std::string frequency = "monthly";
};

// Rolling sensitivities of each stock's excess return to the innovation
// series, one slope per (stock, formation month), winsorized across each
// month's cross-section. Entries are sorted by (month, stock).
struct BetaPanel {
  std::vector<BetaEntry> entries;
  BetaConfig config;
  int skipped_zero_variance = 0;  // windows dropped for flat innovations

  // Entry span [begin, end) for one formation month.
  std::pair<size_t, size_t> month_span(MonthId m) const;
  std::vector<MonthId> months() const;
};

BetaPanel rolling_betas(const ReturnPanel& panel, const InnovationSeries& innovations,
                        const BetaConfig& config,
                        const FactorTable* factors = nullptr);

void save_betas(const BetaPanel& betas, const ReturnPanel& panel, const std::string& path);
BetaPanel load_betas(const std::string& path, const ReturnPanel& panel, const BetaConfig& config);

// Full-sample slope of a portfolio return series on the innovations.
double post_ranking_beta(const std::vector<MonthId>& months,
                         const std::vector<double>& returns,
                         const InnovationSeries& innovations);

}  // namespace cidlab
