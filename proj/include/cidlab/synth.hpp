#pragma once

#include <map>
#include <string>
#include <vector>

#include "cidlab/industry.hpp"
#include "cidlab/panel.hpp"

namespace cidlab {

// Synthetic economy with a planted dispersion premium. Stock returns are
//   r_it = base_return - lambda * beta_i + beta_i * shock_t
//          + mkt_t + level_t * sign_{j(i),t} + eps_it
// where shock_t is the innovation of the industry-dispersion level process
// level_t (AR(1)), and sign_{jt} splits industries into equal + / - halves
// each month so the cross-industry mean absolute deviation equals level_t
// while the signed exposure of any fixed stock stays serially uncorrelated.
struct SynthConfig {
  int n_stocks = 2000;
  int n_industries = 10;
  int n_months = 600;
  uint64_t seed = 42;
  MonthId base_month = 196301;

  double planted_lambda = 0.001;  // expected-return penalty per unit beta
  double beta_mean = 0.0;
  double beta_sd = 1.0;
  double idio_vol = 0.03;
  double base_return = 0.005;

  double dispersion_mean = 0.02;  // AR(1) level process of the industry gap
  double dispersion_vol = 0.006;  // innovation sd (the planted shock scale)
  double dispersion_ar = 0.2;

  double market_mean = 0.005;
  std::map<std::string, double> factor_vols = {
      {"MKT_RF", 0.045}, {"SMB", 0.02}, {"HML", 0.02},   {"RMW", 0.015},
      {"CMA", 0.015},    {"MOM", 0.03}, {"STR", 0.025},
  };
  double risk_free = 0.003;

  double cap_log_mean = 19.0;  // lognormal market caps
  double cap_log_sd = 1.2;
  double price_base = 20.0;

  // Macro wiring: long-term unemployment growth responds to lagged
  // dispersion shocks, short-term to lagged market returns.
  double reallocation_intensity = 2.0;  // LT loading on quarterly shocks
  double st_market_coef = -0.5;
  double lt_noise = 0.01;
  double st_noise = 0.01;
  int employment_response_lag = 1;  // quarters

  // Industry employment: firing reacts to bad lagged returns more than
  // hiring reacts to good ones.
  double fire_response = 0.04;
  double hire_response = 0.01;
  double employment_noise = 0.01;

  void validate() const;  // ConfigError on nonsense
};

struct SynthPanel {
  ReturnPanel panel;
  FactorTable factors;
  IndustryScheme scheme;
  std::vector<double> true_betas;            // per stock
  std::vector<MonthId> months;
  std::vector<double> dispersion_level;      // level_t
  std::vector<double> dispersion_shock;      // innovation of level_t
  std::vector<double> market;                // common return component
};

SynthPanel generate_panel(const SynthConfig& config);

struct SynthMacro {
  MacroSeries unemployment;      // quarterly levels, total = LT + ST parts
  MacroSeries lt_unemployment;
  MacroSeries st_unemployment;
  std::vector<std::pair<int, MacroSeries>> industry_employment;  // quarterly levels
  MacroSeries aggregate_employment;
  // Ground truth for the planted responses.
  double lt_coef = 0.0;
  double st_coef = 0.0;
};

SynthMacro generate_macro(const SynthConfig& config, const SynthPanel& panel);

// Expected Q_high-minus-Q_low mean return of the planted economy when
// quantile membership comes from window-estimated betas: the closed-form
// normal order-statistics spread, attenuated for estimation noise.
double expected_long_short_spread(const SynthConfig& config, int quantile_count,
                                  int window);

// Writes panel.csv, factors.csv, scheme.csv, macro and employment CSVs plus
// ground_truth.json into the directory.
void write_synth_bundle(const SynthConfig& config, const SynthPanel& panel,
                        const SynthMacro& macro, const std::string& dir);

}  // namespace cidlab
