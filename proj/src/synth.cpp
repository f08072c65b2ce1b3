#include "cidlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "cidlab/csv.hpp"
#include "cidlab/errors.hpp"
#include "cidlab/rng.hpp"

#include <json.hpp>

namespace cidlab {

namespace {

// Stream tags; generation order within a stream is fixed so adding draws to
// one component never perturbs another.
enum : uint64_t {
  kStreamBetas = 1,
  kStreamCaps = 2,
  kStreamPrices = 3,
  kStreamDispersion = 4,
  kStreamMarket = 5,
  kStreamFactors = 6,
  kStreamIdio = 7,
  kStreamSigns = 8,
  kStreamMacroLT = 9,
  kStreamMacroST = 10,
  kStreamEmployment = 11,
};

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Acklam's rational approximation of the standard normal quantile,
// |error| < 1.2e-9 over (0,1).
double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) throw DataError("normal quantile needs p in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > phigh) {
    q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

std::string stock_symbol(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%05d", i);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_stocks < 1 || n_industries < 1 || n_months < 3)
    throw ConfigError("synth: counts must be positive (n_months >= 3)");
  if (n_industries > 99) throw ConfigError("synth: at most 99 industries (SIC encoding)");
  if (n_stocks < n_industries) throw ConfigError("synth: need at least one stock per industry");
  if (idio_vol < 0 || dispersion_vol < 0 || beta_sd < 0)
    throw ConfigError("synth: volatilities must be non-negative");
  if (dispersion_mean <= 0) throw ConfigError("synth: dispersion_mean must be positive");
  if (std::abs(dispersion_ar) >= 1) throw ConfigError("synth: |dispersion_ar| must be < 1");
  if (!is_valid_month(base_month)) throw ConfigError("synth: base_month must be YYYYMM");
  if (employment_response_lag < 0) throw ConfigError("synth: employment lag must be >= 0");
}

SynthPanel generate_panel(const SynthConfig& config) {
  config.validate();
  SplitMix64 master(config.seed);
  const int n = config.n_stocks, J = config.n_industries, T = config.n_months;

  // Per-stock draws.
  std::vector<double> betas(n), caps(n), prices(n);
  {
    SplitMix64 g = master.fork(kStreamBetas);
    for (int i = 0; i < n; ++i) betas[i] = g.next_normal(config.beta_mean, config.beta_sd);
  }
  {
    SplitMix64 g = master.fork(kStreamCaps);
    for (int i = 0; i < n; ++i)
      caps[i] = std::exp(config.cap_log_mean + config.cap_log_sd * g.next_normal());
  }
  {
    SplitMix64 g = master.fork(kStreamPrices);
    for (int i = 0; i < n; ++i) prices[i] = config.price_base * std::exp(0.3 * g.next_normal());
  }

  // Dispersion level process and its innovations.
  std::vector<double> level(T), shock(T);
  {
    SplitMix64 g = master.fork(kStreamDispersion);
    double prev = config.dispersion_mean;
    const double floor = 0.1 * config.dispersion_mean;
    for (int t = 0; t < T; ++t) {
      shock[t] = config.dispersion_vol * g.next_normal();
      double next = config.dispersion_mean + config.dispersion_ar * (prev - config.dispersion_mean) + shock[t];
      level[t] = std::max(next, floor);
      prev = level[t];
    }
  }

  // Common market component and passive factor columns.
  std::vector<double> market(T);
  {
    SplitMix64 g = master.fork(kStreamMarket);
    const double vol = config.factor_vols.count("MKT_RF") ? config.factor_vols.at("MKT_RF") : 0.045;
    for (int t = 0; t < T; ++t) market[t] = g.next_normal(config.market_mean, vol);
  }
  std::map<std::string, std::vector<double>> extra_factors;
  {
    size_t k = 0;
    for (const auto& [name, vol] : config.factor_vols) {
      if (name == "MKT_RF") continue;
      SplitMix64 g = master.fork(kStreamFactors + 16 * (++k));
      auto& col = extra_factors[name];
      col.resize(T);
      for (int t = 0; t < T; ++t) col[t] = g.next_normal(0.0, vol);
    }
  }

  // Monthly industry signs: equal halves of +1/-1, shuffled; the odd
  // industry (if any) sits out that month.
  std::vector<std::vector<int8_t>> sign(T, std::vector<int8_t>(J, 0));
  {
    SplitMix64 g = master.fork(kStreamSigns);
    std::vector<int> order(J);
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < J; ++j) order[j] = j;
      for (int j = J - 1; j > 0; --j) {
        int k = static_cast<int>(g.next_u64() % static_cast<uint64_t>(j + 1));
        std::swap(order[j], order[k]);
      }
      const int half = J / 2;
      for (int j = 0; j < half; ++j) sign[t][order[j]] = 1;
      for (int j = half; j < 2 * half; ++j) sign[t][order[j]] = -1;
    }
  }

  // Months.
  std::vector<MonthId> months(T);
  months[0] = config.base_month;
  for (int t = 1; t < T; ++t) months[t] = next_month(months[t - 1]);

  // Observations; idio stream runs stock-major.
  std::vector<StockObservation> obs;
  obs.reserve(static_cast<size_t>(n) * T);
  std::vector<std::string> symbols(n);
  SplitMix64 idio = master.fork(kStreamIdio);
  for (int i = 0; i < n; ++i) {
    symbols[i] = stock_symbol(i);
    const int j = i % J;
    const int sic = (j + 1) * 100 + 10 + i % 80;
    const double drift = config.base_return - config.planted_lambda * betas[i];
    for (int t = 0; t < T; ++t) {
      StockObservation o;
      o.stock = i;
      o.month = months[t];
      o.excess_return = drift + betas[i] * shock[t] + market[t] +
                        level[t] * sign[t][j] + config.idio_vol * idio.next_normal();
      o.market_cap = caps[i];
      o.price = prices[i];
      o.sic = sic;
      obs.push_back(o);
    }
  }

  SynthPanel out{ReturnPanel(std::move(symbols), std::move(obs)),
                 FactorTable{},
                 IndustryScheme("synth", {}),
                 betas,
                 months,
                 level,
                 shock,
                 market};

  // Factor table: MKT_RF is the panel's own cap-weighted mean return.
  std::vector<double> mkt_col(T, 0.0);
  {
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) wsum += caps[i];
    std::vector<double> acc(T, 0.0);
    for (const auto& o : out.panel.observations()) {
      const int t = months_between(config.base_month, o.month);
      acc[t] += o.market_cap * o.excess_return;
    }
    for (int t = 0; t < T; ++t) mkt_col[t] = acc[t] / wsum;
  }
  out.factors.months = months;
  out.factors.names.push_back("MKT_RF");
  out.factors.columns.push_back(mkt_col);
  for (const auto& [name, col] : extra_factors) {
    out.factors.names.push_back(name);
    out.factors.columns.push_back(col);
  }
  out.factors.names.push_back("RF");
  out.factors.columns.emplace_back(T, config.risk_free);

  // Matching scheme: industry j+1 owns SIC block [(j+1)*100, (j+1)*100+99].
  std::vector<SicRange> ranges;
  for (int j = 0; j < J; ++j)
    ranges.push_back({(j + 1) * 100, (j + 1) * 100 + 99, j + 1,
                      "synth_ind_" + std::to_string(j + 1)});
  out.scheme = IndustryScheme("synth", std::move(ranges));
  return out;
}

SynthMacro generate_macro(const SynthConfig& config, const SynthPanel& panel) {
  config.validate();
  SplitMix64 master(config.seed);
  const int J = config.n_industries;

  // Complete quarters on the panel's month grid.
  std::vector<MonthId> quarters;
  std::vector<std::vector<int>> quarter_members;  // month indexes per quarter
  {
    std::map<MonthId, std::vector<int>> buckets;
    for (size_t t = 0; t < panel.months.size(); ++t)
      buckets[quarter_end(panel.months[t])].push_back(static_cast<int>(t));
    for (auto& [q, idx] : buckets) {
      if (idx.size() != 3) continue;
      quarters.push_back(q);
      quarter_members.push_back(idx);
    }
  }
  const int QT = static_cast<int>(quarters.size());
  if (QT < 12) throw ConfigError("synth macro: too few complete quarters");

  // Quarterly aggregates of the generative processes.
  std::vector<double> q_shock(QT, 0.0), q_market(QT, 0.0);
  std::vector<std::vector<double>> q_ind_excess(J, std::vector<double>(QT, 0.0));
  {
    // Reconstruct the monthly industry deviations level_t * sign_jt from the
    // same sign stream used by generate_panel.
    SplitMix64 g = master.fork(kStreamSigns);
    const int T = config.n_months;
    std::vector<std::vector<int8_t>> sign(T, std::vector<int8_t>(J, 0));
    std::vector<int> order(J);
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < J; ++j) order[j] = j;
      for (int j = J - 1; j > 0; --j) {
        int k = static_cast<int>(g.next_u64() % static_cast<uint64_t>(j + 1));
        std::swap(order[j], order[k]);
      }
      const int half = J / 2;
      for (int j = 0; j < half; ++j) sign[t][order[j]] = 1;
      for (int j = half; j < 2 * half; ++j) sign[t][order[j]] = -1;
    }
    for (int q = 0; q < QT; ++q) {
      for (int t : quarter_members[q]) {
        q_shock[q] += panel.dispersion_shock[t];
        q_market[q] += panel.market[t];
        for (int j = 0; j < J; ++j)
          q_ind_excess[j][q] += panel.dispersion_level[t] * sign[t][j];
      }
    }
  }

  SynthMacro out;
  out.lt_coef = config.reallocation_intensity;
  out.st_coef = config.st_market_coef;
  const int lag = std::max(config.employment_response_lag, 1);

  auto build_level_series = [&](const std::vector<double>& growth, double base,
                                const std::string& label) {
    MacroSeries s;
    s.label = label;
    s.quarterly = true;
    s.months = quarters;
    s.values.resize(growth.size());
    double level = base;
    for (size_t i = 0; i < growth.size(); ++i) {
      level += growth[i];
      s.values[i] = level;
    }
    return s;
  };

  {
    SplitMix64 g = master.fork(kStreamMacroLT);
    std::vector<double> growth(QT, 0.0);
    for (int q = 0; q < QT; ++q) {
      growth[q] = config.lt_noise * g.next_normal();
      if (q >= lag) growth[q] += config.reallocation_intensity * q_shock[q - lag];
    }
    out.lt_unemployment = build_level_series(growth, 3.0, "lt_unemployment");
  }
  {
    SplitMix64 g = master.fork(kStreamMacroST);
    std::vector<double> growth(QT, 0.0);
    for (int q = 0; q < QT; ++q) {
      growth[q] = config.st_noise * g.next_normal();
      if (q >= 1) growth[q] += config.st_market_coef * q_market[q - 1];
    }
    out.st_unemployment = build_level_series(growth, 2.0, "st_unemployment");
  }
  out.unemployment.label = "unemployment";
  out.unemployment.quarterly = true;
  out.unemployment.months = quarters;
  out.unemployment.values.resize(static_cast<size_t>(QT));
  for (int q = 0; q < QT; ++q)
    out.unemployment.values[static_cast<size_t>(q)] =
        1.0 + out.lt_unemployment.values[static_cast<size_t>(q)] +
        out.st_unemployment.values[static_cast<size_t>(q)];

  // Industry employment: firing responds to bad lagged excess returns more
  // than hiring responds to good ones.
  {
    SplitMix64 g = master.fork(kStreamEmployment);
    std::vector<double> agg(QT, 0.0);
    for (int j = 0; j < J; ++j) {
      MacroSeries s;
      s.label = "employment_" + std::to_string(j + 1);
      s.quarterly = true;
      s.months = quarters;
      double level = 1000.0;
      for (int q = 0; q < QT; ++q) {
        double growth = config.employment_noise * g.next_normal();
        if (q >= 1) {
          const double xr = q_ind_excess[j][q - 1];
          growth += xr < 0 ? config.fire_response * xr : config.hire_response * xr;
        }
        level *= 1.0 + growth;
        s.values.push_back(level);
        agg[q] += level;
      }
      out.industry_employment.emplace_back(j + 1, std::move(s));
    }
    out.aggregate_employment.label = "employment_total";
    out.aggregate_employment.quarterly = true;
    out.aggregate_employment.months = quarters;
    out.aggregate_employment.values.assign(agg.begin(), agg.end());
  }
  return out;
}

double expected_long_short_spread(const SynthConfig& config, int quantile_count,
                                  int window) {
  if (quantile_count < 2 || window < 4)
    throw ConfigError("expected spread needs Q >= 2, window >= 4");
  if (config.beta_sd <= 0 || config.dispersion_vol <= 0) return 0.0;

  // Estimated betas are true betas plus window regression noise. The noise
  // variance folds in the idiosyncratic vol and the signed industry gap
  // term, which is serially independent white noise for any fixed stock.
  const double level_var = config.dispersion_mean * config.dispersion_mean +
                           config.dispersion_vol * config.dispersion_vol /
                               (1.0 - config.dispersion_ar * config.dispersion_ar);
  const double noise_var = config.idio_vol * config.idio_vol + level_var;
  const double slope_noise_var =
      noise_var / (config.dispersion_vol * config.dispersion_vol * (window - 3));
  const double rho =
      config.beta_sd / std::sqrt(config.beta_sd * config.beta_sd + slope_noise_var);

  // Mean of the top 1/Q tail of a standard normal, attenuated by rho for
  // the noise in the ranking variable.
  const double cut = normal_quantile(1.0 - 1.0 / quantile_count);
  const double tail_mean = quantile_count * normal_pdf(cut);
  const double beta_spread = 2.0 * config.beta_sd * rho * tail_mean;
  return -config.planted_lambda * beta_spread;
}

void write_synth_bundle(const SynthConfig& config, const SynthPanel& panel,
                        const SynthMacro& macro, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string base = dir + "/";
  save_panel(panel.panel, base + "panel.csv");
  save_factors(panel.factors, base + "factors.csv");
  {
    CsvWriter out(base + "scheme.csv", {"sic_low", "sic_high", "industry_code", "industry_name"});
    for (int j = 0; j < config.n_industries; ++j)
      out.write_row({std::to_string((j + 1) * 100), std::to_string((j + 1) * 100 + 99),
                     std::to_string(j + 1), "synth_ind_" + std::to_string(j + 1)});
    out.close();
  }
  save_macro(macro.unemployment, base + "unemployment.csv");
  save_macro(macro.lt_unemployment, base + "lt_unemployment.csv");
  save_macro(macro.st_unemployment, base + "st_unemployment.csv");
  save_macro(macro.aggregate_employment, base + "employment_total.csv");
  for (const auto& [code, series] : macro.industry_employment)
    save_macro(series, base + "employment_ind_" + std::to_string(code) + ".csv");

  nlohmann::json truth;
  truth["seed"] = config.seed;
  truth["planted_lambda"] = config.planted_lambda;
  truth["beta_mean"] = config.beta_mean;
  truth["beta_sd"] = config.beta_sd;
  truth["lt_coef"] = macro.lt_coef;
  truth["st_coef"] = macro.st_coef;
  truth["fire_response"] = config.fire_response;
  truth["hire_response"] = config.hire_response;
  std::ofstream f(base + "ground_truth.json");
  f << truth.dump(2) << '\n';
}

}  // namespace cidlab
