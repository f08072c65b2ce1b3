#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "cidlab/beta.hpp"
#include "cidlab/rng.hpp"

using namespace cidlab;

namespace {

std::vector<MonthId> month_axis(int n, MonthId start = 199001) {
  std::vector<MonthId> months(static_cast<size_t>(n));
  months[0] = start;
  for (int t = 1; t < n; ++t) months[static_cast<size_t>(t)] = next_month(months[t - 1]);
  return months;
}

InnovationSeries innovations_from(const std::vector<MonthId>& months,
                                  const std::vector<double>& values) {
  InnovationSeries s;
  s.months = months;
  s.values = values;
  return s;
}

// Full-coverage panel; return_fn(stock, t) gives the month-t return.
ReturnPanel make_panel(int stocks, const std::vector<MonthId>& months,
                       const std::function<double(int, int)>& return_fn) {
  std::vector<std::string> symbols;
  std::vector<StockObservation> obs;
  for (int i = 0; i < stocks; ++i) {
    symbols.push_back("S" + std::to_string(1000 + i));
    for (size_t t = 0; t < months.size(); ++t) {
      StockObservation o;
      o.stock = i;
      o.month = months[t];
      o.excess_return = return_fn(i, static_cast<int>(t));
      o.market_cap = 100.0 + i;
      obs.push_back(o);
    }
  }
  return ReturnPanel(std::move(symbols), std::move(obs));
}

// Standalone slope oracle on explicit pairs.
double slope_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

}  // namespace

TEST_CASE("exact linear exposure is recovered") {
  auto months = month_axis(30);
  SplitMix64 rng(42);
  std::vector<double> innov(months.size());
  for (auto& v : innov) v = 0.01 * rng.next_normal();
  auto series = innovations_from(months, innov);
  ReturnPanel panel = make_panel(
      1, months, [&](int, int t) { return 0.001 + 2.0 * innov[static_cast<size_t>(t)]; });
  BetaConfig config;
  config.window = 24;
  config.min_obs = 18;
  config.winsor_lo = 0.0;
  config.winsor_hi = 1.0;
  BetaPanel betas = rolling_betas(panel, series, config);
  REQUIRE(!betas.entries.empty());
  for (const auto& e : betas.entries) {
    CHECK(e.beta == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(e.nobs >= config.min_obs);
  }
}

TEST_CASE("every window slope equals the standalone oracle") {
  const int n_stocks = 30;
  auto months = month_axis(60);
  SplitMix64 rng(7);
  std::vector<double> innov(months.size());
  for (auto& v : innov) v = 0.01 * rng.next_normal();
  auto series = innovations_from(months, innov);
  std::vector<std::vector<double>> returns(n_stocks, std::vector<double>(months.size()));
  for (int i = 0; i < n_stocks; ++i)
    for (size_t t = 0; t < months.size(); ++t)
      returns[static_cast<size_t>(i)][t] = 0.02 * rng.next_normal();
  ReturnPanel panel = make_panel(n_stocks, months, [&](int i, int t) {
    return returns[static_cast<size_t>(i)][static_cast<size_t>(t)];
  });
  BetaConfig config;
  config.window = 24;
  config.min_obs = 24;
  config.winsor_lo = 0.0;  // raw slopes for the oracle comparison
  config.winsor_hi = 1.0;
  BetaPanel betas = rolling_betas(panel, series, config);
  REQUIRE(!betas.entries.empty());
  for (const auto& e : betas.entries) {
    // Window covers the 24 months ending at e.month.
    size_t end = 0;
    while (months[end] != e.month) ++end;
    std::vector<double> x, y;
    for (size_t t = end + 1 - 24; t <= end; ++t) {
      x.push_back(innov[t]);
      y.push_back(returns[static_cast<size_t>(e.stock)][t]);
    }
    CHECK(e.beta == doctest::Approx(slope_oracle(x, y)).epsilon(1e-10));
  }
}

TEST_CASE("noise betas are centered at zero") {
  const int n_stocks = 2000;
  auto months = month_axis(25);
  SplitMix64 rng(99);
  std::vector<double> innov(months.size());
  for (auto& v : innov) v = 0.01 * rng.next_normal();
  auto series = innovations_from(months, innov);
  ReturnPanel panel =
      make_panel(n_stocks, months, [&](int, int) { return 0.03 * rng.next_normal(); });
  BetaConfig config;
  config.window = 24;
  config.min_obs = 18;
  BetaPanel betas = rolling_betas(panel, series, config);
  auto [b, e] = betas.month_span(months.back());
  REQUIRE(e - b == static_cast<size_t>(n_stocks));
  double mean = 0, ss = 0;
  for (size_t i = b; i < e; ++i) mean += betas.entries[i].beta;
  mean /= n_stocks;
  for (size_t i = b; i < e; ++i)
    ss += (betas.entries[i].beta - mean) * (betas.entries[i].beta - mean);
  const double se = std::sqrt(ss / (n_stocks - 1)) / std::sqrt(static_cast<double>(n_stocks));
  CHECK(std::abs(mean) < 2.0 * se + 1e-12);
}

TEST_CASE("affine shifts of returns leave betas unchanged; innovation scaling inverts them") {
  auto months = month_axis(40);
  SplitMix64 rng(3);
  std::vector<double> innov(months.size());
  for (auto& v : innov) v = 0.01 * rng.next_normal();
  std::vector<std::vector<double>> base(5, std::vector<double>(months.size()));
  for (auto& row : base)
    for (auto& v : row) v = 0.02 * rng.next_normal();
  auto series = innovations_from(months, innov);
  BetaConfig config;
  config.window = 24;
  config.min_obs = 20;
  config.winsor_lo = 0.0;
  config.winsor_hi = 1.0;

  ReturnPanel p0 = make_panel(5, months, [&](int i, int t) {
    return base[static_cast<size_t>(i)][static_cast<size_t>(t)];
  });
  ReturnPanel p_shift = make_panel(5, months, [&](int i, int t) {
    return base[static_cast<size_t>(i)][static_cast<size_t>(t)] + 0.005;
  });
  BetaPanel b0 = rolling_betas(p0, series, config);
  BetaPanel b_shift = rolling_betas(p_shift, series, config);
  REQUIRE(b0.entries.size() == b_shift.entries.size());
  for (size_t i = 0; i < b0.entries.size(); ++i)
    CHECK(b0.entries[i].beta == doctest::Approx(b_shift.entries[i].beta).epsilon(1e-10));

  std::vector<double> scaled(innov);
  for (auto& v : scaled) v *= 3.0;
  BetaPanel b_scaled = rolling_betas(p0, innovations_from(months, scaled), config);
  for (size_t i = 0; i < b0.entries.size(); ++i)
    CHECK(b_scaled.entries[i].beta == doctest::Approx(b0.entries[i].beta / 3.0).epsilon(1e-10));
}

TEST_CASE("flat innovation windows are skipped with a diagnostic") {
  auto months = month_axis(30);
  std::vector<double> innov(months.size(), 0.004);  // zero variance
  auto series = innovations_from(months, innov);
  SplitMix64 rng(8);
  ReturnPanel panel = make_panel(3, months, [&](int, int) { return rng.next_normal(); });
  BetaConfig config;
  config.window = 24;
  config.min_obs = 18;
  BetaPanel betas = rolling_betas(panel, series, config);
  CHECK(betas.entries.empty());
  CHECK(betas.skipped_zero_variance > 0);
}

TEST_CASE("windows shorter than min_obs produce no entry") {
  auto months = month_axis(30);
  SplitMix64 rng(12);
  std::vector<double> innov(months.size());
  for (auto& v : innov) v = 0.01 * rng.next_normal();
  // Innovations only exist for the last 10 months.
  InnovationSeries series;
  for (size_t t = 20; t < months.size(); ++t) {
    series.months.push_back(months[t]);
    series.values.push_back(innov[t]);
  }
  ReturnPanel panel = make_panel(2, months, [&](int, int) { return rng.next_normal(); });
  BetaConfig config;
  config.window = 24;
  config.min_obs = 18;
  CHECK(rolling_betas(panel, series, config).entries.empty());
}

TEST_CASE("per-month winsorization clamps the cross-section tails") {
  auto months = month_axis(26);
  SplitMix64 rng(21);
  std::vector<double> innov(months.size());
  for (auto& v : innov) v = 0.01 * rng.next_normal();
  auto series = innovations_from(months, innov);
  const int n_stocks = 200;
  // One stock with an extreme planted loading.
  ReturnPanel panel = make_panel(n_stocks, months, [&](int i, int t) {
    const double load = i == 0 ? 50.0 : 0.0;
    return load * innov[static_cast<size_t>(t)] + 0.02 * rng.next_normal();
  });
  BetaConfig config;
  config.window = 24;
  config.min_obs = 20;
  config.winsor_lo = 0.01;
  config.winsor_hi = 0.99;
  BetaPanel clamped = rolling_betas(panel, series, config);
  BetaConfig raw_config = config;
  raw_config.winsor_lo = 0.0;
  raw_config.winsor_hi = 1.0;
  BetaPanel raw = rolling_betas(panel, series, raw_config);
  // Per month, the max clamps exactly to the cross-section's 0.99 quantile
  // and interior values are untouched.
  for (MonthId m : raw.months()) {
    auto [rb, re_] = raw.month_span(m);
    auto [cb, ce] = clamped.month_span(m);
    REQUIRE(re_ - rb == ce - cb);
    std::vector<double> cross;
    for (size_t i = rb; i < re_; ++i) cross.push_back(raw.entries[i].beta);
    const double hi = quantile_type7(cross, 0.99);
    const double lo = quantile_type7(cross, 0.01);
    double clamped_max = -1e9;
    for (size_t i = cb; i < ce; ++i) clamped_max = std::max(clamped_max, clamped.entries[i].beta);
    CHECK(clamped_max == doctest::Approx(hi).epsilon(1e-12));
    for (size_t i = 0; i < re_ - rb; ++i) {
      const double rv = raw.entries[rb + i].beta;
      if (rv > lo && rv < hi) CHECK(clamped.entries[cb + i].beta == rv);
    }
  }
}

TEST_CASE("beta panel is bit-reproducible") {
  auto months = month_axis(40);
  SplitMix64 rng(5);
  std::vector<double> innov(months.size());
  for (auto& v : innov) v = 0.01 * rng.next_normal();
  auto series = innovations_from(months, innov);
  std::vector<std::vector<double>> rets(10, std::vector<double>(months.size()));
  for (auto& row : rets)
    for (auto& v : row) v = 0.02 * rng.next_normal();
  ReturnPanel panel = make_panel(10, months, [&](int i, int t) {
    return rets[static_cast<size_t>(i)][static_cast<size_t>(t)];
  });
  BetaConfig config;
  BetaPanel a = rolling_betas(panel, series, config);
  BetaPanel b = rolling_betas(panel, series, config);
  REQUIRE(a.entries.size() == b.entries.size());
  for (size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].stock == b.entries[i].stock);
    CHECK(a.entries[i].month == b.entries[i].month);
    CHECK(a.entries[i].beta == b.entries[i].beta);  // bitwise
  }
}

TEST_CASE("post-ranking beta of the innovation itself is one") {
  auto months = month_axis(50);
  SplitMix64 rng(14);
  std::vector<double> innov(months.size());
  for (auto& v : innov) v = 0.01 * rng.next_normal();
  auto series = innovations_from(months, innov);
  CHECK(post_ranking_beta(months, innov, series) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> noise(months.size());
  for (auto& v : noise) v = 0.03 * rng.next_normal();
  // Pure noise: |slope| within a couple standard errors of zero.
  const double slope = post_ranking_beta(months, noise, series);
  double sxx = 0, mx = 0;
  for (double v : innov) mx += v;
  mx /= innov.size();
  for (double v : innov) sxx += (v - mx) * (v - mx);
  const double se = 0.03 / std::sqrt(sxx);
  CHECK(std::abs(slope) < 2.5 * se);
}

TEST_CASE("market control changes nothing when returns ignore the market") {
  auto months = month_axis(40);
  SplitMix64 rng(17);
  std::vector<double> innov(months.size()), mkt(months.size());
  for (auto& v : innov) v = 0.01 * rng.next_normal();
  for (auto& v : mkt) v = 0.04 * rng.next_normal();
  auto series = innovations_from(months, innov);
  FactorTable factors;
  factors.months = months;
  factors.names = {"MKT_RF"};
  factors.columns = {mkt};
  ReturnPanel panel = make_panel(
      4, months, [&](int, int t) { return 1.5 * innov[static_cast<size_t>(t)]; });
  BetaConfig config;
  config.winsor_lo = 0.0;
  config.winsor_hi = 1.0;
  BetaPanel plain = rolling_betas(panel, series, config);
  BetaConfig controlled = config;
  controlled.market_control = true;
  BetaPanel ctrl = rolling_betas(panel, series, controlled, &factors);
  REQUIRE(plain.entries.size() == ctrl.entries.size());
  for (size_t i = 0; i < plain.entries.size(); ++i)
    CHECK(plain.entries[i].beta == doctest::Approx(ctrl.entries[i].beta).epsilon(1e-8));
}
