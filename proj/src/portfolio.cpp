#include "cidlab/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cidlab/csv.hpp"
#include "cidlab/errors.hpp"

namespace cidlab {

std::vector<QuantileAssignment> assign_quantiles(
    const std::vector<std::pair<int32_t, double>>& keys, int quantile_count,
    const Breakpoints& breakpoints, const ReturnPanel& panel) {
  if (quantile_count < 2) throw ConfigError("quantile count must be >= 2");
  if (static_cast<int>(keys.size()) < quantile_count) return {};

  std::vector<std::pair<int32_t, double>> sorted = keys;
  std::sort(sorted.begin(), sorted.end(),
            [&](const std::pair<int32_t, double>& a, const std::pair<int32_t, double>& b) {
              if (a.second != b.second) return a.second < b.second;
              return panel.symbol(a.first) < panel.symbol(b.first);
            });

  std::vector<QuantileAssignment> out(sorted.size());
  const size_t n = sorted.size();
  if (breakpoints.percentiles.empty()) {
    // Balanced split: rank i lands in floor(i*Q/n) + 1.
    for (size_t i = 0; i < n; ++i) {
      out[i] = {sorted[i].first,
                static_cast<int>(i * static_cast<size_t>(quantile_count) / n) + 1,
                sorted[i].second};
    }
  } else {
    if (static_cast<int>(breakpoints.percentiles.size()) != quantile_count - 1)
      throw ConfigError("breakpoint list needs exactly Q-1 percentiles");
    std::vector<double> values(n);
    for (size_t i = 0; i < n; ++i) values[i] = sorted[i].second;
    std::vector<double> cuts;
    for (double p : breakpoints.percentiles) cuts.push_back(quantile_type7(values, p));
    for (size_t i = 0; i < n; ++i) {
      int q = 1;
      for (double c : cuts)
        if (sorted[i].second > c) ++q;
      out[i] = {sorted[i].first, q, sorted[i].second};
    }
  }
  return out;
}

std::map<MonthId, std::vector<QuantileAssignment>> formation_assignments(
    const ReturnPanel& panel, const BetaPanel& betas, int quantile_count,
    const Breakpoints& breakpoints) {
  std::map<MonthId, std::vector<QuantileAssignment>> out;
  for (MonthId m : betas.months()) {
    auto [b, e] = betas.month_span(m);
    std::vector<std::pair<int32_t, double>> keys;
    keys.reserve(e - b);
    for (size_t i = b; i < e; ++i)
      keys.emplace_back(betas.entries[i].stock, betas.entries[i].beta);
    auto assigns = assign_quantiles(keys, quantile_count, breakpoints, panel);
    if (!assigns.empty()) out[m] = std::move(assigns);
  }
  return out;
}

SeriesStats series_stats(const std::vector<double>& values) {
  SeriesStats s;
  s.nobs = static_cast<int>(values.size());
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.nobs;
  if (s.nobs < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / (s.nobs - 1));
  s.t_stat = sd > 0 ? s.mean / (sd / std::sqrt(static_cast<double>(s.nobs))) : 0.0;
  return s;
}

std::optional<double> PortfolioSeries::at(MonthId m) const {
  auto it = std::lower_bound(months.begin(), months.end(), m);
  if (it == months.end() || *it != m) return std::nullopt;
  return returns[static_cast<size_t>(it - months.begin())];
}

namespace {

// Return of one quantile bucket at holding month t with formation caps.
// Returns false when no constituent has a usable return (or weight).
bool bucket_return(const ReturnPanel& panel, const std::vector<QuantileAssignment>& bucket,
                   MonthId formation, MonthId holding, Weighting weighting, double* ret,
                   int* count) {
  double wsum = 0.0, acc = 0.0;
  int n = 0;
  for (const auto& a : bucket) {
    int64_t idx = panel.find(a.stock, holding);
    if (idx < 0) continue;
    const double r = panel.observations()[static_cast<size_t>(idx)].excess_return;
    if (weighting == Weighting::kValue) {
      const double cap = panel.cap_at(a.stock, formation);
      if (cap <= 0) continue;
      wsum += cap;
      acc += cap * r;
    } else {
      acc += r;
      wsum += 1.0;
    }
    ++n;
  }
  if (n == 0 || wsum <= 0) return false;
  *ret = acc / wsum;
  *count = n;
  return true;
}

MonthId next_panel_month(const ReturnPanel& panel, MonthId m) {
  const auto& months = panel.months();
  auto it = std::upper_bound(months.begin(), months.end(), m);
  return it == months.end() ? 0 : *it;
}

}  // namespace

SortResult sorted_portfolios(const ReturnPanel& panel, const BetaPanel& betas,
                             int quantile_count, Weighting weighting,
                             const Breakpoints& breakpoints) {
  SortResult result;
  result.quantile_count = quantile_count;
  result.quantiles.resize(static_cast<size_t>(quantile_count));
  for (int q = 1; q <= quantile_count; ++q) {
    result.quantiles[static_cast<size_t>(q - 1)].label = "Q" + std::to_string(q);
    result.quantiles[static_cast<size_t>(q - 1)].weighting = weighting;
  }

  for (MonthId formation : betas.months()) {
    auto [b, e] = betas.month_span(formation);
    std::vector<std::pair<int32_t, double>> keys;
    keys.reserve(e - b);
    for (size_t i = b; i < e; ++i)
      keys.emplace_back(betas.entries[i].stock, betas.entries[i].beta);
    auto assigns = assign_quantiles(keys, quantile_count, breakpoints, panel);
    if (assigns.empty()) {
      result.skipped_months.push_back(formation);
      continue;
    }
    const MonthId holding = next_panel_month(panel, formation);
    if (holding == 0) continue;

    std::vector<std::vector<QuantileAssignment>> buckets(static_cast<size_t>(quantile_count));
    for (const auto& a : assigns) buckets[static_cast<size_t>(a.quantile - 1)].push_back(a);
    for (int q = 0; q < quantile_count; ++q) {
      double r = 0.0;
      int n = 0;
      if (bucket_return(panel, buckets[static_cast<size_t>(q)], formation, holding, weighting,
                        &r, &n)) {
        auto& series = result.quantiles[static_cast<size_t>(q)];
        series.months.push_back(holding);
        series.returns.push_back(r);
        series.counts.push_back(n);
      }
    }
  }
  result.long_short = long_short(result.quantiles.back(), result.quantiles.front(), "LS");
  result.long_short.weighting = weighting;
  return result;
}

PortfolioSeries long_short(const PortfolioSeries& high, const PortfolioSeries& low,
                           const std::string& label) {
  PortfolioSeries out;
  out.label = label;
  out.weighting = high.weighting;
  size_t i = 0, j = 0;
  while (i < high.months.size() && j < low.months.size()) {
    if (high.months[i] < low.months[j]) {
      ++i;
    } else if (low.months[j] < high.months[i]) {
      ++j;
    } else {
      out.months.push_back(high.months[i]);
      out.returns.push_back(high.returns[i] - low.returns[j]);
      out.counts.push_back(std::min(high.counts[i], low.counts[j]));
      ++i;
      ++j;
    }
  }
  return out;
}

DoubleSortResult double_sort(const ReturnPanel& panel, const BetaPanel& betas_a,
                             const BetaPanel& betas_b, int bins_a, int bins_b,
                             Weighting weighting, const Breakpoints& breaks_a,
                             const Breakpoints& breaks_b, bool independent) {
  DoubleSortResult result;
  result.bins_a = bins_a;
  result.bins_b = bins_b;
  result.cells.resize(static_cast<size_t>(bins_a * bins_b));
  for (int a = 1; a <= bins_a; ++a)
    for (int b = 1; b <= bins_b; ++b) {
      auto& cell = result.cells[static_cast<size_t>((a - 1) * bins_b + (b - 1))];
      cell.label = "A" + std::to_string(a) + "B" + std::to_string(b);
      cell.weighting = weighting;
    }
  result.ls_a.label = "LS_A";
  result.ls_b.label = "LS_B";
  result.ls_a.weighting = weighting;
  result.ls_b.weighting = weighting;

  // Formation months where both keys exist.
  std::vector<MonthId> months_a = betas_a.months();
  std::vector<MonthId> months_b = betas_b.months();
  std::vector<MonthId> common;
  std::set_intersection(months_a.begin(), months_a.end(), months_b.begin(), months_b.end(),
                        std::back_inserter(common));

  for (MonthId formation : common) {
    auto [ab, ae] = betas_a.month_span(formation);
    auto [bb, be] = betas_b.month_span(formation);
    std::map<int32_t, double> key_b;
    for (size_t i = bb; i < be; ++i) key_b[betas_b.entries[i].stock] = betas_b.entries[i].beta;
    // Stocks carrying both keys enter the sort.
    std::vector<std::pair<int32_t, double>> keys_a, keys_b;
    for (size_t i = ab; i < ae; ++i) {
      auto it = key_b.find(betas_a.entries[i].stock);
      if (it == key_b.end()) continue;
      keys_a.emplace_back(betas_a.entries[i].stock, betas_a.entries[i].beta);
      keys_b.emplace_back(it->first, it->second);
    }
    auto assign_a = assign_quantiles(keys_a, bins_a, breaks_a, panel);
    std::vector<QuantileAssignment> assign_b;
    if (independent) {
      assign_b = assign_quantiles(keys_b, bins_b, breaks_b, panel);
    } else {
      // Conditional sort: bin B within each A bin.
      if (!assign_a.empty()) {
        std::map<int, std::vector<std::pair<int32_t, double>>> nested;
        std::map<int32_t, double> kb(keys_b.begin(), keys_b.end());
        for (const auto& a : assign_a) nested[a.quantile].emplace_back(a.stock, kb[a.stock]);
        for (auto& [bin, ks] : nested) {
          auto sub = assign_quantiles(ks, bins_b, breaks_b, panel);
          assign_b.insert(assign_b.end(), sub.begin(), sub.end());
        }
      }
    }
    if (assign_a.empty() || assign_b.empty()) continue;
    const MonthId holding = next_panel_month(panel, formation);
    if (holding == 0) continue;

    std::map<int32_t, int> bin_of_b;
    for (const auto& b : assign_b) bin_of_b[b.stock] = b.quantile;
    std::vector<std::vector<QuantileAssignment>> cells(
        static_cast<size_t>(bins_a * bins_b));
    for (const auto& a : assign_a) {
      auto it = bin_of_b.find(a.stock);
      if (it == bin_of_b.end()) continue;  // conditional sub-bin too small
      cells[static_cast<size_t>((a.quantile - 1) * bins_b + (it->second - 1))].push_back(a);
    }

    std::vector<std::optional<double>> cell_return(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) {
      double r = 0.0;
      int n = 0;
      if (bucket_return(panel, cells[c], formation, holding, weighting, &r, &n)) {
        cell_return[c] = r;
        auto& series = result.cells[c];
        series.months.push_back(holding);
        series.returns.push_back(r);
        series.counts.push_back(n);
      }
    }

    // Conditional spreads: equal average of populated extreme-bin cells,
    // low bin minus high bin. fix_a selects whether the fixed bin runs
    // along the A key (averaging across B) or vice versa.
    auto extreme_avg = [&](int fixed_bin, bool fix_a) -> std::optional<double> {
      double sum = 0.0;
      int n = 0;
      const int limit = fix_a ? bins_b : bins_a;
      for (int k = 1; k <= limit; ++k) {
        const size_t c = fix_a
                             ? static_cast<size_t>((fixed_bin - 1) * bins_b + (k - 1))
                             : static_cast<size_t>((k - 1) * bins_b + (fixed_bin - 1));
        if (cell_return[c]) {
          sum += *cell_return[c];
          ++n;
        } else {
          ++result.empty_cell_events;
        }
      }
      if (n == 0) return std::nullopt;
      return sum / n;
    };

    auto low_a = extreme_avg(1, true), high_a = extreme_avg(bins_a, true);
    if (low_a && high_a) {
      result.ls_a.months.push_back(holding);
      result.ls_a.returns.push_back(*low_a - *high_a);
      result.ls_a.counts.push_back(0);
    } else {
      result.missing_ls_months.push_back(holding);
    }
    auto low_b = extreme_avg(1, false), high_b = extreme_avg(bins_b, false);
    if (low_b && high_b) {
      result.ls_b.months.push_back(holding);
      result.ls_b.returns.push_back(*low_b - *high_b);
      result.ls_b.counts.push_back(0);
    }
  }
  return result;
}

CharacteristicsTable characteristics(
    const ReturnPanel& panel, const BetaPanel& betas, int quantile_count,
    const std::vector<std::pair<std::string, CharacteristicFn>>& chars) {
  CharacteristicsTable table;
  table.quantile_count = quantile_count;
  auto assignments = formation_assignments(panel, betas, quantile_count, {});

  for (const auto& [name, fn] : chars) {
    // Per month, per quantile cross-sectional mean, then time-averaged.
    std::vector<double> acc(static_cast<size_t>(quantile_count), 0.0);
    std::vector<int> months_counted(static_cast<size_t>(quantile_count), 0);
    for (const auto& [formation, assigns] : assignments) {
      std::vector<double> sums(static_cast<size_t>(quantile_count), 0.0);
      std::vector<int> counts(static_cast<size_t>(quantile_count), 0);
      for (const auto& a : assigns) {
        auto v = fn(a.stock, formation);
        if (!v) continue;
        sums[static_cast<size_t>(a.quantile - 1)] += *v;
        counts[static_cast<size_t>(a.quantile - 1)] += 1;
      }
      for (int q = 0; q < quantile_count; ++q) {
        if (counts[static_cast<size_t>(q)] > 0) {
          acc[static_cast<size_t>(q)] +=
              sums[static_cast<size_t>(q)] / counts[static_cast<size_t>(q)];
          months_counted[static_cast<size_t>(q)] += 1;
        }
      }
    }
    std::vector<double> row(static_cast<size_t>(quantile_count), 0.0);
    for (int q = 0; q < quantile_count; ++q)
      if (months_counted[static_cast<size_t>(q)] > 0)
        row[static_cast<size_t>(q)] =
            acc[static_cast<size_t>(q)] / months_counted[static_cast<size_t>(q)];
    table.names.push_back(name);
    table.spread.push_back(row.back() - row.front());
    table.values.push_back(std::move(row));
  }
  return table;
}

void save_portfolios(const std::vector<const PortfolioSeries*>& series,
                     const std::string& path) {
  CsvWriter out(path, {"month", "label", "return", "count"});
  // All months across series, then label order as given, month-major.
  std::vector<MonthId> months;
  for (const auto* s : series) months.insert(months.end(), s->months.begin(), s->months.end());
  std::sort(months.begin(), months.end());
  months.erase(std::unique(months.begin(), months.end()), months.end());
  for (MonthId m : months) {
    for (const auto* s : series) {
      auto it = std::lower_bound(s->months.begin(), s->months.end(), m);
      if (it == s->months.end() || *it != m) continue;
      const size_t i = static_cast<size_t>(it - s->months.begin());
      out.write_row({format_month(m), s->label, format_double(s->returns[i]),
                     std::to_string(s->counts[i])});
    }
  }
  out.close();
}

std::vector<PortfolioSeries> load_portfolios(const std::string& path) {
  CsvReader csv(path);
  const int c_month = csv.require_column("month");
  const int c_label = csv.require_column("label");
  const int c_ret = csv.require_column("return");
  const int c_count = csv.require_column("count");
  std::map<std::string, size_t> index;
  std::vector<PortfolioSeries> out;
  std::vector<std::string> f;
  while (csv.next_row(f)) {
    const std::string& label = f[static_cast<size_t>(c_label)];
    auto [it, inserted] = index.try_emplace(label, out.size());
    if (inserted) {
      out.emplace_back();
      out.back().label = label;
    }
    auto& s = out[it->second];
    s.months.push_back(
        static_cast<MonthId>(csv.parse_int(f[static_cast<size_t>(c_month)], "month")));
    s.returns.push_back(csv.parse_double(f[static_cast<size_t>(c_ret)], "return"));
    s.counts.push_back(static_cast<int>(csv.parse_int(f[static_cast<size_t>(c_count)], "count")));
  }
  return out;
}

}  // namespace cidlab
