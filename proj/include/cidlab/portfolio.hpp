#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cidlab/beta.hpp"
#include "cidlab/panel.hpp"

namespace cidlab {

enum class Weighting { kEqual, kValue };

struct QuantileAssignment {
  int32_t stock = -1;
  int quantile = 0;  // 1..Q
  double key = 0.0;
};

struct Breakpoints {
  // Empty = balanced equal-count split; otherwise explicit percentile cuts
  // (e.g. {0.30, 0.70} for terciles), evaluated with the type-7 quantile.
  std::vector<double> percentiles;
};

// Ascending sort on (key, symbol); the symbol tie-break makes assignments
// deterministic. Returns empty when fewer than Q stocks are present.
std::vector<QuantileAssignment> assign_quantiles(
    const std::vector<std::pair<int32_t, double>>& keys, int quantile_count,
    const Breakpoints& breakpoints, const ReturnPanel& panel);

// Per formation month: the sorted cross-section of that month's betas.
std::map<MonthId, std::vector<QuantileAssignment>> formation_assignments(
    const ReturnPanel& panel, const BetaPanel& betas, int quantile_count,
    const Breakpoints& breakpoints);

struct PortfolioSeries {
  std::string label;
  std::vector<MonthId> months;     // holding months, ascending
  std::vector<double> returns;
  std::vector<int> counts;         // constituents contributing that month
  Weighting weighting = Weighting::kValue;

  std::optional<double> at(MonthId m) const;
};

// Monthly means and a t-statistic of the mean (classical).
struct SeriesStats {
  double mean = 0.0;
  double t_stat = 0.0;
  int nobs = 0;
};
SeriesStats series_stats(const std::vector<double>& values);

// Assignments formed at month f hold over the next panel month; weights are
// formation-month caps. Stocks without a cap at formation drop out of
// value-weighted portfolios but stay in equal-weighted ones.
struct SortResult {
  std::vector<PortfolioSeries> quantiles;  // Q1..QQ
  PortfolioSeries long_short;              // Q_high minus Q_low
  int quantile_count = 0;
  std::vector<MonthId> skipped_months;     // too few stocks to sort
};

SortResult sorted_portfolios(const ReturnPanel& panel, const BetaPanel& betas,
                             int quantile_count, Weighting weighting,
                             const Breakpoints& breakpoints = {});

// Elementwise high-minus-low over the common months; a month missing in
// either leg is missing in the spread.
PortfolioSeries long_short(const PortfolioSeries& high, const PortfolioSeries& low,
                           const std::string& label = "LS");

// Independent double sort. Cell (a,b) holds stocks in bin a of key A and
// bin b of key B (both keys required). The conditional spread on a key is
// the equal average of its low-bin cells minus the equal average of its
// high-bin cells, matching the convention that reports a positive premium
// for a negatively priced sensitivity; empty cells are excluded and the
// average rescaled, with exclusions counted.
struct DoubleSortResult {
  int bins_a = 0, bins_b = 0;
  std::vector<PortfolioSeries> cells;  // row-major: (a-1)*bins_b + (b-1)
  PortfolioSeries ls_a;                // low-A minus high-A, averaged over B bins
  PortfolioSeries ls_b;                // low-B minus high-B, averaged over A bins
  int empty_cell_events = 0;           // (month, cell) exclusions
  std::vector<MonthId> missing_ls_months;
};

DoubleSortResult double_sort(const ReturnPanel& panel, const BetaPanel& betas_a,
                             const BetaPanel& betas_b, int bins_a, int bins_b,
                             Weighting weighting, const Breakpoints& breaks_a = {},
                             const Breakpoints& breaks_b = {}, bool independent = true);

// Per-quantile time-series average of per-month cross-sectional means of a
// named characteristic, measured at formation. The spread column is
// Q_high minus Q_low.
struct CharacteristicsTable {
  std::vector<std::string> names;                // row labels
  std::vector<std::vector<double>> values;       // [row][quantile]
  std::vector<double> spread;                    // per row
  int quantile_count = 0;
};

// A characteristic provider maps (stock, formation month) to a value.
using CharacteristicFn = std::function<std::optional<double>(int32_t, MonthId)>;

CharacteristicsTable characteristics(
    const ReturnPanel& panel, const BetaPanel& betas, int quantile_count,
    const std::vector<std::pair<std::string, CharacteristicFn>>& chars);

void save_portfolios(const std::vector<const PortfolioSeries*>& series, const std::string& path);
std::vector<PortfolioSeries> load_portfolios(const std::string& path);

}  // namespace cidlab
