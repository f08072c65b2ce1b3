#include "cidlab/panel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_set>

#include "cidlab/csv.hpp"
#include "cidlab/errors.hpp"

namespace cidlab {

ReturnPanel::ReturnPanel(std::vector<std::string> symbols, std::vector<StockObservation> obs)
    : symbols_(std::move(symbols)), obs_(std::move(obs)) {
  std::sort(obs_.begin(), obs_.end(), [](const StockObservation& a, const StockObservation& b) {
    return a.stock != b.stock ? a.stock < b.stock : a.month < b.month;
  });
  spans_.assign(symbols_.size(), {0, 0});
  std::set<MonthId> month_set;
  for (size_t i = 0; i < obs_.size(); ++i) {
    const auto& o = obs_[i];
    if (o.stock < 0 || o.stock >= static_cast<int32_t>(symbols_.size()))
      throw DataError("panel: observation with unknown stock index");
    if (i > 0 && obs_[i - 1].stock == o.stock && obs_[i - 1].month == o.month)
      throw DataError("panel: duplicate observation for stock '" + symbols_[o.stock] +
                      "' month " + format_month(o.month));
    month_set.insert(o.month);
    month_index_[o.month].push_back(static_cast<int64_t>(i));
  }
  size_t i = 0;
  while (i < obs_.size()) {
    size_t j = i;
    while (j < obs_.size() && obs_[j].stock == obs_[i].stock) ++j;
    spans_[static_cast<size_t>(obs_[i].stock)] = {static_cast<int64_t>(i),
                                                  static_cast<int64_t>(j)};
    i = j;
  }
  months_.assign(month_set.begin(), month_set.end());
  if (!months_.empty()) {
    first_month_ = months_.front();
    last_month_ = months_.back();
  }
}

int64_t ReturnPanel::find(int32_t stock, MonthId month) const {
  auto [b, e] = stock_span(stock);
  auto begin = obs_.begin() + b, end = obs_.begin() + e;
  auto it = std::lower_bound(begin, end, month, [](const StockObservation& o, MonthId m) {
    return o.month < m;
  });
  if (it == end || it->month != month) return -1;
  return it - obs_.begin();
}

std::pair<int64_t, int64_t> ReturnPanel::stock_span(int32_t stock) const {
  if (stock < 0 || stock >= static_cast<int32_t>(spans_.size())) return {0, 0};
  return spans_[static_cast<size_t>(stock)];
}

const std::vector<int64_t>& ReturnPanel::month_slice(MonthId month) const {
  static const std::vector<int64_t> empty;
  auto it = month_index_.find(month);
  return it == month_index_.end() ? empty : it->second;
}

double ReturnPanel::cap_at(int32_t stock, MonthId month) const {
  int64_t i = find(stock, month);
  return i < 0 ? 0.0 : obs_[static_cast<size_t>(i)].market_cap;
}

// ---- FactorTable ----

bool FactorTable::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

const std::vector<double>& FactorTable::column(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return columns[i];
  throw DataError("factor table has no column '" + name + "'");
}

std::optional<double> FactorTable::at(const std::string& name, MonthId m) const {
  auto it = std::lower_bound(months.begin(), months.end(), m);
  if (it == months.end() || *it != m) return std::nullopt;
  return column(name)[static_cast<size_t>(it - months.begin())];
}

void FactorTable::add_column(const std::string& name, const std::vector<MonthId>& m,
                             const std::vector<double>& values) {
  if (has(name)) throw DataError("factor table already has column '" + name + "'");
  if (months.empty()) {
    months = m;
    names.push_back(name);
    columns.push_back(values);
    return;
  }
  std::vector<double> aligned(months.size(), std::numeric_limits<double>::quiet_NaN());
  for (size_t i = 0; i < m.size(); ++i) {
    auto it = std::lower_bound(months.begin(), months.end(), m[i]);
    if (it != months.end() && *it == m[i]) aligned[static_cast<size_t>(it - months.begin())] = values[i];
  }
  names.push_back(name);
  columns.push_back(std::move(aligned));
}

std::optional<double> MacroSeries::at(MonthId m) const {
  auto it = std::lower_bound(months.begin(), months.end(), m);
  if (it == months.end() || *it != m) return std::nullopt;
  return values[static_cast<size_t>(it - months.begin())];
}

// ---- ingestion ----

ReturnPanel load_panel(const std::string& path) {
  CsvReader csv(path);
  const int c_id = csv.require_column("stock_id");
  const int c_month = csv.require_column("month");
  const int c_ret = csv.require_column("excess_return");
  const int c_cap = csv.require_column("market_cap");
  const int c_price = csv.require_column("price");
  const int c_sic = csv.require_column("sic");

  std::vector<std::string> symbols;
  std::unordered_map<std::string, int32_t> symbol_index;
  std::vector<StockObservation> obs;
  std::unordered_set<int64_t> seen;  // stock index * 1e6-ish keyspace via pairing

  std::vector<std::string> f;
  while (csv.next_row(f)) {
    StockObservation o;
    const std::string& id = f[static_cast<size_t>(c_id)];
    if (id.empty())
      throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                      ": empty stock_id");
    auto [it, inserted] = symbol_index.try_emplace(id, static_cast<int32_t>(symbols.size()));
    if (inserted) symbols.push_back(id);
    o.stock = it->second;

    long long m = csv.parse_int(f[static_cast<size_t>(c_month)], "month");
    if (!is_valid_month(static_cast<MonthId>(m)))
      throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                      ": invalid month '" + f[static_cast<size_t>(c_month)] + "'");
    o.month = static_cast<MonthId>(m);

    o.excess_return = csv.parse_double(f[static_cast<size_t>(c_ret)], "excess_return");
    const std::string& cap = f[static_cast<size_t>(c_cap)];
    if (!cap.empty()) {
      o.market_cap = csv.parse_double(cap, "market_cap");
      if (o.market_cap <= 0)
        throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                        ": market_cap must be positive when present");
    }
    const std::string& price = f[static_cast<size_t>(c_price)];
    if (!price.empty()) {
      o.price = csv.parse_double(price, "price");
      if (o.price <= 0)
        throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                        ": price must be positive when present");
    }
    const std::string& sic = f[static_cast<size_t>(c_sic)];
    if (!sic.empty()) {
      long long s = csv.parse_int(sic, "sic");
      if (s < 0 || s > 9999)
        throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                        ": sic out of range");
      o.sic = static_cast<int>(s);
    }

    int64_t key = static_cast<int64_t>(o.stock) * 1000000LL + o.month;
    if (!seen.insert(key).second)
      throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                      ": duplicate (stock_id, month) = ('" + id + "', " +
                      format_month(o.month) + ")");
    obs.push_back(o);
  }
  return ReturnPanel(std::move(symbols), std::move(obs));
}

void save_panel(const ReturnPanel& panel, const std::string& path) {
  CsvWriter out(path, {"stock_id", "month", "excess_return", "market_cap", "price", "sic"});
  for (const auto& o : panel.observations()) {
    out.write_row({panel.symbol(o.stock), format_month(o.month),
                   format_double(o.excess_return),
                   o.market_cap > 0 ? format_double(o.market_cap) : "",
                   o.price > 0 ? format_double(o.price) : "",
                   o.sic >= 0 ? std::to_string(o.sic) : ""});
  }
  out.close();
}

namespace {

const std::vector<std::string> kKnownFactors = {"MKT_RF", "SMB", "HML", "RMW",
                                                "CMA",    "MOM", "STR", "RF"};

}  // namespace

FactorTable load_factors(const std::string& path) {
  CsvReader csv(path);
  csv.require_column("month");
  FactorTable table;
  std::vector<int> cols;
  for (const auto& name : csv.header()) {
    if (name == "month") continue;
    if (std::find(kKnownFactors.begin(), kKnownFactors.end(), name) == kKnownFactors.end())
      throw DataError("'" + path + "': unknown factor column '" + name + "'");
    if (table.has(name)) throw DataError("'" + path + "': duplicate column '" + name + "'");
    table.names.push_back(name);
    table.columns.emplace_back();
    cols.push_back(csv.column(name));
  }
  const int c_month = csv.column("month");
  std::vector<std::string> f;
  MonthId prev = 0;
  while (csv.next_row(f)) {
    MonthId m = static_cast<MonthId>(csv.parse_int(f[static_cast<size_t>(c_month)], "month"));
    if (!is_valid_month(m))
      throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                      ": invalid month");
    if (m <= prev)
      throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                      ": months must be strictly increasing");
    prev = m;
    table.months.push_back(m);
    for (size_t j = 0; j < cols.size(); ++j) {
      const std::string& cell = f[static_cast<size_t>(cols[j])];
      if (cell.empty())
        throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                        ": missing value for declared column '" + table.names[j] + "'");
      table.columns[j].push_back(csv.parse_double(cell, table.names[j]));
    }
  }
  return table;
}

void save_factors(const FactorTable& table, const std::string& path) {
  std::vector<std::string> header = {"month"};
  header.insert(header.end(), table.names.begin(), table.names.end());
  CsvWriter out(path, header);
  for (size_t i = 0; i < table.months.size(); ++i) {
    std::vector<std::string> row = {format_month(table.months[i])};
    for (const auto& col : table.columns) row.push_back(format_double(col[i]));
    out.write_row(row);
  }
  out.close();
}

MacroSeries load_macro(const std::string& path, const std::string& label) {
  CsvReader csv(path);
  const int c_period = csv.require_column("period");
  const int c_value = csv.require_column("value");
  MacroSeries s;
  s.label = label.empty() ? path : label;
  std::vector<std::string> f;
  bool any_quarterly = false, any_monthly = false;
  MonthId prev = 0;
  while (csv.next_row(f)) {
    MonthId m;
    try {
      m = parse_period(f[static_cast<size_t>(c_period)]);
    } catch (const std::invalid_argument& e) {
      throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) + ": " +
                      e.what());
    }
    if (f[static_cast<size_t>(c_period)].find('Q') != std::string::npos)
      any_quarterly = true;
    else
      any_monthly = true;
    if (m <= prev)
      throw DataError("'" + path + "' row " + std::to_string(csv.row_number()) +
                      ": periods must be strictly increasing");
    prev = m;
    s.months.push_back(m);
    s.values.push_back(csv.parse_double(f[static_cast<size_t>(c_value)], "value"));
  }
  if (any_quarterly && any_monthly)
    throw DataError("'" + path + "': mixed monthly and quarterly periods");
  s.quarterly = any_quarterly;
  return s;
}

void save_macro(const MacroSeries& series, const std::string& path) {
  CsvWriter out(path, {"period", "value"});
  for (size_t i = 0; i < series.months.size(); ++i) {
    MonthId m = series.months[i];
    std::string period = series.quarterly
                             ? std::to_string(year_of(m)) + "Q" + std::to_string(quarter_of(m))
                             : format_month(m);
    out.write_row({period, format_double(series.values[i])});
  }
  out.close();
}

// ---- screens ----

ReturnPanel apply_screens(const ReturnPanel& panel, const ScreenConfig& config,
                          const MacroSeries& deflator) {
  auto base_level = deflator.at(config.deflator_base);
  if (!base_level || *base_level <= 0)
    throw DataError("screens: deflator does not cover base month " +
                    format_month(config.deflator_base));

  // Previous-calendar-year-end price per (stock, year): December if present,
  // else the stock's last observation that year.
  std::unordered_map<int64_t, double> year_end_price;
  for (const auto& o : panel.observations()) {
    if (o.price <= 0) continue;
    int64_t key = static_cast<int64_t>(o.stock) * 10000 + year_of(o.month);
    year_end_price[key] = o.price;  // observations are month-ascending per stock
  }

  std::vector<StockObservation> kept;
  for (const auto& o : panel.observations()) {
    int64_t key = static_cast<int64_t>(o.stock) * 10000 + (year_of(o.month) - 1);
    auto it = year_end_price.find(key);
    if (it == year_end_price.end() || it->second <= config.min_price) continue;
    if (o.market_cap <= 0) continue;
    auto level = deflator.at(o.month);
    if (!level) {
      // Quarterly deflators cover a month through their quarter.
      level = deflator.at(quarter_end(o.month));
      if (!level)
        throw DataError("screens: deflator gap at " + format_month(o.month));
    }
    const double real_cap = o.market_cap * (*base_level / *level);
    if (real_cap <= config.min_real_cap) continue;
    kept.push_back(o);
  }
  return ReturnPanel(panel.symbols(), std::move(kept));
}

}  // namespace cidlab
