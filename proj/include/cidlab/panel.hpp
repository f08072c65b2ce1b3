#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cidlab/month.hpp"

namespace cidlab {

constexpr int kNoIndustry = -1;

struct StockObservation {
  int32_t stock = -1;          // index into ReturnPanel::symbols
  MonthId month = 0;
  double excess_return = 0.0;  // monthly, decimal fraction, net of risk-free
  double market_cap = 0.0;     // <= 0 means missing
  double price = 0.0;          // <= 0 means missing
  int sic = -1;                // 4-digit SIC, -1 when absent
  int industry = kNoIndustry;  // set by classify()
};

// Stock-month panel. Observations are kept sorted by (stock, month) and the
// structure is immutable once built; downstream stages only read it.
class ReturnPanel {
 public:
  ReturnPanel() = default;
  ReturnPanel(std::vector<std::string> symbols, std::vector<StockObservation> obs);

  const std::vector<StockObservation>& observations() const { return obs_; }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::string& symbol(int32_t stock) const { return symbols_[stock]; }

  size_t size() const { return obs_.size(); }
  bool empty() const { return obs_.empty(); }

  // Undefined (0,0) on an empty panel.
  std::pair<MonthId, MonthId> month_range() const { return {first_month_, last_month_}; }
  // All months carrying at least one observation, ascending.
  const std::vector<MonthId>& months() const { return months_; }

  // Observation index for (stock, month), or -1.
  int64_t find(int32_t stock, MonthId month) const;
  // Contiguous [begin, end) observation range of one stock.
  std::pair<int64_t, int64_t> stock_span(int32_t stock) const;
  // Observation indexes of one month, ascending by stock.
  const std::vector<int64_t>& month_slice(MonthId month) const;

  double cap_at(int32_t stock, MonthId month) const;  // <=0 when missing

 private:
  std::vector<std::string> symbols_;
  std::vector<StockObservation> obs_;
  std::vector<MonthId> months_;
  MonthId first_month_ = 0, last_month_ = 0;
  std::vector<std::pair<int64_t, int64_t>> spans_;       // per stock
  std::map<MonthId, std::vector<int64_t>> month_index_;  // per month
};

struct FactorTable {
  std::vector<MonthId> months;                        // ascending
  std::vector<std::string> names;                     // column order as loaded
  std::vector<std::vector<double>> columns;           // [column][row]

  bool has(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;
  // Value at month, or nullopt when the month is outside the table.
  std::optional<double> at(const std::string& name, MonthId m) const;
  void add_column(const std::string& name, const std::vector<MonthId>& m,
                  const std::vector<double>& values);
};

struct MacroSeries {
  std::string label;
  std::vector<MonthId> months;  // monthly or quarter-end ids, ascending
  std::vector<double> values;
  bool quarterly = false;

  std::optional<double> at(MonthId m) const;
};

// ---- ingestion ----

// CSV schema: stock_id,month,excess_return,market_cap,price,sic
// market_cap/price/sic may be empty (missing). Duplicate (stock, month)
// rows and non-finite numerics are DataErrors with row numbers.
ReturnPanel load_panel(const std::string& path);
void save_panel(const ReturnPanel& panel, const std::string& path);

// CSV schema: month,<factor columns...>; any subset of
// MKT_RF,SMB,HML,RMW,CMA,MOM,STR,RF. Missing cells inside the declared
// range are DataErrors.
FactorTable load_factors(const std::string& path);
void save_factors(const FactorTable& table, const std::string& path);

// CSV schema: period,value with YYYYMM or YYYYQn periods.
MacroSeries load_macro(const std::string& path, const std::string& label = "");
void save_macro(const MacroSeries& series, const std::string& path);

// ---- screens ----

struct ScreenConfig {
  double min_price = 5.0;
  double min_real_cap = 50e6;
  MonthId deflator_base = 201812;  // min_real_cap is stated at this month
};

// Keeps (stock, month) iff the stock's previous-calendar-year-end price
// exceeds min_price and its current real market cap exceeds min_real_cap.
// "Year-end price" is the December observation when present, else the
// stock's last observation in that calendar year; stocks without any
// prior-year observation are dropped for that year. The deflator is a
// price-level index covering the panel range; caps are restated to the
// base month as cap * deflator(base)/deflator(t).
ReturnPanel apply_screens(const ReturnPanel& panel, const ScreenConfig& config,
                          const MacroSeries& deflator);

}  // namespace cidlab
