#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cidlab/battery.hpp"
#include "cidlab/beta.hpp"
#include "cidlab/dispersion.hpp"
#include "cidlab/month.hpp"
#include "cidlab/panel.hpp"
#include "cidlab/synth.hpp"

namespace cidlab {

struct InputPaths {
  std::string panel;
  std::string factors;
  std::string scheme;  // file path or builtin SIC1..SIC4
  std::string unemployment, lt_unemployment, st_unemployment;
  std::string employment_aggregate;
  std::map<int, std::string> employment_industries;
  std::string deflator;
};

struct ScreenSection {
  bool enabled = false;
  ScreenConfig screen;
};

struct DispersionSection {
  int min_firms = 10;
  MarketSource market_source = MarketSource::kFactor;
  CsdWeighting csd_weighting = CsdWeighting::kNested;
  bool abnormal = false;
  std::string abnormal_model = "FF3";
};

struct BetaSection {
  BetaConfig config;
  std::string measure = "cid";  // cid | wid | csd
};

struct SortSection {
  int quantiles = 5;
  Weighting weighting = Weighting::kValue;
  std::vector<double> breakpoints;       // empty = equal count
  std::string double_measure;            // "", wid, csd, size
  int double_bins_a = 5, double_bins_b = 5;
  std::vector<double> double_breaks_a, double_breaks_b;
};

struct FmbSection {
  std::string across = "portfolios";  // portfolios | stocks
  int quantiles = 10;
  std::vector<std::string> characteristics = {"beta", "size", "mom122"};
  int nw_lags = 0;
};

struct BatterySection {
  std::vector<std::string> models = {"CAPM", "FF3", "Carhart", "FF5", "FF5_UMD_STR"};
  int nw_lags = 4;
  Aggregation aggregation = Aggregation::kSum;
  FmbSection fmb;
  std::string spanning_rhs_model = "FF5";
  int predict_lags = 4;  // lag profile depth for the employment panel
};

struct SweepEntry {
  std::string label;
  std::string scheme;  // path or SICk
  int min_firms = 10;
};

struct RunConfig {
  InputPaths inputs;
  ScreenSection screens;
  DispersionSection dispersion;
  BetaSection beta;
  SortSection sort;
  BatterySection battery;
  std::vector<SweepEntry> sweep;
  SynthConfig synth;
  std::string output_dir = "out";
  int threads = 0;  // 0 = hardware default

  // Raw config text plus CLI overrides; fingerprints the effective run for
  // the stage cache.
  std::string raw_text;

  // Throws ConfigError with a field path on schema violations or unknown
  // keys.
  static RunConfig load(const std::string& path);
  static RunConfig parse(const std::string& json_text, const std::string& origin);
};

}  // namespace cidlab
