#include "cidlab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cidlab/errors.hpp"

#include <json.hpp>

namespace cidlab {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError(path + "." + key + ": unknown key");
}

template <typename T>
T get_or(const json& obj, const std::string& key, const T& fallback,
         const std::string& path) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

double positive(double v, const std::string& path) {
  if (!(v > 0)) throw ConfigError(path + ": must be positive");
  return v;
}

void parse_inputs(const json& j, InputPaths* out, const std::string& path) {
  check_keys(j, {"panel", "factors", "scheme", "unemployment", "lt_unemployment",
                 "st_unemployment", "employment_aggregate", "employment_industries",
                 "deflator"},
             path);
  out->panel = get_or<std::string>(j, "panel", "", path);
  out->factors = get_or<std::string>(j, "factors", "", path);
  out->scheme = get_or<std::string>(j, "scheme", "", path);
  out->unemployment = get_or<std::string>(j, "unemployment", "", path);
  out->lt_unemployment = get_or<std::string>(j, "lt_unemployment", "", path);
  out->st_unemployment = get_or<std::string>(j, "st_unemployment", "", path);
  out->employment_aggregate = get_or<std::string>(j, "employment_aggregate", "", path);
  out->deflator = get_or<std::string>(j, "deflator", "", path);
  if (j.contains("employment_industries")) {
    const auto& m = j.at("employment_industries");
    if (!m.is_object()) throw ConfigError(path + ".employment_industries: expected object");
    for (const auto& [key, value] : m.items()) {
      int code = 0;
      try {
        code = std::stoi(key);
      } catch (...) {
        throw ConfigError(path + ".employment_industries: key '" + key +
                          "' is not an industry code");
      }
      if (!value.is_string())
        throw ConfigError(path + ".employment_industries." + key + ": expected a path string");
      out->employment_industries[code] = value.get<std::string>();
    }
  }
}

void parse_screens(const json& j, ScreenSection* out, const std::string& path) {
  check_keys(j, {"enabled", "min_price", "min_real_cap", "base_month"}, path);
  out->enabled = get_or<bool>(j, "enabled", false, path);
  out->screen.min_price = get_or<double>(j, "min_price", 5.0, path);
  out->screen.min_real_cap = get_or<double>(j, "min_real_cap", 50e6, path);
  out->screen.deflator_base =
      static_cast<MonthId>(get_or<int>(j, "base_month", 201812, path));
  if (out->enabled && !is_valid_month(out->screen.deflator_base))
    throw ConfigError(path + ".base_month: not a YYYYMM month");
}

void parse_dispersion(const json& j, DispersionSection* out, const std::string& path) {
  check_keys(j, {"min_firms", "market_source", "abnormal", "abnormal_model",
                 "csd_weighting"},
             path);
  out->min_firms = get_or<int>(j, "min_firms", 10, path);
  if (out->min_firms < 1) throw ConfigError(path + ".min_firms: must be >= 1");
  const std::string source = get_or<std::string>(j, "market_source", "factor", path);
  if (source == "factor")
    out->market_source = MarketSource::kFactor;
  else if (source == "panel")
    out->market_source = MarketSource::kPanel;
  else
    throw ConfigError(path + ".market_source: expected 'factor' or 'panel'");
  out->abnormal = get_or<bool>(j, "abnormal", false, path);
  out->abnormal_model = get_or<std::string>(j, "abnormal_model", "FF3", path);
  const std::string weighting = get_or<std::string>(j, "csd_weighting", "nested", path);
  if (weighting == "nested")
    out->csd_weighting = CsdWeighting::kNested;
  else if (weighting == "flat")
    out->csd_weighting = CsdWeighting::kFlat;
  else
    throw ConfigError(path + ".csd_weighting: expected 'nested' or 'flat'");
}

void parse_beta(const json& j, BetaSection* out, const std::string& path) {
  check_keys(j, {"window", "min_obs", "winsor_lo", "winsor_hi", "measure",
                 "market_control", "frequency"},
             path);
  out->config.window = get_or<int>(j, "window", 24, path);
  out->config.min_obs = get_or<int>(j, "min_obs", 18, path);
  out->config.winsor_lo = get_or<double>(j, "winsor_lo", 0.01, path);
  out->config.winsor_hi = get_or<double>(j, "winsor_hi", 0.99, path);
  out->config.market_control = get_or<bool>(j, "market_control", false, path);
  out->config.frequency = get_or<std::string>(j, "frequency", "monthly", path);
  if (out->config.frequency != "monthly" && out->config.frequency != "daily" &&
      out->config.frequency != "quarterly")
    throw ConfigError(path + ".frequency: expected monthly, daily or quarterly");
  out->measure = get_or<std::string>(j, "measure", "cid", path);
  if (out->config.window < 1) throw ConfigError(path + ".window: must be positive");
  if (out->config.min_obs < 3) throw ConfigError(path + ".min_obs: must be >= 3");
  if (out->config.window < out->config.min_obs)
    throw ConfigError(path + ".window: must be >= min_obs");
  if (!(out->config.winsor_lo >= 0 && out->config.winsor_lo < out->config.winsor_hi &&
        out->config.winsor_hi <= 1))
    throw ConfigError(path + ".winsor_lo/winsor_hi: need 0 <= lo < hi <= 1");
  if (out->measure != "cid" && out->measure != "wid" && out->measure != "csd")
    throw ConfigError(path + ".measure: expected cid, wid or csd");
}

std::vector<double> parse_percentiles(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of percentiles");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(path + ": percentiles must be numbers");
    double p = v.get<double>();
    if (!(p > 0 && p < 1)) throw ConfigError(path + ": percentiles must lie in (0,1)");
    if (!out.empty() && p <= out.back())
      throw ConfigError(path + ": percentiles must be increasing");
    out.push_back(p);
  }
  return out;
}

void parse_sort(const json& j, SortSection* out, const std::string& path) {
  check_keys(j, {"quantiles", "weighting", "breakpoints", "double_measure", "double_bins",
                 "double_breakpoints_a", "double_breakpoints_b"},
             path);
  out->quantiles = get_or<int>(j, "quantiles", 5, path);
  if (out->quantiles < 2) throw ConfigError(path + ".quantiles: must be >= 2");
  const std::string weighting = get_or<std::string>(j, "weighting", "value", path);
  if (weighting == "value")
    out->weighting = Weighting::kValue;
  else if (weighting == "equal")
    out->weighting = Weighting::kEqual;
  else
    throw ConfigError(path + ".weighting: expected 'value' or 'equal'");
  if (j.contains("breakpoints")) out->breakpoints = parse_percentiles(j.at("breakpoints"), path + ".breakpoints");
  out->double_measure = get_or<std::string>(j, "double_measure", "", path);
  if (!out->double_measure.empty() && out->double_measure != "wid" &&
      out->double_measure != "csd" && out->double_measure != "size")
    throw ConfigError(path + ".double_measure: expected wid, csd or size");
  if (j.contains("double_bins")) {
    const auto& bins = j.at("double_bins");
    if (!bins.is_array() || bins.size() != 2 || !bins[0].is_number_integer() ||
        !bins[1].is_number_integer())
      throw ConfigError(path + ".double_bins: expected [bins_a, bins_b]");
    out->double_bins_a = bins[0].get<int>();
    out->double_bins_b = bins[1].get<int>();
    if (out->double_bins_a < 2 || out->double_bins_b < 2)
      throw ConfigError(path + ".double_bins: bins must be >= 2");
  }
  if (j.contains("double_breakpoints_a"))
    out->double_breaks_a = parse_percentiles(j.at("double_breakpoints_a"), path + ".double_breakpoints_a");
  if (j.contains("double_breakpoints_b"))
    out->double_breaks_b = parse_percentiles(j.at("double_breakpoints_b"), path + ".double_breakpoints_b");
}

void parse_battery(const json& j, BatterySection* out, const std::string& path) {
  check_keys(j, {"models", "nw_lags", "aggregation", "fmb", "spanning_rhs_model",
                 "predict_lags"},
             path);
  if (j.contains("models")) {
    out->models.clear();
    for (const auto& m : j.at("models")) {
      if (!m.is_string()) throw ConfigError(path + ".models: expected model names");
      ModelSpec::preset(m.get<std::string>());  // validates the name
      out->models.push_back(m.get<std::string>());
    }
    if (out->models.empty()) throw ConfigError(path + ".models: need at least one model");
  }
  out->nw_lags = get_or<int>(j, "nw_lags", 4, path);
  if (out->nw_lags < 0) throw ConfigError(path + ".nw_lags: must be >= 0");
  const std::string agg = get_or<std::string>(j, "aggregation", "sum", path);
  if (agg == "sum")
    out->aggregation = Aggregation::kSum;
  else if (agg == "mean")
    out->aggregation = Aggregation::kMean;
  else if (agg == "last")
    out->aggregation = Aggregation::kLast;
  else
    throw ConfigError(path + ".aggregation: expected sum, mean or last");
  if (j.contains("fmb")) {
    const auto& f = j.at("fmb");
    check_keys(f, {"across", "quantiles", "characteristics", "nw_lags"}, path + ".fmb");
    out->fmb.across = get_or<std::string>(f, "across", "portfolios", path + ".fmb");
    if (out->fmb.across != "portfolios" && out->fmb.across != "stocks")
      throw ConfigError(path + ".fmb.across: expected 'portfolios' or 'stocks'");
    out->fmb.quantiles = get_or<int>(f, "quantiles", 10, path + ".fmb");
    if (out->fmb.quantiles < 2) throw ConfigError(path + ".fmb.quantiles: must be >= 2");
    out->fmb.nw_lags = get_or<int>(f, "nw_lags", 0, path + ".fmb");
    if (f.contains("characteristics")) {
      out->fmb.characteristics.clear();
      for (const auto& c : f.at("characteristics")) {
        if (!c.is_string()) throw ConfigError(path + ".fmb.characteristics: expected names");
        const std::string name = c.get<std::string>();
        if (name != "beta" && name != "size" && name != "mom122" && name != "vol12m")
          throw ConfigError(path + ".fmb.characteristics: unknown characteristic '" + name +
                            "' (have beta, size, mom122, vol12m)");
        out->fmb.characteristics.push_back(name);
      }
    }
  }
  out->spanning_rhs_model = get_or<std::string>(j, "spanning_rhs_model", "FF5", path);
  ModelSpec::preset(out->spanning_rhs_model);
  out->predict_lags = get_or<int>(j, "predict_lags", 4, path);
  if (out->predict_lags < 1) throw ConfigError(path + ".predict_lags: must be >= 1");
}

void parse_sweep(const json& j, std::vector<SweepEntry>* out, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array");
  for (size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string epath = path + "[" + std::to_string(i) + "]";
    check_keys(e, {"label", "scheme", "min_firms"}, epath);
    SweepEntry entry;
    entry.label = get_or<std::string>(e, "label", "", epath);
    entry.scheme = get_or<std::string>(e, "scheme", "", epath);
    entry.min_firms = get_or<int>(e, "min_firms", 10, epath);
    if (entry.label.empty()) throw ConfigError(epath + ".label: required");
    if (entry.scheme.empty()) throw ConfigError(epath + ".scheme: required");
    if (entry.min_firms < 1) throw ConfigError(epath + ".min_firms: must be >= 1");
    out->push_back(entry);
  }
}

void parse_synth(const json& j, SynthConfig* out, const std::string& path) {
  check_keys(j,
             {"n_stocks", "n_industries", "n_months", "seed", "base_month",
              "planted_lambda", "beta_mean", "beta_sd", "idio_vol", "base_return",
              "dispersion_mean", "dispersion_vol", "dispersion_ar", "market_mean",
              "factor_vols", "risk_free", "cap_log_mean", "cap_log_sd", "price_base",
              "reallocation_intensity", "st_market_coef", "lt_noise", "st_noise",
              "employment_response_lag", "fire_response", "hire_response",
              "employment_noise"},
             path);
  out->n_stocks = get_or<int>(j, "n_stocks", out->n_stocks, path);
  out->n_industries = get_or<int>(j, "n_industries", out->n_industries, path);
  out->n_months = get_or<int>(j, "n_months", out->n_months, path);
  out->seed = get_or<uint64_t>(j, "seed", out->seed, path);
  out->base_month = static_cast<MonthId>(get_or<int>(j, "base_month", out->base_month, path));
  out->planted_lambda = get_or<double>(j, "planted_lambda", out->planted_lambda, path);
  out->beta_mean = get_or<double>(j, "beta_mean", out->beta_mean, path);
  out->beta_sd = get_or<double>(j, "beta_sd", out->beta_sd, path);
  out->idio_vol = get_or<double>(j, "idio_vol", out->idio_vol, path);
  out->base_return = get_or<double>(j, "base_return", out->base_return, path);
  out->dispersion_mean = get_or<double>(j, "dispersion_mean", out->dispersion_mean, path);
  out->dispersion_vol = get_or<double>(j, "dispersion_vol", out->dispersion_vol, path);
  out->dispersion_ar = get_or<double>(j, "dispersion_ar", out->dispersion_ar, path);
  out->market_mean = get_or<double>(j, "market_mean", out->market_mean, path);
  out->risk_free = get_or<double>(j, "risk_free", out->risk_free, path);
  out->cap_log_mean = get_or<double>(j, "cap_log_mean", out->cap_log_mean, path);
  out->cap_log_sd = get_or<double>(j, "cap_log_sd", out->cap_log_sd, path);
  out->price_base = get_or<double>(j, "price_base", out->price_base, path);
  out->reallocation_intensity =
      get_or<double>(j, "reallocation_intensity", out->reallocation_intensity, path);
  out->st_market_coef = get_or<double>(j, "st_market_coef", out->st_market_coef, path);
  out->lt_noise = get_or<double>(j, "lt_noise", out->lt_noise, path);
  out->st_noise = get_or<double>(j, "st_noise", out->st_noise, path);
  out->employment_response_lag =
      get_or<int>(j, "employment_response_lag", out->employment_response_lag, path);
  out->fire_response = get_or<double>(j, "fire_response", out->fire_response, path);
  out->hire_response = get_or<double>(j, "hire_response", out->hire_response, path);
  out->employment_noise = get_or<double>(j, "employment_noise", out->employment_noise, path);
  if (j.contains("factor_vols")) {
    const auto& fv = j.at("factor_vols");
    if (!fv.is_object()) throw ConfigError(path + ".factor_vols: expected object");
    out->factor_vols.clear();
    for (const auto& [name, vol] : fv.items()) {
      if (!vol.is_number()) throw ConfigError(path + ".factor_vols." + name + ": expected number");
      out->factor_vols[name] = positive(vol.get<double>(), path + ".factor_vols." + name);
    }
  }
  try {
    out->validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::parse(const std::string& json_text, const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": not valid JSON: " + e.what());
  }
  check_keys(root,
             {"inputs", "screens", "dispersion", "beta", "sort", "battery", "sweep",
              "synth", "output_dir", "threads"},
             "config");
  RunConfig cfg;
  if (root.contains("inputs")) parse_inputs(root.at("inputs"), &cfg.inputs, "config.inputs");
  if (root.contains("screens")) parse_screens(root.at("screens"), &cfg.screens, "config.screens");
  if (root.contains("dispersion"))
    parse_dispersion(root.at("dispersion"), &cfg.dispersion, "config.dispersion");
  if (root.contains("beta")) parse_beta(root.at("beta"), &cfg.beta, "config.beta");
  if (root.contains("sort")) parse_sort(root.at("sort"), &cfg.sort, "config.sort");
  if (root.contains("battery")) parse_battery(root.at("battery"), &cfg.battery, "config.battery");
  if (root.contains("sweep")) parse_sweep(root.at("sweep"), &cfg.sweep, "config.sweep");
  if (root.contains("synth")) parse_synth(root.at("synth"), &cfg.synth, "config.synth");
  cfg.output_dir = get_or<std::string>(root, "output_dir", "out", "config");
  cfg.threads = get_or<int>(root, "threads", 0, "config");
  if (cfg.threads < 0) throw ConfigError("config.threads: must be >= 0");
  cfg.raw_text = root.dump();  // canonical form; key order is sorted
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

}  // namespace cidlab
