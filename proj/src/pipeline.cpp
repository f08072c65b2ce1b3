#include "cidlab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "cidlab/csv.hpp"
#include "cidlab/digest.hpp"
#include "cidlab/errors.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cidlab {

// ---- shared in-memory pipeline ----

MeasureOutcome run_measure_pipeline(const ReturnPanel& classified,
                                    const IndustryScheme& scheme,
                                    const FactorTable& factors,
                                    const DispersionSection& dispersion_cfg,
                                    const std::string& measure, const BetaConfig& beta_cfg,
                                    int quantiles, const std::vector<double>& breakpoints) {
  MeasureOutcome out;
  DispersionOptions options;
  options.min_firms = dispersion_cfg.min_firms;
  options.csd_weighting = dispersion_cfg.csd_weighting;
  options.abnormal = dispersion_cfg.abnormal;
  if (options.abnormal)
    options.abnormal_factors = ModelSpec::preset(dispersion_cfg.abnormal_model).factor_columns;
  auto market = market_return_series(classified, factors, dispersion_cfg.market_source);
  out.dispersion = dispersion_series(classified, scheme, options, market, &factors);
  out.innovations = innovation_filter(out.dispersion.months, out.dispersion.series(measure));
  out.betas = rolling_betas(classified, out.innovations, beta_cfg);
  Breakpoints breaks{breakpoints};
  out.sort_ew = sorted_portfolios(classified, out.betas, quantiles, Weighting::kEqual, breaks);
  out.sort_vw = sorted_portfolios(classified, out.betas, quantiles, Weighting::kValue, breaks);
  return out;
}

namespace {

std::optional<double> beta_lookup(const BetaPanel& betas, int32_t stock, MonthId m) {
  auto [b, e] = betas.month_span(m);
  auto begin = betas.entries.begin() + static_cast<ptrdiff_t>(b);
  auto end = betas.entries.begin() + static_cast<ptrdiff_t>(e);
  auto it = std::lower_bound(begin, end, stock,
                             [](const BetaEntry& x, int32_t s) { return x.stock < s; });
  if (it == end || it->stock != stock) return std::nullopt;
  return it->beta;
}

}  // namespace

CharacteristicFn make_characteristic(const std::string& name, const ReturnPanel& panel,
                                     const BetaPanel& betas) {
  if (name == "beta") {
    return [&betas](int32_t stock, MonthId f) { return beta_lookup(betas, stock, f); };
  }
  if (name == "size") {
    return [&panel](int32_t stock, MonthId f) -> std::optional<double> {
      const double cap = panel.cap_at(stock, f);
      if (cap <= 0) return std::nullopt;
      return std::log(cap);
    };
  }
  if (name == "mom122") {
    // Compound return over the 11 months ending one month before formation.
    return [&panel](int32_t stock, MonthId f) -> std::optional<double> {
      double acc = 1.0;
      for (int k = 1; k <= 11; ++k) {
        int64_t idx = panel.find(stock, add_months(f, -k));
        if (idx < 0) return std::nullopt;
        acc *= 1.0 + panel.observations()[static_cast<size_t>(idx)].excess_return;
      }
      return acc - 1.0;
    };
  }
  if (name == "vol12m") {
    return [&panel](int32_t stock, MonthId f) -> std::optional<double> {
      std::vector<double> r;
      for (int k = 0; k <= 11; ++k) {
        int64_t idx = panel.find(stock, add_months(f, -k));
        if (idx >= 0) r.push_back(panel.observations()[static_cast<size_t>(idx)].excess_return);
      }
      if (r.size() < 8) return std::nullopt;
      double mean = std::accumulate(r.begin(), r.end(), 0.0) / r.size();
      double ss = 0.0;
      for (double v : r) ss += (v - mean) * (v - mean);
      return std::sqrt(ss / (r.size() - 1));
    };
  }
  throw ConfigError("unknown characteristic '" + name + "'");
}

// ---- pipeline stages ----

namespace {

std::string fmt(double v) { return format_double(v); }

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) return json::object();
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception&) {
    return json::object();
  }
}

}  // namespace

Pipeline::Pipeline(RunConfig config, bool force)
    : config_(std::move(config)), out_(config_.output_dir), force_(force) {
  fs::create_directories(out_);
  fs::create_directories(out_ + "/.stamps");
}

uint64_t Pipeline::stage_digest(const std::string& stage, const std::string& config_slice,
                                const std::vector<std::string>& input_files) const {
  uint64_t h = fnv1a64(stage);
  h = fnv1a64(config_.raw_text, h);
  h = fnv1a64(config_slice, h);
  for (const auto& f : input_files) {
    h = fnv1a64(f, h);
    // A missing input hashes as absent; the stage raises its own error.
    h = fnv1a64(fs::exists(f) ? digest_hex(digest_file(f)) : "absent", h);
  }
  return h;
}

bool Pipeline::stage_fresh(const std::string& stage, uint64_t digest,
                           const std::vector<std::string>& outputs) const {
  if (force_) return false;
  std::ifstream stamp(out_ + "/.stamps/" + stage);
  if (!stamp) return false;
  std::string stored;
  stamp >> stored;
  if (stored != digest_hex(digest)) return false;
  for (const auto& f : outputs)
    if (!fs::exists(f)) return false;
  return true;
}

void Pipeline::finish_stage(const std::string& stage, uint64_t digest,
                            const std::vector<std::string>& inputs,
                            const std::vector<std::string>& outputs,
                            const std::map<std::string, std::string>& conventions) {
  {
    std::ofstream stamp(out_ + "/.stamps/" + stage);
    stamp << digest_hex(digest) << '\n';
  }
  const std::string manifest_path = out_ + "/manifest.json";
  json manifest = read_json(manifest_path);
  json entry;
  entry["digest"] = digest_hex(digest);
  entry["config_digest"] = digest_hex(fnv1a64(config_.raw_text));
  json ins = json::object();
  for (const auto& f : inputs)
    if (fs::exists(f)) ins[f] = digest_hex(digest_file(f));
  entry["inputs"] = ins;
  json outs = json::object();
  for (const auto& f : outputs) outs[fs::path(f).filename().string()] = digest_hex(digest_file(f));
  entry["outputs"] = outs;
  json conv = json::object();
  for (const auto& [k, v] : conventions) conv[k] = v;
  entry["conventions"] = conv;
  manifest["stages"][stage] = entry;
  write_json(manifest_path, manifest);
}

const ReturnPanel& Pipeline::prepared_panel() {
  if (panel_) return *panel_;
  if (config_.inputs.panel.empty()) throw ConfigError("config.inputs.panel: required");
  ReturnPanel raw = load_panel(config_.inputs.panel);
  if (config_.screens.enabled) {
    if (config_.inputs.deflator.empty())
      throw ConfigError("config.inputs.deflator: required when screens are enabled");
    MacroSeries deflator = load_macro(config_.inputs.deflator, "deflator");
    raw = apply_screens(raw, config_.screens.screen, deflator);
  }
  panel_ = classify(raw, industry_scheme());
  return *panel_;
}

const FactorTable& Pipeline::factor_table() {
  if (!factors_) {
    if (config_.inputs.factors.empty()) throw ConfigError("config.inputs.factors: required");
    factors_ = load_factors(config_.inputs.factors);
  }
  return *factors_;
}

const IndustryScheme& Pipeline::industry_scheme() {
  if (!scheme_) {
    if (config_.inputs.scheme.empty()) throw ConfigError("config.inputs.scheme: required");
    scheme_ = IndustryScheme::load(config_.inputs.scheme);
  }
  return *scheme_;
}

std::string Pipeline::innovations_path(const std::string& measure) const {
  return out_ + "/innovations_" + measure + ".csv";
}

std::string Pipeline::betas_path(const std::string& measure) const {
  return out_ + "/betas_" + measure + ".csv";
}

InnovationSeries Pipeline::load_innovations(const std::string& measure) {
  const std::string path = innovations_path(measure);
  if (!fs::exists(path))
    throw DataError("missing " + path + "; run the dispersion stage first");
  CsvReader csv(path);
  const int c_month = csv.require_column("month");
  const int c_value = csv.require_column("innovation");
  InnovationSeries out;
  std::vector<std::string> f;
  while (csv.next_row(f)) {
    out.months.push_back(static_cast<MonthId>(csv.parse_int(f[static_cast<size_t>(c_month)], "month")));
    out.values.push_back(csv.parse_double(f[static_cast<size_t>(c_value)], "innovation"));
  }
  return out;
}

BetaPanel Pipeline::beta_panel_for(const std::string& measure) {
  const std::string path = betas_path(measure);
  if (!fs::exists(path)) throw DataError("missing " + path + "; run the betas stage first");
  return load_betas(path, prepared_panel(), config_.beta.config);
}

void Pipeline::ingest_check() {
  std::vector<std::string> inputs;
  auto add = [&](const std::string& p) {
    if (!p.empty() && fs::exists(p)) inputs.push_back(p);
  };
  add(config_.inputs.panel);
  add(config_.inputs.factors);
  if (!config_.inputs.scheme.empty() && config_.inputs.scheme.rfind("SIC", 0) != 0)
    add(config_.inputs.scheme);
  add(config_.inputs.unemployment);
  add(config_.inputs.lt_unemployment);
  add(config_.inputs.st_unemployment);
  add(config_.inputs.employment_aggregate);
  for (const auto& [code, p] : config_.inputs.employment_industries) add(p);
  add(config_.inputs.deflator);

  const std::string report_path = out_ + "/ingest_check.json";
  const uint64_t digest = stage_digest("ingest-check", "", inputs);
  if (stage_fresh("ingest-check", digest, {report_path})) return;

  json report;
  const ReturnPanel& panel = prepared_panel();
  report["panel"]["observations"] = panel.size();
  report["panel"]["stocks"] = panel.symbols().size();
  auto [first, last] = panel.month_range();
  report["panel"]["first_month"] = first;
  report["panel"]["last_month"] = last;
  int classified_count = 0;
  for (const auto& o : panel.observations())
    if (o.industry != kNoIndustry) ++classified_count;
  report["panel"]["classified_observations"] = classified_count;
  report["scheme"]["name"] = industry_scheme().name();
  report["scheme"]["industries"] = industry_scheme().num_industries();

  const FactorTable& factors = factor_table();
  report["factors"]["months"] = factors.months.size();
  report["factors"]["columns"] = factors.names;

  auto macro_entry = [&](const std::string& path, const std::string& label) {
    if (path.empty()) return;
    MacroSeries s = load_macro(path, label);
    report["macro"][label]["periods"] = s.months.size();
    report["macro"][label]["quarterly"] = s.quarterly;
  };
  macro_entry(config_.inputs.unemployment, "unemployment");
  macro_entry(config_.inputs.lt_unemployment, "lt_unemployment");
  macro_entry(config_.inputs.st_unemployment, "st_unemployment");
  macro_entry(config_.inputs.employment_aggregate, "employment_aggregate");

  json digests = json::object();
  for (const auto& f : inputs) digests[f] = digest_hex(digest_file(f));
  report["input_digests"] = digests;
  write_json(report_path, report);
  finish_stage("ingest-check", digest, inputs, {report_path}, {});
}

void Pipeline::dispersion() {
  std::vector<std::string> inputs = {config_.inputs.panel, config_.inputs.factors};
  if (!config_.inputs.scheme.empty() && config_.inputs.scheme.rfind("SIC", 0) != 0)
    inputs.push_back(config_.inputs.scheme);
  const std::vector<std::string> outputs = {
      out_ + "/dispersion.csv", innovations_path("cid"), innovations_path("wid"),
      innovations_path("csd")};
  const uint64_t digest = stage_digest("dispersion", "", inputs);
  if (stage_fresh("dispersion", digest, outputs)) return;

  const ReturnPanel& panel = prepared_panel();
  DispersionOptions options;
  options.min_firms = config_.dispersion.min_firms;
  options.csd_weighting = config_.dispersion.csd_weighting;
  options.abnormal = config_.dispersion.abnormal;
  if (options.abnormal)
    options.abnormal_factors =
        ModelSpec::preset(config_.dispersion.abnormal_model).factor_columns;
  auto market = market_return_series(panel, factor_table(), config_.dispersion.market_source);
  DispersionSeries series =
      dispersion_series(panel, industry_scheme(), options, market, &factor_table());
  save_dispersion(series, outputs[0]);

  for (const std::string measure : {"cid", "wid", "csd"}) {
    InnovationSeries innov = innovation_filter(series.months, series.series(measure));
    CsvWriter out(innovations_path(measure), {"month", "innovation"});
    for (size_t i = 0; i < innov.months.size(); ++i)
      out.write_row({format_month(innov.months[i]), fmt(innov.values[i])});
    out.close();
  }
  finish_stage("dispersion", digest, inputs, outputs,
               {{"market_source",
                 config_.dispersion.market_source == MarketSource::kFactor ? "factor" : "panel"},
                {"csd_weighting",
                 config_.dispersion.csd_weighting == CsdWeighting::kNested ? "nested" : "flat"},
                {"innovation_filter", "diff on [const, lag diff, lag level], pooled blocks"}});
}

std::string Pipeline::spanning_secondary() const {
  const std::string& doubled = config_.sort.double_measure;
  if (!doubled.empty() && doubled != "size" && doubled != config_.beta.measure) return doubled;
  return config_.beta.measure == "wid" ? "cid" : "wid";
}

void Pipeline::betas() {
  std::vector<std::string> measures = {config_.beta.measure};
  if (spanning_secondary() != config_.beta.measure)
    measures.push_back(spanning_secondary());
  if (!config_.sort.double_measure.empty() && config_.sort.double_measure != "size" &&
      config_.sort.double_measure != config_.beta.measure &&
      config_.sort.double_measure != spanning_secondary())
    measures.push_back(config_.sort.double_measure);

  std::vector<std::string> inputs = {config_.inputs.panel};
  for (const auto& m : measures) inputs.push_back(innovations_path(m));
  std::vector<std::string> outputs;
  for (const auto& m : measures) outputs.push_back(betas_path(m));
  const uint64_t digest = stage_digest("betas", "", inputs);
  if (stage_fresh("betas", digest, outputs)) return;

  const ReturnPanel& panel = prepared_panel();
  for (const auto& m : measures) {
    InnovationSeries innov = load_innovations(m);
    BetaPanel betas = rolling_betas(panel, innov, config_.beta.config);
    save_betas(betas, panel, betas_path(m));
  }
  finish_stage("betas", digest, inputs, outputs,
               {{"winsorization", "per formation month, type-7 quantiles"},
                {"frequency", config_.beta.config.frequency},
                {"window", std::to_string(config_.beta.config.window) + " panel periods"}});
}

void Pipeline::sort() {
  const std::string measure = config_.beta.measure;
  std::vector<std::string> inputs = {config_.inputs.panel, betas_path(measure),
                                     innovations_path(measure)};
  const bool doubled = !config_.sort.double_measure.empty();
  if (doubled && config_.sort.double_measure != "size")
    inputs.push_back(betas_path(config_.sort.double_measure));
  std::vector<std::string> outputs = {out_ + "/portfolios.csv", out_ + "/characteristics.csv",
                                      out_ + "/postranking.csv"};
  if (doubled) outputs.push_back(out_ + "/double_sort.csv");
  const uint64_t digest = stage_digest("sort", "", inputs);
  if (stage_fresh("sort", digest, outputs)) return;

  const ReturnPanel& panel = prepared_panel();
  BetaPanel betas = beta_panel_for(measure);
  Breakpoints breaks{config_.sort.breakpoints};
  SortResult ew = sorted_portfolios(panel, betas, config_.sort.quantiles, Weighting::kEqual, breaks);
  SortResult vw = sorted_portfolios(panel, betas, config_.sort.quantiles, Weighting::kValue, breaks);

  std::vector<const PortfolioSeries*> all;
  std::vector<PortfolioSeries> labeled;
  for (const auto& q : ew.quantiles) {
    labeled.push_back(q);
    labeled.back().label += "_ew";
  }
  labeled.push_back(ew.long_short);
  labeled.back().label = "LS_ew";
  for (const auto& q : vw.quantiles) {
    labeled.push_back(q);
    labeled.back().label += "_vw";
  }
  labeled.push_back(vw.long_short);
  labeled.back().label = "LS_vw";
  for (const auto& s : labeled) all.push_back(&s);
  save_portfolios(all, outputs[0]);

  // Characteristics at formation, Table-2 style.
  std::vector<std::pair<std::string, CharacteristicFn>> chars;
  for (const std::string name : {"beta", "size", "mom122", "vol12m"})
    chars.emplace_back(name, make_characteristic(name, panel, betas));
  CharacteristicsTable table =
      characteristics(panel, betas, config_.sort.quantiles, chars);
  {
    std::vector<std::string> header = {"characteristic"};
    for (int q = 1; q <= table.quantile_count; ++q) header.push_back("Q" + std::to_string(q));
    header.push_back("spread");
    CsvWriter out(outputs[1], header);
    for (size_t r = 0; r < table.names.size(); ++r) {
      std::vector<std::string> row = {table.names[r]};
      for (double v : table.values[r]) row.push_back(fmt(v));
      row.push_back(fmt(table.spread[r]));
      out.write_row(row);
    }
    out.close();
  }

  // Pre- vs post-ranking betas of the configured weighting.
  {
    InnovationSeries innov = load_innovations(measure);
    const SortResult& chosen = config_.sort.weighting == Weighting::kValue ? vw : ew;
    CsvWriter out(outputs[2], {"quantile", "pre_ranking_beta", "post_ranking_beta"});
    auto assigns = formation_assignments(panel, betas, config_.sort.quantiles, breaks);
    std::vector<double> pre_sum(static_cast<size_t>(config_.sort.quantiles), 0.0);
    std::vector<int> pre_n(static_cast<size_t>(config_.sort.quantiles), 0);
    for (const auto& [f, as] : assigns)
      for (const auto& a : as) {
        pre_sum[static_cast<size_t>(a.quantile - 1)] += a.key;
        pre_n[static_cast<size_t>(a.quantile - 1)] += 1;
      }
    for (int q = 1; q <= config_.sort.quantiles; ++q) {
      const auto& series = chosen.quantiles[static_cast<size_t>(q - 1)];
      const double post = post_ranking_beta(series.months, series.returns, innov);
      const double pre =
          pre_n[static_cast<size_t>(q - 1)] > 0
              ? pre_sum[static_cast<size_t>(q - 1)] / pre_n[static_cast<size_t>(q - 1)]
              : 0.0;
      out.write_row({std::to_string(q), fmt(pre), fmt(post)});
    }
    out.close();
  }

  if (doubled) {
    BetaPanel second;
    if (config_.sort.double_measure == "size") {
      // Size key panel: log formation cap at each month a beta exists.
      second.config = betas.config;
      for (const auto& e : betas.entries) {
        const double cap = panel.cap_at(e.stock, e.month);
        if (cap > 0) second.entries.push_back({e.stock, e.month, std::log(cap), e.nobs});
      }
    } else {
      second = beta_panel_for(config_.sort.double_measure);
    }
    DoubleSortResult ds = double_sort(
        panel, betas, second, config_.sort.double_bins_a, config_.sort.double_bins_b,
        config_.sort.weighting, Breakpoints{config_.sort.double_breaks_a},
        Breakpoints{config_.sort.double_breaks_b});
    ds.ls_a.label = "LS_" + measure;
    ds.ls_b.label = "LS_" + config_.sort.double_measure;
    std::vector<const PortfolioSeries*> series;
    for (const auto& c : ds.cells) series.push_back(&c);
    series.push_back(&ds.ls_a);
    series.push_back(&ds.ls_b);
    save_portfolios(series, outputs[3]);
  }

  finish_stage("sort", digest, inputs, outputs,
               {{"tie_break", "ascending stock_id"},
                {"formation_lag", "one panel period"},
                {"single_sort_ls", "high quantile minus low"},
                {"double_sort_ls", "low bin minus high bin, equal cell average"}});
}

void Pipeline::alphas() {
  std::vector<std::string> inputs = {out_ + "/portfolios.csv", config_.inputs.factors};
  const std::vector<std::string> outputs = {out_ + "/table_alphas.csv",
                                            out_ + "/table_loadings.csv"};
  const uint64_t digest = stage_digest("alphas", "", inputs);
  if (stage_fresh("alphas", digest, outputs)) return;

  auto portfolios = load_portfolios(inputs[0]);
  const FactorTable& factors = factor_table();
  auto find_series = [&](const std::string& label) -> const PortfolioSeries& {
    for (const auto& s : portfolios)
      if (s.label == label) return s;
    throw DataError("portfolios.csv lacks series '" + label + "'");
  };

  {
    CsvWriter out(outputs[0], {"portfolio", "model", "mean_return", "t_mean", "alpha",
                               "t_alpha", "adj_r2", "nobs"});
    for (const std::string leg : {"LS_ew", "LS_vw"}) {
      const auto& series = find_series(leg);
      for (const auto& model_name : config_.battery.models) {
        AlphaRow row = alpha_regression(series, ModelSpec::preset(model_name), factors);
        out.write_row({row.portfolio, row.model, fmt(row.mean_return), fmt(row.t_mean),
                       fmt(row.alpha), fmt(row.t_alpha), fmt(row.adj_r2),
                       std::to_string(row.nobs)});
      }
    }
    out.close();
  }

  {
    // Per-quantile loadings for the richest configured model.
    const ModelSpec model = ModelSpec::preset(config_.battery.models.back());
    std::vector<std::string> header = {"portfolio", "model", "mean_return", "t_mean",
                                       "alpha", "t_alpha"};
    for (const auto& f : model.factor_columns) {
      header.push_back(f);
      header.push_back("t_" + f);
    }
    header.push_back("adj_r2");
    header.push_back("nobs");
    CsvWriter out(outputs[1], header);
    std::vector<std::string> labels;
    for (int q = 1; q <= config_.sort.quantiles; ++q)
      labels.push_back("Q" + std::to_string(q) + "_vw");
    labels.push_back("LS_vw");
    for (const auto& label : labels) {
      AlphaRow row = alpha_regression(find_series(label), model, factors);
      std::vector<std::string> rec = {row.portfolio, row.model, fmt(row.mean_return),
                                      fmt(row.t_mean), fmt(row.alpha), fmt(row.t_alpha)};
      for (size_t j = 0; j < row.loadings.size(); ++j) {
        rec.push_back(fmt(row.loadings[j]));
        rec.push_back(fmt(row.t_loadings[j]));
      }
      rec.push_back(fmt(row.adj_r2));
      rec.push_back(std::to_string(row.nobs));
      out.write_row(rec);
    }
    out.close();
  }
  finish_stage("alphas", digest, inputs, outputs,
               {{"mean_t", "classical"}, {"alpha_t", "classical OLS"}});
}

void Pipeline::fmb() {
  const std::string measure = config_.beta.measure;
  std::vector<std::string> inputs = {config_.inputs.panel, betas_path(measure)};
  const std::vector<std::string> outputs = {out_ + "/table_fmb.csv"};
  const uint64_t digest = stage_digest("fmb", "", inputs);
  if (stage_fresh("fmb", digest, outputs)) return;

  const ReturnPanel& panel = prepared_panel();
  BetaPanel betas = beta_panel_for(measure);
  const auto& spec = config_.battery.fmb;

  std::vector<std::pair<std::string, CharacteristicFn>> chars;
  for (const auto& name : spec.characteristics)
    chars.emplace_back(name, make_characteristic(name, panel, betas));

  std::vector<CrossSection> sections;
  auto assigns = formation_assignments(panel, betas, spec.quantiles, {});
  const auto& months = panel.months();
  for (const auto& [formation, as] : assigns) {
    auto next = std::upper_bound(months.begin(), months.end(), formation);
    if (next == months.end()) continue;
    const MonthId holding = *next;
    CrossSection cs;
    cs.month = holding;
    for (const auto& [name, fn] : chars) cs.names.push_back(name);
    cs.x.resize(chars.size());
    if (spec.across == "stocks") {
      for (const auto& a : as) {
        int64_t idx = panel.find(a.stock, holding);
        if (idx < 0) continue;
        std::vector<double> values;
        bool ok = true;
        for (const auto& [name, fn] : chars) {
          auto v = fn(a.stock, formation);
          if (!v) {
            ok = false;
            break;
          }
          values.push_back(*v);
        }
        if (!ok) continue;
        cs.y.push_back(panel.observations()[static_cast<size_t>(idx)].excess_return);
        for (size_t j = 0; j < values.size(); ++j) cs.x[j].push_back(values[j]);
      }
    } else {
      // Portfolio-level: quantile returns on quantile-mean characteristics.
      std::vector<std::vector<const QuantileAssignment*>> buckets(
          static_cast<size_t>(spec.quantiles));
      for (const auto& a : as) buckets[static_cast<size_t>(a.quantile - 1)].push_back(&a);
      for (int q = 0; q < spec.quantiles; ++q) {
        double wsum = 0.0, rsum = 0.0;
        std::vector<double> csum(chars.size(), 0.0);
        std::vector<int> cn(chars.size(), 0);
        int n = 0;
        for (const auto* a : buckets[static_cast<size_t>(q)]) {
          int64_t idx = panel.find(a->stock, holding);
          if (idx < 0) continue;
          const double r = panel.observations()[static_cast<size_t>(idx)].excess_return;
          if (config_.sort.weighting == Weighting::kValue) {
            const double cap = panel.cap_at(a->stock, formation);
            if (cap <= 0) continue;
            wsum += cap;
            rsum += cap * r;
          } else {
            wsum += 1.0;
            rsum += r;
          }
          ++n;
          for (size_t j = 0; j < chars.size(); ++j) {
            auto v = chars[j].second(a->stock, formation);
            if (v) {
              csum[j] += *v;
              cn[j] += 1;
            }
          }
        }
        if (n == 0 || wsum <= 0) continue;
        bool ok = true;
        for (size_t j = 0; j < chars.size(); ++j)
          if (cn[j] == 0) ok = false;
        if (!ok) continue;
        cs.y.push_back(rsum / wsum);
        for (size_t j = 0; j < chars.size(); ++j) cs.x[j].push_back(csum[j] / cn[j]);
      }
    }
    if (!cs.y.empty()) sections.push_back(std::move(cs));
  }

  FMBReport report = fama_macbeth(sections, spec.nw_lags);
  CsvWriter out(outputs[0], {"coefficient", "mean", "t_stat", "periods_used",
                             "periods_dropped", "mean_adj_r2", "degenerate"});
  for (size_t i = 0; i < report.names.size(); ++i) {
    out.write_row({report.names[i], fmt(report.mean_coef[i]),
                   report.degenerate ? "" : fmt(report.t_stat[i]),
                   std::to_string(report.periods_used), std::to_string(report.periods_dropped),
                   fmt(report.mean_adj_r2), report.degenerate ? "true" : "false"});
  }
  out.close();
  finish_stage("fmb", digest, inputs, outputs,
               {{"across", spec.across},
                {"t_stat", spec.nw_lags > 0 ? "newey_west on coefficient series"
                                            : "plain time-series t"}});
}

void Pipeline::spanning() {
  const std::string primary = config_.beta.measure;
  const std::string secondary = spanning_secondary();
  std::vector<std::string> inputs = {out_ + "/portfolios.csv", config_.inputs.factors,
                                     betas_path(secondary)};
  const std::vector<std::string> outputs = {out_ + "/table_spanning.csv"};
  const uint64_t digest = stage_digest("spanning", "", inputs);
  if (stage_fresh("spanning", digest, outputs)) return;

  const ReturnPanel& panel = prepared_panel();
  FactorTable factors = factor_table();  // local copy; constructed factors added
  auto portfolios = load_portfolios(inputs[0]);
  const PortfolioSeries* primary_ls = nullptr;
  for (const auto& s : portfolios)
    if (s.label == "LS_vw") primary_ls = &s;
  if (primary_ls == nullptr) throw DataError("portfolios.csv lacks LS_vw");

  BetaPanel second = beta_panel_for(secondary);
  SortResult second_sort =
      sorted_portfolios(panel, second, config_.sort.quantiles, Weighting::kValue, {});

  const std::string name_a = primary + "_LS";
  const std::string name_b = secondary + "_LS";
  build_factor(factors, *primary_ls, name_a);
  build_factor(factors, second_sort.long_short, name_b);
  const auto rhs = ModelSpec::preset(config_.battery.spanning_rhs_model).factor_columns;

  CsvWriter out(outputs[0],
                {"target", "spec", "term", "coef", "t_stat", "adj_r2", "nobs"});
  auto emit = [&](const RegressionResult& fit, const std::string& target,
                  const std::string& spec) {
    for (size_t i = 0; i < fit.names.size(); ++i)
      out.write_row({target, spec, fit.names[i], fmt(fit.coef(static_cast<Eigen::Index>(i))),
                     fmt(fit.t_stat(static_cast<Eigen::Index>(i))), fmt(fit.adj_r2),
                     std::to_string(fit.nobs)});
  };
  SpanningResult ab = spanning_test(name_a, rhs, name_b, factors);
  SpanningResult ba = spanning_test(name_b, rhs, name_a, factors);
  emit(ab.base, name_a, "base");
  emit(ab.augmented, name_a, "augmented");
  emit(ba.base, name_b, "base");
  emit(ba.augmented, name_b, "augmented");
  out.close();
  finish_stage("spanning", digest, inputs, outputs,
               {{"rhs_model", config_.battery.spanning_rhs_model},
                {"factor_sign", "long high-sensitivity quantile, short low"}});
}

void Pipeline::predict_macro() {
  std::vector<std::pair<std::string, std::string>> deps;
  if (!config_.inputs.unemployment.empty())
    deps.emplace_back("unemployment", config_.inputs.unemployment);
  if (!config_.inputs.lt_unemployment.empty())
    deps.emplace_back("lt_unemployment", config_.inputs.lt_unemployment);
  if (!config_.inputs.st_unemployment.empty())
    deps.emplace_back("st_unemployment", config_.inputs.st_unemployment);
  if (deps.empty())
    throw ConfigError("predict-macro: no unemployment series configured under inputs");

  std::vector<std::string> inputs = {innovations_path(config_.beta.measure),
                                     config_.inputs.factors};
  for (const auto& [label, path] : deps) inputs.push_back(path);
  const std::vector<std::string> outputs = {out_ + "/table_predict_unemployment.csv"};
  const uint64_t digest = stage_digest("predict-macro", "", inputs);
  if (stage_fresh("predict-macro", digest, outputs)) return;

  InnovationSeries innov = load_innovations(config_.beta.measure);
  const FactorTable& factors = factor_table();

  CsvWriter out(outputs[0], {"dependent", "spec", "term", "coef", "t_stat", "adj_r2", "nobs"});
  for (const auto& [label, path] : deps) {
    MacroSeries dep = load_macro(path, label);
    for (int spec_id : {1, 2}) {
      PredictiveSpec spec;
      spec.nw_lags = config_.battery.nw_lags;
      spec.aggregation = config_.battery.aggregation;
      spec.include_market = spec_id == 2;
      spec.include_volatility = spec_id == 2;
      RegressionResult fit;
      try {
        fit = predictive_regression(dep, innov, factors, spec);
      } catch (const DataError& e) {
        throw DataError(std::string("predict-macro for ") + label + ": " + e.what());
      }
      for (size_t i = 0; i < fit.names.size(); ++i)
        out.write_row({label, spec_id == 1 ? "cid_only" : "cid_mkt_vol", fit.names[i],
                       fmt(fit.coef(static_cast<Eigen::Index>(i))),
                       fmt(fit.t_stat(static_cast<Eigen::Index>(i))), fmt(fit.adj_r2),
                       std::to_string(fit.nobs)});
    }
  }
  out.close();
  finish_stage("predict-macro", digest, inputs, outputs,
               {{"errors", "newey_west(" + std::to_string(config_.battery.nw_lags) + ")"},
                {"aggregation",
                 config_.battery.aggregation == Aggregation::kSum
                     ? "sum"
                     : (config_.battery.aggregation == Aggregation::kMean ? "mean" : "last")}});
}

void Pipeline::predict_employment() {
  if (config_.inputs.employment_industries.empty() ||
      config_.inputs.employment_aggregate.empty())
    throw ConfigError(
        "predict-employment: needs inputs.employment_industries and "
        "inputs.employment_aggregate");

  std::vector<std::string> inputs = {config_.inputs.panel, config_.inputs.factors,
                                     config_.inputs.employment_aggregate};
  for (const auto& [code, p] : config_.inputs.employment_industries) inputs.push_back(p);
  const std::vector<std::string> outputs = {out_ + "/table_predict_employment.csv"};
  const uint64_t digest = stage_digest("predict-employment", "", inputs);
  if (stage_fresh("predict-employment", digest, outputs)) return;

  const ReturnPanel& panel = prepared_panel();
  PanelPredictiveInput input;
  input.aggregate_employment =
      load_macro(config_.inputs.employment_aggregate, "employment_total");
  for (const auto& [code, path] : config_.inputs.employment_industries)
    input.industry_employment.emplace_back(code,
                                           load_macro(path, "employment_" + std::to_string(code)));

  // Quarterly industry and market returns from the panel.
  std::map<int, std::vector<std::pair<MonthId, double>>> monthly;
  for (MonthId m : panel.months())
    for (const auto& [code, ind] : industry_returns(panel, m))
      monthly[code].emplace_back(m, ind.vw_return);
  for (const auto& [code, series] : monthly) {
    std::vector<MonthId> months;
    std::vector<double> values;
    for (const auto& [m, v] : series) {
      months.push_back(m);
      values.push_back(v);
    }
    input.industry_returns.emplace_back(
        code, aggregate_to_quarters(months, values, config_.battery.aggregation));
  }
  {
    auto market = market_return_series(panel, factor_table(), config_.dispersion.market_source);
    std::vector<MonthId> months;
    std::vector<double> values;
    for (const auto& [m, v] : market) {
      months.push_back(m);
      values.push_back(v);
    }
    input.market_returns = aggregate_to_quarters(months, values, config_.battery.aggregation);
  }

  CsvWriter out(outputs[0], {"lag", "subsample", "coef", "t_stat", "adj_r2", "nobs"});
  auto emit = [&](int lag, SignSubsample sub, const std::string& name) {
    RegressionResult fit = panel_predictive(input, lag, sub);
    out.write_row({std::to_string(lag), name, fmt(fit.coef(1)), fmt(fit.t_stat(1)),
                   fmt(fit.adj_r2), std::to_string(fit.nobs)});
  };
  emit(1, SignSubsample::kFull, "full");
  emit(1, SignSubsample::kNegative, "negative");
  emit(1, SignSubsample::kPositive, "positive");
  for (int lag = 2; lag <= config_.battery.predict_lags; ++lag)
    emit(lag, SignSubsample::kFull, "full");
  out.close();
  finish_stage("predict-employment", digest, inputs, outputs,
               {{"normalization", "minus aggregate growth / market return"},
                {"growth", "simple percent change of levels"}});
}

void Pipeline::sweep_classification() {
  if (config_.sweep.empty()) throw ConfigError("sweep-classification: config.sweep is empty");
  std::vector<std::string> inputs = {config_.inputs.panel, config_.inputs.factors};
  for (const auto& e : config_.sweep)
    if (e.scheme.rfind("SIC", 0) != 0) inputs.push_back(e.scheme);
  const std::vector<std::string> outputs = {out_ + "/table_sweep.csv"};
  const uint64_t digest = stage_digest("sweep-classification", "", inputs);
  if (stage_fresh("sweep-classification", digest, outputs)) return;

  // The unclassified panel is reclassified per scheme.
  if (config_.inputs.panel.empty()) throw ConfigError("config.inputs.panel: required");
  ReturnPanel raw = load_panel(config_.inputs.panel);
  if (config_.screens.enabled) {
    MacroSeries deflator = load_macro(config_.inputs.deflator, "deflator");
    raw = apply_screens(raw, config_.screens.screen, deflator);
  }
  const FactorTable& factors = factor_table();

  struct SweepRow {
    std::string label;
    int median_industries = 0;
    double ls_ew_mean = 0, ls_ew_t = 0, ls_vw_mean = 0, ls_vw_t = 0;
    int months = 0;
  };
  std::vector<SweepRow> rows(config_.sweep.size());

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int n_threads =
      std::max(1, std::min(config_.threads > 0 ? config_.threads : hw,
                           static_cast<int>(config_.sweep.size())));
  std::atomic<size_t> next_entry{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next_entry.fetch_add(1);
      if (i >= config_.sweep.size()) break;
      const auto& entry = config_.sweep[i];
      IndustryScheme scheme = IndustryScheme::load(entry.scheme);
      ReturnPanel classified = classify(raw, scheme);
      DispersionSection disp = config_.dispersion;
      disp.min_firms = entry.min_firms;
      MeasureOutcome outcome = run_measure_pipeline(
          classified, scheme, factors, disp, config_.beta.measure, config_.beta.config,
          config_.sort.quantiles, config_.sort.breakpoints);
      SweepRow row;
      row.label = entry.label;
      {
        std::vector<int> used = outcome.dispersion.industries_used;
        std::sort(used.begin(), used.end());
        row.median_industries = used.empty() ? 0 : used[used.size() / 2];
      }
      SeriesStats ew = series_stats(outcome.sort_ew.long_short.returns);
      SeriesStats vw = series_stats(outcome.sort_vw.long_short.returns);
      row.ls_ew_mean = ew.mean;
      row.ls_ew_t = ew.t_stat;
      row.ls_vw_mean = vw.mean;
      row.ls_vw_t = vw.t_stat;
      row.months = vw.nobs;
      rows[i] = row;
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  CsvWriter out(outputs[0], {"scheme", "median_industries", "ls_ew_mean", "ls_ew_t",
                             "ls_vw_mean", "ls_vw_t", "months"});
  for (const auto& row : rows)
    out.write_row({row.label, std::to_string(row.median_industries), fmt(row.ls_ew_mean),
                   fmt(row.ls_ew_t), fmt(row.ls_vw_mean), fmt(row.ls_vw_t),
                   std::to_string(row.months)});
  out.close();
  finish_stage("sweep-classification", digest, inputs, outputs, {});
}

void Pipeline::synth() {
  const std::string dir = out_ + "/synth";
  const std::vector<std::string> outputs = {dir + "/panel.csv", dir + "/factors.csv",
                                            dir + "/scheme.csv", dir + "/ground_truth.json"};
  const uint64_t digest = stage_digest("synth", std::to_string(config_.synth.seed), {});
  if (stage_fresh("synth", digest, outputs)) return;
  SynthPanel panel = generate_panel(config_.synth);
  SynthMacro macro = generate_macro(config_.synth, panel);
  write_synth_bundle(config_.synth, panel, macro, dir);
  finish_stage("synth", digest, {}, outputs,
               {{"generator", "splitmix64 counter streams"},
                {"normals", "box-muller"}});
}

void Pipeline::all() {
  ingest_check();
  dispersion();
  betas();
  sort();
  alphas();
  fmb();
  spanning();
  if (!config_.inputs.unemployment.empty() || !config_.inputs.lt_unemployment.empty() ||
      !config_.inputs.st_unemployment.empty())
    predict_macro();
  if (!config_.inputs.employment_industries.empty() &&
      !config_.inputs.employment_aggregate.empty())
    predict_employment();
}

}  // namespace cidlab
