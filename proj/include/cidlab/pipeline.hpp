#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cidlab/battery.hpp"
#include "cidlab/beta.hpp"
#include "cidlab/config.hpp"
#include "cidlab/dispersion.hpp"
#include "cidlab/industry.hpp"
#include "cidlab/panel.hpp"
#include "cidlab/portfolio.hpp"
#include "cidlab/synth.hpp"

namespace cidlab {

// In-memory run of dispersion -> innovations -> rolling betas -> sorted
// portfolios for one measure. Shared by the CLI stages, the sweep and the
// acceptance suite.
struct MeasureOutcome {
  DispersionSeries dispersion;
  InnovationSeries innovations;
  BetaPanel betas;
  SortResult sort_ew;
  SortResult sort_vw;
};

MeasureOutcome run_measure_pipeline(const ReturnPanel& classified,
                                    const IndustryScheme& scheme,
                                    const FactorTable& factors,
                                    const DispersionSection& dispersion_cfg,
                                    const std::string& measure, const BetaConfig& beta_cfg,
                                    int quantiles, const std::vector<double>& breakpoints);

// Characteristic providers computable from the panel and a beta panel:
// beta (the sort key), size (log formation cap), mom122, vol12m.
CharacteristicFn make_characteristic(const std::string& name, const ReturnPanel& panel,
                                     const BetaPanel& betas);

// Stage orchestrator behind the CLI: reads configured inputs, writes CSV
// outputs plus a manifest, and skips stages whose input digests are
// unchanged (unless forced).
class Pipeline {
 public:
  Pipeline(RunConfig config, bool force);

  // Subcommand entry points; names match the CLI.
  void ingest_check();
  void dispersion();
  void betas();
  void sort();
  void alphas();
  void fmb();
  void spanning();
  void predict_macro();
  void predict_employment();
  void sweep_classification();
  void synth();
  void all();

  const std::string& out_dir() const { return out_; }

 private:
  bool stage_fresh(const std::string& stage, uint64_t digest,
                   const std::vector<std::string>& outputs) const;
  void finish_stage(const std::string& stage, uint64_t digest,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::map<std::string, std::string>& conventions);
  uint64_t stage_digest(const std::string& stage, const std::string& config_slice,
                        const std::vector<std::string>& input_files) const;

  const ReturnPanel& prepared_panel();
  const FactorTable& factor_table();
  const IndustryScheme& industry_scheme();
  InnovationSeries load_innovations(const std::string& measure);
  BetaPanel beta_panel_for(const std::string& measure);

  std::string innovations_path(const std::string& measure) const;
  std::string betas_path(const std::string& measure) const;
  // Candidate factor measure for the spanning test: the configured double
  // sort's second key when it is a dispersion measure, else the other
  // dispersion measure.
  std::string spanning_secondary() const;

  RunConfig config_;
  std::string out_;
  bool force_ = false;

  std::optional<ReturnPanel> panel_;
  std::optional<FactorTable> factors_;
  std::optional<IndustryScheme> scheme_;
};

}  // namespace cidlab
