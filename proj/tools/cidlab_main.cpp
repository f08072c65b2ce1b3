// Command-line front end: runs the dispersion / beta / portfolio / test
// pipeline from a single JSON config. Exit codes: 0 ok, 1 data error,
// 2 config error, 3 internal error.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cidlab/config.hpp"
#include "cidlab/errors.hpp"
#include "cidlab/pipeline.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string out_override;
  int threads = -1;
  bool force = false;
  uint64_t seed = 0;
  bool seed_set = false;
};

int run(const std::string& command, const Options& opt) {
  cidlab::RunConfig config = cidlab::RunConfig::load(opt.config_path);
  if (!opt.out_override.empty()) {
    config.output_dir = opt.out_override;
    config.raw_text += "|out=" + opt.out_override;
  }
  if (const char* env_out = std::getenv("CIDLAB_OUT"); env_out && opt.out_override.empty()) {
    config.output_dir = env_out;
    config.raw_text += "|out=" + config.output_dir;
  }
  if (opt.threads >= 0) config.threads = opt.threads;
  if (const char* env_threads = std::getenv("CIDLAB_THREADS"); env_threads && opt.threads < 0)
    config.threads = std::max(0, std::atoi(env_threads));
  if (opt.seed_set) {
    config.synth.seed = opt.seed;
    config.raw_text += "|seed=" + std::to_string(opt.seed);
  }

  cidlab::Pipeline pipeline(std::move(config), opt.force);
  if (command == "ingest-check")
    pipeline.ingest_check();
  else if (command == "dispersion")
    pipeline.dispersion();
  else if (command == "betas")
    pipeline.betas();
  else if (command == "sort")
    pipeline.sort();
  else if (command == "alphas")
    pipeline.alphas();
  else if (command == "fmb")
    pipeline.fmb();
  else if (command == "spanning")
    pipeline.spanning();
  else if (command == "predict-macro")
    pipeline.predict_macro();
  else if (command == "predict-employment")
    pipeline.predict_employment();
  else if (command == "sweep-classification")
    pipeline.sweep_classification();
  else if (command == "synth")
    pipeline.synth();
  else if (command == "all")
    pipeline.all();
  else
    throw cidlab::ConfigError("unknown subcommand '" + command + "'");
  std::cout << command << ": done, outputs in " << pipeline.out_dir() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"industry dispersion factor laboratory"};
  app.require_subcommand(1);

  Options opt;
  const std::vector<std::string> commands = {
      "ingest-check", "dispersion", "betas",          "sort",
      "alphas",       "fmb",        "spanning",       "predict-macro",
      "predict-employment",         "sweep-classification", "synth", "all"};
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "run config (JSON)")->required();
    sub->add_option("--out", opt.out_override, "output directory override");
    sub->add_option("--threads", opt.threads, "worker thread count (0 = hardware)");
    sub->add_flag("--force", opt.force, "ignore the stage cache");
    if (name == "synth")
      sub->add_option("--seed", opt.seed, "generator seed override")
          ->each([&](const std::string&) { opt.seed_set = true; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return run(app.get_subcommands().front()->get_name(), opt);
  } catch (const cidlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cidlab::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
