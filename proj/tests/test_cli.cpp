#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cidlab/config.hpp"
#include "cidlab/digest.hpp"
#include "cidlab/errors.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_binary;

int run_cli(const std::string& args) {
  const std::string cmd = g_binary + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / (tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string write_config(const fs::path& dir, const std::string& out_dir) {
  std::string emp_industries;
  for (int j = 1; j <= 10; ++j) {
    emp_industries += (j > 1 ? std::string(",") : std::string()) + "\"" + std::to_string(j) +
                      "\": \"" + out_dir + "/synth/employment_ind_" + std::to_string(j) +
                      ".csv\"";
  }
  const std::string config = std::string("{\n") +
      "  \"inputs\": {\n"
      "    \"panel\": \"" + out_dir + "/synth/panel.csv\",\n"
      "    \"factors\": \"" + out_dir + "/synth/factors.csv\",\n"
      "    \"scheme\": \"" + out_dir + "/synth/scheme.csv\",\n"
      "    \"unemployment\": \"" + out_dir + "/synth/unemployment.csv\",\n"
      "    \"lt_unemployment\": \"" + out_dir + "/synth/lt_unemployment.csv\",\n"
      "    \"st_unemployment\": \"" + out_dir + "/synth/st_unemployment.csv\",\n"
      "    \"employment_aggregate\": \"" + out_dir + "/synth/employment_total.csv\",\n"
      "    \"employment_industries\": {" + emp_industries + "}\n"
      "  },\n"
      "  \"dispersion\": {\"min_firms\": 5},\n"
      "  \"beta\": {\"window\": 24, \"min_obs\": 18},\n"
      "  \"sort\": {\"quantiles\": 5, \"double_measure\": \"wid\", \"double_bins\": [3, 3]},\n"
      "  \"battery\": {\"fmb\": {\"across\": \"portfolios\", \"quantiles\": 5,\n"
      "               \"characteristics\": [\"beta\", \"size\"]}},\n"
      "  \"sweep\": [\n"
      "    {\"label\": \"ranges\", \"scheme\": \"" + out_dir + "/synth/scheme.csv\", \"min_firms\": 5},\n"
      "    {\"label\": \"SIC2\", \"scheme\": \"SIC2\", \"min_firms\": 5}\n"
      "  ],\n"
      "  \"synth\": {\"n_stocks\": 120, \"n_industries\": 10, \"n_months\": 120, \"seed\": 9},\n"
      "  \"output_dir\": \"" + out_dir + "\"\n"
      "}\n";
  const fs::path p = dir / "config.json";
  std::ofstream out(p);
  out << config;
  return p.string();
}

}  // namespace

TEST_CASE("synth then all produces the full report bundle") {
  TempDir tmp("cidlab_cli_smoke");
  const std::string out_dir = (tmp.path / "run").string();
  const std::string config = write_config(tmp.path, out_dir);

  REQUIRE(run_cli("synth --config " + config) == 0);
  for (const std::string f : {"panel.csv", "factors.csv", "scheme.csv", "unemployment.csv",
                              "employment_total.csv", "ground_truth.json"})
    CHECK(fs::exists(fs::path(out_dir) / "synth" / f));

  REQUIRE(run_cli("all --config " + config) == 0);
  for (const std::string f :
       {"dispersion.csv", "innovations_cid.csv", "innovations_wid.csv", "betas_cid.csv",
        "portfolios.csv", "characteristics.csv", "postranking.csv", "double_sort.csv",
        "table_alphas.csv", "table_loadings.csv", "table_fmb.csv", "table_spanning.csv",
        "table_predict_unemployment.csv", "table_predict_employment.csv", "manifest.json",
        "ingest_check.json"})
    CHECK(fs::exists(fs::path(out_dir) / f));

  REQUIRE(run_cli("sweep-classification --config " + config) == 0);
  CHECK(fs::exists(fs::path(out_dir) / "table_sweep.csv"));

  // One summary row per sweep scheme plus the header.
  std::ifstream sweep(fs::path(out_dir) / "table_sweep.csv");
  int lines = 0;
  std::string line;
  while (std::getline(sweep, line)) ++lines;
  CHECK(lines == 3);
}

TEST_CASE("rerunning a stage is a cached no-op unless forced") {
  TempDir tmp("cidlab_cli_cache");
  const std::string out_dir = (tmp.path / "run").string();
  const std::string config = write_config(tmp.path, out_dir);
  REQUIRE(run_cli("synth --config " + config) == 0);
  REQUIRE(run_cli("dispersion --config " + config) == 0);
  const fs::path out = fs::path(out_dir) / "dispersion.csv";
  const auto mtime_first = fs::last_write_time(out);
  const uint64_t digest_first = cidlab::digest_file(out.string());
  REQUIRE(run_cli("dispersion --config " + config) == 0);
  CHECK(fs::last_write_time(out) == mtime_first);  // untouched
  REQUIRE(run_cli("dispersion --force --config " + config) == 0);
  CHECK(cidlab::digest_file(out.string()) == digest_first);  // rewritten, identical bytes
}

TEST_CASE("config schema violations exit 2 with field paths") {
  TempDir tmp("cidlab_cli_badcfg");
  const fs::path bad = tmp.path / "bad.json";
  {
    std::ofstream out(bad);
    out << "{\"beta\": {\"window\": -3}}";
  }
  const std::string cmd =
      g_binary + " dispersion --config " + bad.string() + " 2>" + (tmp.path / "err.txt").string();
  int status = std::system((cmd + " >/dev/null").c_str());
  CHECK(WEXITSTATUS(status) == 2);
  std::ifstream err(tmp.path / "err.txt");
  std::string text((std::istreambuf_iterator<char>(err)), std::istreambuf_iterator<char>());
  CHECK(text.find("config.beta.window") != std::string::npos);

  const fs::path unknown = tmp.path / "unknown.json";
  {
    std::ofstream out(unknown);
    out << "{\"betaa\": {}}";
  }
  CHECK(run_cli("dispersion --config " + unknown.string()) == 2);

  // Missing input files are data errors: exit 1.
  const fs::path missing = tmp.path / "missing.json";
  {
    std::ofstream out(missing);
    out << "{\"inputs\": {\"panel\": \"/nonexistent.csv\", \"factors\": \"/nonexistent2.csv\","
           "\"scheme\": \"SIC2\"}, \"output_dir\": \"" << (tmp.path / "o").string() << "\"}";
  }
  CHECK(run_cli("dispersion --config " + missing.string()) == 1);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <cidlab binary> [doctest args]\n");
    return 1;
  }
  g_binary = argv[1];
  doctest::Context context;
  context.applyCommandLine(argc - 1, argv + 1);
  return context.run();
}

TEST_CASE("running all equals running the stages one by one") {
  TempDir tmp("cidlab_cli_assoc");
  const std::string out_a = (tmp.path / "run_a").string();
  const std::string out_b = (tmp.path / "run_b").string();
  const std::string config_a = write_config(tmp.path, out_a);
  const fs::path cfg_b_path = tmp.path / "config_b.json";
  {
    // Same config but a second output directory.
    std::ifstream in(config_a);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    size_t pos;
    while ((pos = text.find(out_a)) != std::string::npos)
      text.replace(pos, out_a.size(), out_b);
    std::ofstream out(cfg_b_path);
    out << text;
  }
  REQUIRE(run_cli("synth --config " + config_a) == 0);
  REQUIRE(run_cli("all --config " + config_a) == 0);
  REQUIRE(run_cli("synth --config " + cfg_b_path.string()) == 0);
  for (const std::string stage : {"ingest-check", "dispersion", "betas", "sort", "alphas",
                                  "fmb", "spanning", "predict-macro", "predict-employment"})
    REQUIRE(run_cli(stage + " --config " + cfg_b_path.string()) == 0);
  for (const auto& entry : fs::directory_iterator(out_a)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json" || name == "ingest_check.json") continue;  // embed paths
    CAPTURE(name);
    CHECK(cidlab::digest_file(entry.path().string()) ==
          cidlab::digest_file((fs::path(out_b) / name).string()));
  }
}
