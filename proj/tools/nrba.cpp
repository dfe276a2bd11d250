#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nrba/errors.hpp"
#include "nrba/pipeline.hpp"
#include "nrba/report.hpp"
#include "nrba/simlab.hpp"
#include "nrba/synthetic.hpp"

namespace fs = std::filesystem;
using nrba::report::fmt;

namespace {

struct SimulateOptions {
  std::size_t reps = 500;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::vector<std::string> cells;  // empty = all eight
  nrba::simlab::CellStrengths strengths;
  std::string output = "table1_cells.csv";
};

SimulateOptions load_simulate_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw nrba::ParseError("cannot open config: " + path);
  nlohmann::json j;
  in >> j;
  SimulateOptions o;
  if (j.contains("reps")) o.reps = j["reps"].get<std::size_t>();
  if (j.contains("n")) o.n = j["n"].get<std::size_t>();
  if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("cells")) {
    for (const auto& c : j["cells"]) o.cells.push_back(c.get<std::string>());
  }
  if (j.contains("low")) o.strengths.low = j["low"].get<double>();
  if (j.contains("high")) o.strengths.high = j["high"].get<double>();
  if (j.contains("response_rate")) {
    o.strengths.response_rate = j["response_rate"].get<double>();
  }
  if (j.contains("mi_m")) o.strengths.mi_m = j["mi_m"].get<std::size_t>();
  if (j.contains("output")) o.output = j["output"].get<std::string>();
  if (!fs::path(o.output).is_absolute()) {
    o.output = (fs::path(path).parent_path() / o.output).string();
  }
  return o;
}

void write_cell_table(const std::vector<nrba::simlab::CellRun>& runs,
                      const std::string& path) {
  nrba::report::Table t({"cell", "method", "bias", "variance", "mcse",
                         "abs_bias_ratio_vs_cc", "var_ratio_vs_cc",
                         "mean_response_rate", "reps"});
  for (const auto& run : runs) {
    const auto& cc = run.methods.front();
    for (const auto& m : run.methods) {
      t.add_row({run.cell, m.method, fmt(m.bias), fmt(m.variance), fmt(m.mcse),
                 fmt(std::abs(m.bias) / std::abs(cc.bias)),
                 fmt(m.variance / cc.variance), fmt(run.mean_response_rate),
                 fmt(static_cast<double>(m.reps))});
    }
  }
  t.write(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonresponse bias analysis toolkit"};
  app.require_subcommand(1);

  // analyze
  std::string analyze_config;
  std::string analyze_out;
  std::uint64_t analyze_seed = 0;
  bool analyze_seed_set = false;
  std::vector<double> analyze_phi;
  auto* analyze = app.add_subcommand("analyze", "run the ten-step analysis");
  analyze->add_option("-c,--config", analyze_config, "analysis config (JSON)")->required();
  analyze->add_option("-o,--out", analyze_out, "output directory override");
  analyze->add_option("--seed", analyze_seed, "seed override")->each([&](const std::string&) {
    analyze_seed_set = true;
  });
  analyze->add_option("--phi", analyze_phi, "phi grid override");

  // patterns
  std::string patterns_config;
  std::string patterns_out;
  auto* patterns = app.add_subcommand("patterns", "missing-data pattern summary only");
  patterns->add_option("-c,--config", patterns_config, "analysis config (JSON)")->required();
  patterns->add_option("-o,--out", patterns_out, "output directory override");

  // simulate
  std::string sim_config;
  std::string sim_out;
  bool sim_serial = false;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo cell grid (CC/IPW/MI)");
  simulate->add_option("-c,--config", sim_config, "simulation config (JSON)")->required();
  simulate->add_option("-o,--out", sim_out, "output file override");
  simulate->add_flag("--serial", sim_serial, "run the serial reference path");

  // synth
  std::string synth_dir = ".";
  std::uint64_t synth_seed = nrba::simlab::kSyntheticSeed;
  auto* synth = app.add_subcommand("synth", "write the bundled synthetic study");
  synth->add_option("-o,--out", synth_dir, "output directory");
  synth->add_option("--seed", synth_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) {
      auto cfg = nrba::pipeline::load_config(analyze_config);
      if (!analyze_out.empty()) cfg.output_dir = analyze_out;
      if (analyze_seed_set) cfg.seed = analyze_seed;
      if (!analyze_phi.empty()) cfg.phi_grid = analyze_phi;
      const auto report = nrba::pipeline::run_pipeline(cfg);
      std::cout << "wrote " << report.artifacts.size() << " artifacts to "
                << cfg.output_dir << "\n";
      for (const auto& w : report.warnings) {
        std::cout << "warning [" << w.code << "] " << w.message << "\n";
      }
    } else if (*patterns) {
      auto cfg = nrba::pipeline::load_config(patterns_config);
      if (!patterns_out.empty()) cfg.output_dir = patterns_out;
      const auto pattern = nrba::pipeline::run_patterns(cfg);
      std::cout << "n=" << pattern.n << " columns=" << pattern.column_names.size()
                << " pattern_classes=" << pattern.classes.size()
                << " monotone=" << (pattern.monotone ? "true" : "false") << "\n";
    } else if (*simulate) {
      auto opt = load_simulate_config(sim_config);
      if (!sim_out.empty()) opt.output = sim_out;
      const auto mode = sim_serial ? nrba::simlab::ExecMode::Serial
                                   : nrba::simlab::ExecMode::Parallel;
      std::vector<nrba::simlab::CellRun> runs;
      if (opt.cells.empty()) {
        runs = nrba::simlab::run_cell_grid(opt.reps, opt.n, opt.seed, opt.strengths, mode);
      } else {
        for (std::size_t i = 0; i < opt.cells.size(); ++i) {
          runs.push_back(nrba::simlab::run_cell(
              nrba::simlab::CellConfig::from_code(opt.cells[i]), opt.reps, opt.n,
              opt.seed + i * 0x10000000ULL, opt.strengths, mode));
        }
      }
      write_cell_table(runs, opt.output);
      std::cout << "wrote " << opt.output << "\n";
    } else if (*synth) {
      const auto paths = nrba::simlab::write_synthetic_survey(synth_dir, synth_seed);
      std::cout << "wrote " << paths.data_csv << "\n";
      std::cout << "wrote " << paths.config_json << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
