// natsel: experiment runner for NS-weighted training.
//
//   natsel run     --config FILE [overrides]
//   natsel sweep   --config FILE --axis sigma|rho|layout [--values v,...] [overrides]
//   natsel analyze --run DIR [--out DIR] [--epoch E]
//   natsel curve   --strategy S --sigma X --rho X [--n N] [--group-size M] [--out FILE]
//   natsel config  --config FILE [overrides]      (prints the config with defaults)
//
// Exit status: 0 success, 1 invalid configuration or arguments, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "natsel/config.hpp"
#include "natsel/csv.hpp"
#include "natsel/error.hpp"
#include "natsel/experiment.hpp"
#include "natsel/weighting.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

struct Overrides {
  std::optional<std::string> strategy;
  std::optional<double> sigma;
  std::optional<double> rho;
  std::optional<std::size_t> group_size;
  std::optional<std::string> layout;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> out;
  std::optional<std::string> label;

  void attach(CLI::App* cmd) {
    cmd->add_option("--strategy", strategy, "uniform | ns_ws | ns_lf | focal_like");
    cmd->add_option("--sigma", sigma, "base weight sigma");
    cmd->add_option("--rho", rho, "score coefficient rho");
    cmd->add_option("-m,--group-size", group_size, "group size m (layout defaults to the most square RxC)");
    cmd->add_option("--layout", layout, "group layout RxC");
    cmd->add_option("--seeds", seeds, "seed list")->delimiter(',');
    cmd->add_option("-o,--out", out, "output directory");
    cmd->add_option("--label", label, "run label");
  }

  void apply(natsel::ExperimentConfig& cfg) const {
    using natsel::ConfigError;
    if (strategy) {
      auto& w = cfg.train.weighting;
      w.strategy = natsel::parse_strategy(*strategy);
      // Keep the configured rho if it fits the new strategy, else use its default.
      if (!rho && natsel::strategy_for_rho(w.rho) != natsel::strategy_for_rho(natsel::default_rho(w.strategy))) {
        w.rho = natsel::default_rho(w.strategy);
      }
    }
    if (sigma) cfg.train.weighting.sigma = *sigma;
    if (rho) {
      cfg.train.weighting.rho = *rho;
      if (!strategy) cfg.train.weighting.strategy = natsel::strategy_for_rho(*rho);
    }
    if (layout) cfg.train.layout = natsel::parse_layout(*layout);
    if (group_size) {
      if (!layout) {
        cfg.train.layout = natsel::layout_for_group_size(*group_size);
      } else if (cfg.train.layout.size() != *group_size) {
        throw ConfigError("group size " + std::to_string(*group_size) + " does not match layout " + *layout);
      }
    }
    if (!seeds.empty()) cfg.seeds = seeds;
    if (out) cfg.output_dir = *out;
    if (label) cfg.label = *label;
    cfg.validate();
  }
};

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const natsel::ConfigError& e) {
    std::cerr << "natsel: invalid configuration: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const natsel::TrainingAborted& e) {
    std::cerr << "natsel: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "natsel: error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Natural-selection sample weighting: training runs, sweeps and analyses"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;

  auto* run = app.add_subcommand("run", "train every seed of a config and aggregate");
  run->add_option("-c,--config", config_path, "experiment config (INI)")->required()->check(CLI::ExistingFile);
  overrides.attach(run);

  auto* sweep = app.add_subcommand("sweep", "one experiment per axis value plus a comparison CSV");
  std::string axis;
  std::vector<std::string> values;
  sweep->add_option("-c,--config", config_path, "experiment config (INI)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "sigma | rho | layout")->required();
  sweep->add_option("--values", values, "axis values (default: the reference grid)")->delimiter(',');
  overrides.attach(sweep);

  auto* analyze = app.add_subcommand("analyze", "NS-score distribution and correlation CSVs from a finished run");
  std::string run_dir, analysis_out;
  std::optional<std::size_t> epoch;
  analyze->add_option("--run", run_dir, "seed directory holding metrics.csv and scores.csv")
      ->required()
      ->check(CLI::ExistingDirectory);
  analyze->add_option("-o,--out", analysis_out, "output directory (default: <run>/analysis)");
  analyze->add_option("--epoch", epoch, "epoch to analyze (default: last)");

  auto* curve = app.add_subcommand("curve", "weight-versus-rank curve as CSV (rank,weight)");
  std::string curve_strategy = "ns_ws", curve_out;
  double curve_sigma = 1.0, curve_rho = 1.0;
  std::size_t curve_n = 256, curve_m = 4;
  std::uint64_t curve_seed = 2024;
  curve->add_option("--strategy", curve_strategy, "uniform | ns_ws | ns_lf | focal_like");
  curve->add_option("--sigma", curve_sigma, "base weight sigma");
  curve->add_option("--rho", curve_rho, "score coefficient rho");
  curve->add_option("--n", curve_n, "number of simulated samples");
  curve->add_option("-m,--group-size", curve_m, "group size of the simulated scores");
  curve->add_option("--seed", curve_seed, "seed of the simulated scores");
  curve->add_option("-o,--out", curve_out, "output file (default: stdout)");

  auto* echo = app.add_subcommand("config", "print a config with every default filled in");
  echo->add_option("-c,--config", config_path, "experiment config (INI)")->required()->check(CLI::ExistingFile);
  overrides.attach(echo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  auto load = [&] {
    natsel::ExperimentConfig cfg = natsel::load_config(config_path);
    overrides.apply(cfg);
    return cfg;
  };

  if (run->parsed()) {
    return run_guarded([&] {
      const auto cfg = load();
      natsel::run_experiment(cfg, &std::cout);
      std::cout << "artifacts in " << cfg.output_dir.string() << '\n';
    });
  }
  if (sweep->parsed()) {
    return run_guarded([&] {
      const auto cfg = load();
      const auto ax = natsel::parse_sweep_axis(axis);
      const auto rows = natsel::sweep(cfg, ax, values.empty() ? natsel::default_sweep_values(ax) : values, &std::cout);
      natsel::write_sweep_csv(std::cout, ax, rows);
    });
  }
  if (analyze->parsed()) {
    return run_guarded([&] {
      const std::filesystem::path out = analysis_out.empty() ? std::filesystem::path(run_dir) / "analysis" : std::filesystem::path(analysis_out);
      const auto summary = natsel::analyze_run(run_dir, out, epoch);
      std::cout << "analyzed epoch " << summary.epoch << ": " << summary.scores << " scores over "
                << summary.num_classes << " classes -> " << out.string() << '\n';
    });
  }
  if (curve->parsed()) {
    return run_guarded([&] {
      natsel::WeightingConfig w;
      w.strategy = natsel::parse_strategy(curve_strategy);
      w.sigma = curve_sigma;
      w.rho = w.strategy == natsel::Strategy::uniform ? 0.0 : curve_rho;
      const auto points = natsel::weight_curve(curve_n, w, curve_m, curve_seed);
      std::ofstream file;
      if (!curve_out.empty()) {
        file.open(curve_out);
        if (!file) throw std::runtime_error("cannot write " + curve_out);
      }
      std::ostream& out = curve_out.empty() ? std::cout : file;
      out << "rank,weight\n";
      for (const auto& p : points) out << p.rank << ',' << natsel::format_number(p.weight) << '\n';
    });
  }
  if (echo->parsed()) {
    return run_guarded([&] { std::cout << natsel::serialize(load()); });
  }
  return kExitInvalid;
}
