#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "natsel/config.hpp"
#include "natsel/data.hpp"
#include "natsel/trainer.hpp"

namespace natsel {

struct SplitData {
  Dataset train;
  Dataset test;
};

// Builds (or loads) both splits for one run seed. Synthetic data uses the
// dataset seed derive_seed(seed, "data"); label noise uses
// derive_seed(seed, "label-noise") and only touches the train split.
SplitData prepare_data(const ExperimentConfig& config, std::uint64_t seed);

// metrics.csv: one row per (epoch, split). Only deterministic fields are
// written, so reruns are byte-identical; timings go to timing.csv.
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& metrics, std::size_t num_classes);
// timing.csv: epoch,wall_seconds,ns_seconds,ns_overhead (train rows only)
void write_timing_csv(std::ostream& out, const std::vector<MetricsRecord>& metrics);
// epoch,step,group_id,sample_index,label,raw,score,weight
void write_score_header(std::ostream& out);
void write_score_row(std::ostream& out, const ScoreRow& row);

// NS wall-clock time over the rest of the training time: ns / (wall - ns).
double ns_overhead(const MetricsRecord& train_row);

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> metrics;
  std::string parameter_digest;

  const MetricsRecord& final_record(Split split) const;
};

struct AggregateRow {
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;  // sample std (n - 1); 0 for a single seed
  std::size_t n = 0;
  bool single_seed = false;
};

// Final-epoch metrics across seeds: train/test loss and accuracy, test
// balanced accuracy and per-class test accuracy.
std::vector<AggregateRow> aggregate(const std::vector<SeedRun>& runs, std::size_t num_classes);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
const AggregateRow& find_metric(const std::vector<AggregateRow>& rows, const std::string& metric);

struct ExperimentResult {
  std::vector<SeedRun> runs;
  std::vector<AggregateRow> aggregate;
};

// One training run. Writes metrics.csv, timing.csv, checkpoint.bin and (if
// enabled) scores.csv into `dir` when it is given.
SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed,
                 const std::optional<std::filesystem::path>& dir = std::nullopt);

// Runs every seed into <output_dir>/seed_<s>/, then writes aggregate.csv,
// timing.csv and the config echo config.ini into <output_dir>.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

enum class SweepAxis { sigma, rho, layout };
std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& text);

// Axis values used by the reference sweeps.
std::vector<std::string> default_sweep_values(SweepAxis axis);

// Copy of `config` with the axis set to `value`. A rho value also relabels the
// strategy by its sign; a layout value also sets the group size.
ExperimentConfig apply_sweep_value(const ExperimentConfig& config, SweepAxis axis, const std::string& value);

struct SweepRow {
  std::string value;
  ExperimentConfig config;
  std::vector<AggregateRow> aggregate;
};

// One run_experiment per value into <output_dir>/<axis>_<value>/, then
// <output_dir>/sweep_<axis>.csv with one row per value.
std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<std::string>& values,
                            std::ostream* log = nullptr);
void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<SweepRow>& rows);

// Analysis of a finished run directory (metrics.csv + scores.csv), no model or
// dataset involved. Writes box.csv, scatter.csv, fit.csv and classes.csv into
// `out_dir`. epoch defaults to the last epoch present in the score dump.
struct AnalysisSummary {
  std::size_t epoch = 0;
  std::size_t num_classes = 0;
  std::size_t scores = 0;
};
AnalysisSummary analyze_run(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir,
                            std::optional<std::size_t> epoch = std::nullopt);

}  // namespace natsel
