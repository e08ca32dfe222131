#include "natsel/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "natsel/analysis.hpp"
#include "natsel/csv.hpp"
#include "natsel/digest.hpp"
#include "natsel/error.hpp"
#include "natsel/random.hpp"

namespace natsel {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  return in;
}

void check_shape(const Dataset& ds, const DataConfig& data, const std::string& what) {
  if (ds.shape != data.shape) {
    throw FormatError(what + ": images are " + std::to_string(ds.shape.height) + "x" + std::to_string(ds.shape.width) +
                      "x" + std::to_string(ds.shape.channels) + " but the config says " +
                      std::to_string(data.shape.height) + "x" + std::to_string(data.shape.width) + "x" +
                      std::to_string(data.shape.channels));
  }
  if (ds.num_classes != data.num_classes) {
    throw FormatError(what + ": " + std::to_string(ds.num_classes) + " classes but the config says " +
                      std::to_string(data.num_classes));
  }
}

std::vector<std::size_t> train_counts(const DataConfig& data) {
  if (data.n_max > 0) return longtail_counts(data.n_max, data.num_classes, data.imbalance_factor);
  return std::vector<std::size_t>(data.num_classes, data.per_class);
}

double mean_of(const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string sweep_dir_name(SweepAxis axis, const std::string& value) { return to_string(axis) + "_" + value; }

}  // namespace

SplitData prepare_data(const ExperimentConfig& config, std::uint64_t seed) {
  const DataConfig& data = config.data;
  SplitData out;
  switch (data.kind) {
    case DatasetKind::synthetic_blobs: {
      DatasetRecipe recipe;
      recipe.kind = DatasetKind::synthetic_blobs;
      recipe.num_classes = data.num_classes;
      recipe.shape = data.shape;
      recipe.pixel_noise = data.pixel_noise;
      recipe.seed = derive_seed(seed, "data");
      recipe.per_class = train_counts(data);
      out.train = gen_synthetic(recipe, Split::train);
      recipe.per_class.assign(data.num_classes, data.test_per_class);
      out.test = gen_synthetic(recipe, Split::test);
      break;
    }
    case DatasetKind::idx_files:
      out.train = load_idx(data.train_images, data.train_labels, data.num_classes);
      out.test = load_idx(data.test_images, data.test_labels, data.num_classes);
      break;
    case DatasetKind::cifar_binary:
      out.train = load_cifar_binary(data.train_file, data.cifar_variant);
      out.test = load_cifar_binary(data.test_file, data.cifar_variant);
      break;
  }
  check_shape(out.train, data, "train split");
  check_shape(out.test, data, "test split");
  if (data.kind != DatasetKind::synthetic_blobs && data.n_max > 0) {
    out.train = subsample_per_class(out.train, train_counts(data));
  }
  if (data.label_noise > 0.0) {
    out.train = inject_label_noise(std::move(out.train), data.label_noise, derive_seed(seed, "label-noise"));
  }
  return out;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& metrics, std::size_t num_classes) {
  out << "epoch,split,mean_loss,accuracy,balanced_accuracy";
  for (const char* prefix : {"class_accuracy_", "class_count_", "class_ns_score_"}) {
    for (std::size_t k = 0; k < num_classes; ++k) out << ',' << prefix << k;
  }
  out << ",train_forward,ns_forward\n";
  for (const MetricsRecord& r : metrics) {
    if (r.class_accuracy.size() != num_classes || r.class_counts.size() != num_classes ||
        r.class_ns_score.size() != num_classes) {
      throw ShapeError("write_metrics_csv: per-class vectors do not match the class count");
    }
    out << r.epoch << ',' << to_string(r.split) << ',' << format_number(r.mean_loss) << ','
        << format_number(r.accuracy) << ',' << format_number(r.balanced_accuracy());
    for (double a : r.class_accuracy) out << ',' << format_number(a);
    for (std::size_t c : r.class_counts) out << ',' << c;
    for (double s : r.class_ns_score) out << ',' << format_number(s);
    out << ',' << r.train_forward << ',' << r.ns_forward << '\n';
  }
}

double ns_overhead(const MetricsRecord& r) {
  const double rest = r.wall_seconds - r.ns_seconds;
  return rest > 0.0 ? r.ns_seconds / rest : kNaN;
}

void write_timing_csv(std::ostream& out, const std::vector<MetricsRecord>& metrics) {
  out << "epoch,wall_seconds,ns_seconds,ns_overhead\n";
  for (const MetricsRecord& r : metrics) {
    if (r.split != Split::train) continue;
    out << r.epoch << ',' << format_number(r.wall_seconds) << ',' << format_number(r.ns_seconds) << ','
        << format_number(ns_overhead(r)) << '\n';
  }
}

void write_score_header(std::ostream& out) { out << "epoch,step,group_id,sample_index,label,raw,score,weight\n"; }

void write_score_row(std::ostream& out, const ScoreRow& row) {
  out << row.epoch << ',' << row.step << ',' << row.group_id << ',' << row.sample_index << ',' << row.label << ','
      << format_number(row.raw) << ',' << format_number(row.score) << ',' << format_number(row.weight) << '\n';
}

const MetricsRecord& SeedRun::final_record(Split split) const {
  for (auto it = metrics.rbegin(); it != metrics.rend(); ++it) {
    if (it->split == split) return *it;
  }
  throw std::out_of_range("run has no " + to_string(split) + " metrics");
}

std::vector<AggregateRow> aggregate(const std::vector<SeedRun>& runs, std::size_t num_classes) {
  if (runs.empty()) throw std::invalid_argument("aggregate: no runs");
  std::vector<std::pair<std::string, std::vector<double>>> series;
  auto add = [&](const std::string& name, auto get) {
    std::vector<double> xs;
    for (const SeedRun& run : runs) xs.push_back(get(run));
    series.emplace_back(name, std::move(xs));
  };
  add("test_accuracy", [](const SeedRun& r) { return r.final_record(Split::test).accuracy; });
  add("test_balanced_accuracy", [](const SeedRun& r) { return r.final_record(Split::test).balanced_accuracy(); });
  add("test_mean_loss", [](const SeedRun& r) { return r.final_record(Split::test).mean_loss; });
  add("train_accuracy", [](const SeedRun& r) { return r.final_record(Split::train).accuracy; });
  add("train_mean_loss", [](const SeedRun& r) { return r.final_record(Split::train).mean_loss; });
  for (std::size_t k = 0; k < num_classes; ++k) {
    add("test_class_accuracy_" + std::to_string(k),
        [k](const SeedRun& r) { return r.final_record(Split::test).class_accuracy.at(k); });
  }
  std::vector<AggregateRow> rows;
  for (auto& [name, xs] : series) {
    AggregateRow row;
    row.metric = name;
    row.n = xs.size();
    row.mean = mean_of(xs);
    row.stddev = sample_std(xs, row.mean);
    row.single_seed = xs.size() == 1;
    rows.push_back(row);
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "metric,mean,std,n,single_seed\n";
  for (const AggregateRow& r : rows) {
    out << r.metric << ',' << format_number(r.mean) << ',' << format_number(r.stddev) << ',' << r.n << ','
        << (r.single_seed ? 1 : 0) << '\n';
  }
}

const AggregateRow& find_metric(const std::vector<AggregateRow>& rows, const std::string& metric) {
  for (const AggregateRow& r : rows) {
    if (r.metric == metric) return r;
  }
  throw std::out_of_range("no aggregate metric '" + metric + "'");
}

SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed, const std::optional<fs::path>& dir) {
  config.validate();
  const SplitData data = prepare_data(config, seed);
  Classifier model(config.classifier_config(seed));

  std::ofstream scores;
  TrainHooks hooks;
  if (dir) {
    fs::create_directories(*dir);
    if (config.dump_scores && config.train.ns_enabled) {
      scores = open_out(*dir / "scores.csv");
      write_score_header(scores);
      hooks.on_score = [&scores](const ScoreRow& row) { write_score_row(scores, row); };
    }
  }
  TrainResult result = train(config.train_config(seed), data.train, data.test, std::move(model), hooks);

  SeedRun run;
  run.seed = seed;
  run.metrics = std::move(result.metrics);
  run.parameter_digest = parameter_digest(result.model);
  if (dir) {
    auto metrics = open_out(*dir / "metrics.csv");
    write_metrics_csv(metrics, run.metrics, config.data.num_classes);
    auto timing = open_out(*dir / "timing.csv");
    write_timing_csv(timing, run.metrics);
    auto ckpt = open_out(*dir / "checkpoint.bin", std::ios::out | std::ios::binary);
    save_checkpoint(ckpt, result.model);
  }
  return run;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const fs::path root = config.output_dir;
  fs::create_directories(root);
  {
    auto echo = open_out(root / "config.ini");
    echo << serialize(config);
  }
  ExperimentResult result;
  for (std::uint64_t seed : config.seeds) {
    SeedRun run = run_seed(config, seed, root / ("seed_" + std::to_string(seed)));
    if (log) {
      const MetricsRecord& test = run.final_record(Split::test);
      *log << config.label << " seed " << seed << ": test accuracy " << format_number(test.accuracy)
           << ", balanced " << format_number(test.balanced_accuracy()) << '\n';
    }
    result.runs.push_back(std::move(run));
  }
  result.aggregate = aggregate(result.runs, config.data.num_classes);
  {
    auto out = open_out(root / "aggregate.csv");
    write_aggregate_csv(out, result.aggregate);
  }
  {
    auto out = open_out(root / "timing.csv");
    out << "seed,epochs,wall_seconds,ns_seconds,ns_overhead\n";
    for (const SeedRun& run : result.runs) {
      MetricsRecord total;
      for (const MetricsRecord& r : run.metrics) {
        if (r.split != Split::train) continue;
        total.wall_seconds += r.wall_seconds;
        total.ns_seconds += r.ns_seconds;
      }
      out << run.seed << ',' << config.train.epochs << ',' << format_number(total.wall_seconds) << ','
          << format_number(total.ns_seconds) << ',' << format_number(ns_overhead(total)) << '\n';
    }
  }
  if (log) {
    for (const char* name : {"test_accuracy", "test_balanced_accuracy"}) {
      const AggregateRow& row = find_metric(result.aggregate, name);
      *log << config.label << " " << name << ": " << format_number(row.mean) << " +- " << format_number(row.stddev)
           << " over " << row.n << (row.single_seed ? " seed (single-seed run)" : " seeds") << '\n';
    }
  }
  return result;
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::sigma: return "sigma";
    case SweepAxis::rho: return "rho";
    case SweepAxis::layout: return "layout";
  }
  return "?";
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "sigma") return SweepAxis::sigma;
  if (text == "rho") return SweepAxis::rho;
  if (text == "layout") return SweepAxis::layout;
  throw ConfigError("unknown sweep axis '" + text + "' (expected sigma, rho or layout)");
}

std::vector<std::string> default_sweep_values(SweepAxis axis) {
  if (axis == SweepAxis::layout) return {"1x2", "2x2", "2x4", "4x2", "4x4"};
  return {"0", "0.1", "0.5", "0.8", "1", "1.5", "1.8"};
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& config, SweepAxis axis, const std::string& value) {
  ExperimentConfig c = config;
  switch (axis) {
    case SweepAxis::sigma:
      c.train.weighting.sigma = parse_config_number(value);
      break;
    case SweepAxis::rho:
      c.train.weighting.rho = parse_config_number(value);
      c.train.weighting.strategy = strategy_for_rho(c.train.weighting.rho);
      break;
    case SweepAxis::layout:
      c.train.layout = parse_layout(value);
      break;
  }
  c.output_dir = config.output_dir / sweep_dir_name(axis, value);
  c.validate();
  return c;
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<std::string>& values,
                            std::ostream* log) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  // Validate every point before spending time on any run.
  std::vector<SweepRow> rows;
  for (const std::string& v : values) rows.push_back(SweepRow{v, apply_sweep_value(config, axis, v), {}});
  for (SweepRow& row : rows) {
    row.aggregate = run_experiment(row.config, log).aggregate;
  }
  fs::create_directories(config.output_dir);
  auto out = open_out(config.output_dir / ("sweep_" + to_string(axis) + ".csv"));
  write_sweep_csv(out, axis, rows);
  return rows;
}

void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<SweepRow>& rows) {
  out << to_string(axis)
      << ",strategy,sigma,rho,layout,group_size,seeds,test_accuracy_mean,test_accuracy_std,"
         "test_balanced_accuracy_mean,test_balanced_accuracy_std\n";
  for (const SweepRow& row : rows) {
    const WeightingConfig& w = row.config.train.weighting;
    const AggregateRow& acc = find_metric(row.aggregate, "test_accuracy");
    const AggregateRow& bal = find_metric(row.aggregate, "test_balanced_accuracy");
    out << row.value << ',' << to_string(w.strategy) << ',' << format_number(w.sigma) << ',' << format_number(w.rho)
        << ',' << to_string(row.config.train.layout) << ',' << row.config.train.layout.size() << ',' << acc.n << ','
        << format_number(acc.mean) << ',' << format_number(acc.stddev) << ',' << format_number(bal.mean) << ','
        << format_number(bal.stddev) << '\n';
  }
}

AnalysisSummary analyze_run(const fs::path& run_dir, const fs::path& out_dir, std::optional<std::size_t> epoch) {
  CsvTable metrics, scores;
  {
    auto in = open_in(run_dir / "metrics.csv");
    metrics = read_csv(in);
  }
  {
    auto in = open_in(run_dir / "scores.csv");
    scores = read_csv(in);
  }
  std::size_t k = 0;
  while (std::find(metrics.header.begin(), metrics.header.end(), "class_accuracy_" + std::to_string(k)) !=
         metrics.header.end()) {
    ++k;
  }
  if (k < 2) throw FormatError("metrics.csv has no per-class columns");

  const std::size_t c_epoch = scores.column("epoch"), c_label = scores.column("label"),
                    c_score = scores.column("score");
  if (scores.rows.empty()) throw FormatError("scores.csv is empty");
  std::size_t chosen = 0;
  for (const auto& row : scores.rows) chosen = std::max<std::size_t>(chosen, std::stoul(row[c_epoch]));
  if (epoch) chosen = *epoch;

  std::vector<double> s;
  std::vector<int> labels;
  for (const auto& row : scores.rows) {
    if (std::stoul(row[c_epoch]) != chosen) continue;
    s.push_back(parse_number(row[c_score]));
    labels.push_back(std::stoi(row[c_label]));
  }
  if (s.empty()) throw FormatError("scores.csv has no rows for epoch " + std::to_string(chosen));

  std::vector<std::size_t> counts(k, 0);
  std::vector<double> acc(k, kNaN);
  const std::size_t m_epoch = metrics.column("epoch"), m_split = metrics.column("split");
  bool have_train = false;
  for (const auto& row : metrics.rows) {
    if (std::stoul(row[m_epoch]) != chosen) continue;
    for (std::size_t c = 0; c < k; ++c) {
      if (row[m_split] == "train") {
        counts[c] = std::stoul(row[metrics.column("class_count_" + std::to_string(c))]);
        have_train = true;
      } else if (row[m_split] == "test") {
        acc[c] = parse_number(row[metrics.column("class_accuracy_" + std::to_string(c))]);
      }
    }
  }
  if (!have_train) throw FormatError("metrics.csv has no train row for epoch " + std::to_string(chosen));

  const auto dist = ns_distribution(s, labels, k);
  const CorrelationReport report = correlation_report(dist, counts, acc);
  fs::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "box.csv");
    write_box_csv(out, dist);
  }
  {
    auto out = open_out(out_dir / "scatter.csv");
    write_scatter_csv(out, report);
  }
  {
    auto out = open_out(out_dir / "fit.csv");
    write_fit_csv(out, report);
  }
  {
    auto out = open_out(out_dir / "classes.csv");
    write_class_csv(out, report);
  }
  return AnalysisSummary{chosen, k, s.size()};
}

}  // namespace natsel
