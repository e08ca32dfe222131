#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "natsel/data.hpp"
#include "natsel/imageops.hpp"
#include "natsel/loss.hpp"
#include "natsel/model.hpp"
#include "natsel/weighting.hpp"

namespace natsel {

struct Milestone {
  std::size_t epoch = 0;
  double factor = 0.1;
  bool operator==(const Milestone&) const = default;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::vector<Milestone> milestones;  // lr is multiplied by factor from `epoch` on
  GridLayout layout{2, 2};            // group size m = rows * cols
  bool ns_enabled = true;             // false: no NS scoring at all, every weight is 1
  WeightingConfig weighting;
  SamplerConfig sampler;
  LossConfig loss;
  std::uint64_t seed = 0;

  void validate() const;
  double learning_rate_at(std::size_t epoch) const;
  std::size_t group_size() const { return layout.size(); }
  bool operator==(const TrainConfig&) const = default;
};

struct MetricsRecord {
  std::size_t epoch = 0;
  Split split = Split::train;
  double mean_loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> class_accuracy;      // NaN for classes absent from the split
  std::vector<std::size_t> class_counts;
  std::vector<double> class_ns_score;      // mean NS score per class this epoch; NaN if none
  double wall_seconds = 0.0;               // training time of the epoch (evaluation excluded)
  double ns_seconds = 0.0;                 // part of wall_seconds spent on NS scoring
  std::size_t train_forward = 0;           // per-sample forward passes with a tape, this epoch
  std::size_t ns_forward = 0;              // composite inferences, this epoch

  double balanced_accuracy() const;
};

struct EvalResult {
  double mean_loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> class_accuracy;
  std::vector<std::size_t> class_counts;
};

// Unweighted evaluation: argmax of the logits, ties to the smallest class index.
EvalResult evaluate(const Classifier& model, const Dataset& dataset, const ChannelStats& stats,
                    const LossConfig& loss = {});

// (1/B) * sum_i w_i * l_i
double weighted_batch_loss(std::span<const double> losses, std::span<const double> weights);

struct MomentumState {
  std::vector<Tensor> velocity;
};

// v <- mu * v + g;  theta <- theta - lr * v
void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads, MomentumState& state,
                       double learning_rate, double momentum);

struct ScoreRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::int64_t group_id = 0;
  std::size_t sample_index = 0;  // index into the training set
  int label = 0;
  double raw = 0.0;
  double score = 0.0;
  double weight = 0.0;
};

struct TrainHooks {
  std::function<void(const ScoreRow&)> on_score;  // per-sample NS dump
};

struct TrainResult {
  Classifier model;
  std::vector<MetricsRecord> metrics;  // per epoch: train row, then test row
};

// Per epoch: shuffle with a seed derived from (cfg.seed, epoch), then for every
// batch score it with the pre-update parameters, weight, backpropagate the
// weighted mean loss and take one SGD step; finally evaluate both splits.
// Throws TrainingAborted on a non-finite loss or parameter.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& test_set, Classifier model,
                  const TrainHooks& hooks = {});

struct DualityReport {
  std::vector<double> mean_risk;     // (1/N) sum_i l_i per setting
  std::vector<double> mean_fitness;  // (1/N) sum_i (M - l_i) per setting
  std::vector<double> risk_rank;     // ascending average ranks
  std::vector<double> fitness_rank;
  double spearman = 0.0;             // between fitness_rank and risk_rank
  bool reversed = false;             // pairwise order of fitness is exactly reversed
  bool fitness_positive = false;     // every per-sample fitness M - l_i > 0
};

DualityReport duality_check(const std::vector<std::vector<double>>& per_sample_losses, double fitness_offset);
DualityReport duality_check(std::span<const Classifier> models, const Dataset& dataset, const ChannelStats& stats,
                            double fitness_offset, const LossConfig& loss = {});

}  // namespace natsel
