#include "natsel/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "natsel/analysis.hpp"
#include "natsel/autodiff.hpp"
#include "natsel/error.hpp"
#include "natsel/nscore.hpp"
#include "natsel/random.hpp"

namespace natsel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kEvalChunk = 256;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (layout.size() < 2) throw ConfigError("group size (rows * cols) must be >= 2");
  if (batch_size < layout.size()) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " is smaller than group size " +
                      std::to_string(layout.size()));
  }
  for (const Milestone& m : milestones) {
    if (!(m.factor > 0.0) || !std::isfinite(m.factor)) throw ConfigError("milestone factors must be > 0");
  }
  weighting.validate();
  loss.validate();
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  double lr = learning_rate;
  for (const Milestone& m : milestones) {
    if (epoch >= m.epoch) lr *= m.factor;
  }
  return lr;
}

double MetricsRecord::balanced_accuracy() const {
  double total = 0.0;
  std::size_t n = 0;
  for (double a : class_accuracy) {
    if (std::isnan(a)) continue;
    total += a;
    ++n;
  }
  return n ? total / static_cast<double>(n) : kNaN;
}

EvalResult evaluate(const Classifier& model, const Dataset& dataset, const ChannelStats& stats,
                    const LossConfig& loss) {
  const std::size_t k = model.config().num_classes;
  EvalResult result;
  result.class_counts.assign(k, 0);
  std::vector<std::size_t> correct(k, 0);
  double loss_total = 0.0;
  std::size_t hits = 0;
  const std::size_t n = dataset.size();
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const std::size_t end = std::min(n, start + kEvalChunk);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = model.forward_batch(stats.apply(gather(dataset.images, idx)));
    const Tensor probs = softmax(logits);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const int y = dataset.labels[idx[r]];
      const auto row = logits.data().subspan(r * k, k);
      // max_element returns the first maximum: ties go to the smallest index.
      const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      const auto label = static_cast<std::size_t>(y);
      ++result.class_counts.at(label);
      if (pred == label) {
        ++correct[label];
        ++hits;
      }
      loss_total += per_sample_loss(probs.data().subspan(r * k, k), y, loss);
    }
  }
  result.mean_loss = n ? loss_total / static_cast<double>(n) : kNaN;
  result.accuracy = n ? static_cast<double>(hits) / static_cast<double>(n) : kNaN;
  result.class_accuracy.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    result.class_accuracy[c] =
        result.class_counts[c] ? static_cast<double>(correct[c]) / static_cast<double>(result.class_counts[c]) : kNaN;
  }
  return result;
}

double weighted_batch_loss(std::span<const double> losses, std::span<const double> weights) {
  if (losses.size() != weights.size()) throw ShapeError("weighted_batch_loss: length mismatch");
  if (losses.empty()) throw ShapeError("weighted_batch_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) total += weights[i] * losses[i];
  return total / static_cast<double>(losses.size());
}

void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads, MomentumState& state,
                       double learning_rate, double momentum) {
  if (params.size() != grads.size()) throw ShapeError("sgd_momentum_step: parameter/gradient count mismatch");
  if (state.velocity.empty()) {
    for (const Tensor& p : params) state.velocity.emplace_back(p.shape(), 0.0);
  }
  if (state.velocity.size() != params.size()) throw ShapeError("sgd_momentum_step: stale momentum state");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || params[i].shape() != state.velocity[i].shape()) {
      throw ShapeError("sgd_momentum_step: shape mismatch for parameter " + std::to_string(i));
    }
    auto v = state.velocity[i].mutable_data();
    auto p = params[i].mutable_data();
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = momentum * v[j] + g[j];
      p[j] -= learning_rate * v[j];
    }
    ensure_finite(params[i], "sgd_momentum_step");
  }
}

namespace {

MetricsRecord make_record(std::size_t epoch, Split split, const EvalResult& eval) {
  MetricsRecord r;
  r.epoch = epoch;
  r.split = split;
  r.mean_loss = eval.mean_loss;
  r.accuracy = eval.accuracy;
  r.class_accuracy = eval.class_accuracy;
  r.class_counts = eval.class_counts;
  r.class_ns_score.assign(eval.class_accuracy.size(), kNaN);
  return r;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& test_set, Classifier model,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.size() == 0) throw ConfigError("train: empty training set");
  if (train_set.shape != model.config().input || test_set.shape != model.config().input) {
    throw ConfigError("train: dataset image shape does not match the model input");
  }
  if (train_set.num_classes != model.config().num_classes) throw ConfigError("train: class count mismatch");

  const ChannelStats stats = channel_stats(train_set);
  const Tensor normalized = stats.apply(train_set.images);
  const std::size_t k = model.config().num_classes;
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, "shuffle");
  MomentumState momentum;
  std::vector<MetricsRecord> metrics;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    Rng rng(derive_seed(shuffle_seed, epoch));
    const std::vector<std::size_t> order = epoch_order(train_set, cfg.sampler, epoch, rng);
    const double lr = cfg.learning_rate_at(epoch);
    double ns_seconds = 0.0;
    std::size_t train_forward = 0, ns_forward = 0;
    std::vector<double> score_sum(k, 0.0);
    std::vector<std::size_t> score_n(k, 0);

    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      const std::span<const std::size_t> idx =
          std::span(order).subspan(start, std::min(cfg.batch_size, order.size() - start));
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train_set.labels[idx[i]];

      try {
        std::vector<double> weights(idx.size(), 1.0);
        if (cfg.ns_enabled) {
          const auto ns_start = Clock::now();
          const NSResult ns = batch_ns_scores(gather(train_set.images, idx), labels, model, stats, cfg.layout);
          weights = compute_weights(ns.score, cfg.weighting);
          ns_seconds += seconds_since(ns_start);
          ns_forward += ns.composite_passes;
          for (std::size_t i = 0; i < idx.size(); ++i) {
            score_sum[static_cast<std::size_t>(labels[i])] += ns.score[i];
            ++score_n[static_cast<std::size_t>(labels[i])];
            if (hooks.on_score) {
              hooks.on_score(ScoreRow{epoch, step, ns.group[i], idx[i], labels[i], ns.raw[i], ns.score[i], weights[i]});
            }
          }
        }

        Tape tape;
        const std::vector<Var> params = model.register_parameters(tape);
        const Var x = tape.constant(gather(normalized, idx));
        const Var logits = model.forward_batch(params, x);
        const Var loss = weighted_mean(softmax_loss_rows(logits, labels, cfg.loss), weights);
        train_forward += idx.size();
        if (!std::isfinite(loss.value().item())) throw DomainError("non-finite batch loss");
        const std::vector<Tensor> grads = tape.backward(loss);
        sgd_momentum_step(model.mutable_parameters(), grads, momentum, lr, cfg.momentum);
      } catch (const DomainError& e) {
        throw TrainingAborted("training aborted at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                              ": " + e.what());
      }
    }
    const double wall = seconds_since(epoch_start);

    MetricsRecord train_row = make_record(epoch, Split::train, evaluate(model, train_set, stats, cfg.loss));
    for (std::size_t c = 0; c < k; ++c) {
      if (score_n[c]) train_row.class_ns_score[c] = score_sum[c] / static_cast<double>(score_n[c]);
    }
    train_row.wall_seconds = wall;
    train_row.ns_seconds = ns_seconds;
    train_row.train_forward = train_forward;
    train_row.ns_forward = ns_forward;
    metrics.push_back(std::move(train_row));
    if (test_set.size() > 0) {
      MetricsRecord test_row = make_record(epoch, Split::test, evaluate(model, test_set, stats, cfg.loss));
      metrics.push_back(std::move(test_row));
    }
  }
  return TrainResult{std::move(model), std::move(metrics)};
}

DualityReport duality_check(const std::vector<std::vector<double>>& per_sample_losses, double fitness_offset) {
  DualityReport report;
  report.fitness_positive = true;
  for (const auto& losses : per_sample_losses) {
    if (losses.empty()) throw std::invalid_argument("duality_check: setting without samples");
    double risk = 0.0, fitness = 0.0;
    for (double l : losses) {
      const double h = fitness_offset - l;
      report.fitness_positive = report.fitness_positive && h > 0.0;
      risk += l;
      fitness += h;
    }
    const double n = static_cast<double>(losses.size());
    report.mean_risk.push_back(risk / n);
    report.mean_fitness.push_back(fitness / n);
  }
  report.risk_rank = average_ranks(report.mean_risk);
  report.fitness_rank = average_ranks(report.mean_fitness);
  report.reversed = true;
  const std::size_t s = per_sample_losses.size();
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      const bool risk_less = report.mean_risk[i] < report.mean_risk[j];
      const bool fit_greater = report.mean_fitness[i] > report.mean_fitness[j];
      if (risk_less != fit_greater) report.reversed = false;
    }
  }
  // All settings tied leaves the rank correlation undefined.
  const bool all_tied = std::all_of(report.risk_rank.begin(), report.risk_rank.end(),
                                    [&](double r) { return r == report.risk_rank.front(); });
  report.spearman = s >= 2 && !all_tied ? spearman(report.fitness_rank, report.risk_rank) : kNaN;
  return report;
}

DualityReport duality_check(std::span<const Classifier> models, const Dataset& dataset, const ChannelStats& stats,
                            double fitness_offset, const LossConfig& loss) {
  std::vector<std::vector<double>> losses;
  const Tensor inputs = stats.apply(dataset.images);
  for (const Classifier& model : models) {
    const Tensor probs = softmax(model.forward_batch(inputs));
    const std::size_t k = model.config().num_classes;
    std::vector<double> per_sample(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      per_sample[i] = per_sample_loss(probs.data().subspan(i * k, k), dataset.labels[i], loss);
    }
    losses.push_back(std::move(per_sample));
  }
  return duality_check(losses, fitness_offset);
}

}  // namespace natsel
