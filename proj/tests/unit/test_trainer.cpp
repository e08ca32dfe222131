#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "natsel/autodiff.hpp"
#include "natsel/digest.hpp"
#include "natsel/error.hpp"
#include "natsel/trainer.hpp"
#include "test_support.hpp"

using namespace natsel;
using natsel::testing::max_fd_error;
using natsel::testing::random_labels;
using natsel::testing::random_tensor;
using natsel::testing::tiny_classifier;

namespace {

Dataset blobs(std::size_t k, std::size_t per_class, double noise, std::uint64_t seed, Split split = Split::train) {
  DatasetRecipe r;
  r.num_classes = k;
  r.shape = ImageShape{4, 4, 1};
  r.per_class.assign(k, per_class);
  r.pixel_noise = noise;
  r.seed = seed;
  return gen_synthetic(r, split);
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 3;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.milestones = {Milestone{2, 0.1}};
  cfg.layout = GridLayout{2, 2};
  cfg.weighting = WeightingConfig{Strategy::ns_ws, 0.7, 1.0};
  cfg.seed = seed;
  return cfg;
}

Classifier zero_head(ClassifierConfig cfg) {
  Classifier model(cfg);
  auto p = model.mutable_parameters();
  p[p.size() - 2] = Tensor(p[p.size() - 2].shape(), 0.0);
  p[p.size() - 1] = Tensor(p[p.size() - 1].shape(), 0.0);
  return model;
}

// Deterministic fields of a metrics record (everything except timings).
bool same_record(const MetricsRecord& a, const MetricsRecord& b) {
  auto bits_equal = [](const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::isnan(x[i]) != std::isnan(y[i])) return false;
      if (!std::isnan(x[i]) && x[i] != y[i]) return false;
    }
    return true;
  };
  return a.epoch == b.epoch && a.split == b.split && a.mean_loss == b.mean_loss && a.accuracy == b.accuracy &&
         bits_equal(a.class_accuracy, b.class_accuracy) && a.class_counts == b.class_counts &&
         a.train_forward == b.train_forward;
}

}  // namespace

TEST_CASE("weighted batch loss examples") {
  const std::vector<double> losses{0.5, 9.9};
  const std::vector<double> w{2.0, 0.0};
  CHECK(weighted_batch_loss(losses, w) == 0.5);
  const std::vector<double> l3{0.2, 0.4, 1.5};
  const std::vector<double> ones(3, 1.0), sig(3, 0.7);
  const double plain = (0.2 + 0.4 + 1.5) / 3.0;
  CHECK(std::abs(weighted_batch_loss(l3, ones) - plain) <= 1e-15);
  CHECK(std::abs(weighted_batch_loss(l3, sig) - 0.7 * plain) <= 1e-15);
  CHECK_THROWS_AS(weighted_batch_loss(l3, w), ShapeError);
}

TEST_CASE("momentum step examples") {
  std::vector<Tensor> theta{Tensor::vector({1.0, -2.0})};
  const std::vector<Tensor> g{Tensor::vector({0.5, 0.25})};
  MomentumState plain;
  sgd_momentum_step(theta, g, plain, 0.1, 0.0);
  CHECK(theta[0] == Tensor::vector({1.0 - 0.05, -2.0 - 0.025}));

  std::vector<Tensor> still{Tensor::vector({3.0})};
  MomentumState zero;
  sgd_momentum_step(still, std::vector<Tensor>{Tensor::vector({0.0})}, zero, 0.1, 0.9);
  CHECK(still[0] == Tensor::vector({3.0}));

  // f(theta) = theta^2 (gradient 2 theta), theta0 = 1, lr 0.1, mu 0.9:
  // v1 = 2, theta1 = 0.8; v2 = 0.9 * 2 + 1.6 = 3.4, theta2 = 0.8 - 0.34 = 0.46
  std::vector<Tensor> q{Tensor::scalar(1.0)};
  MomentumState state;
  for (int step = 0; step < 2; ++step) {
    const std::vector<Tensor> grad{Tensor::scalar(2.0 * q[0].item())};
    sgd_momentum_step(q, grad, state, 0.1, 0.9);
  }
  CHECK(std::abs(q[0].item() - 0.46) <= 1e-15);
  CHECK(std::abs(state.velocity[0].item() - 3.4) <= 1e-15);

  std::vector<Tensor> mismatch{Tensor::vector({1.0, 2.0})};
  CHECK_THROWS_AS(sgd_momentum_step(mismatch, g, state, 0.1, 0.9), ShapeError);
}

TEST_CASE("config validation and schedule") {
  TrainConfig cfg = small_config(1);
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.batch_size = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.layout = GridLayout{1, 1};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  cfg.milestones = {Milestone{2, 0.1}, Milestone{4, 0.5}};
  CHECK(cfg.learning_rate_at(0) == 0.05);
  CHECK(cfg.learning_rate_at(1) == 0.05);
  CHECK(cfg.learning_rate_at(2) == 0.05 * 0.1);
  CHECK(cfg.learning_rate_at(5) == 0.05 * 0.1 * 0.5);
}

TEST_CASE("evaluation: tie rule, perfect model and recombination") {
  const Dataset ds = blobs(3, 4, 0.2, 1);
  const Classifier constant = zero_head(tiny_classifier(4, 4, 1, 3, {5}, 2));
  const EvalResult tie = evaluate(constant, ds, ChannelStats::identity(1));
  CHECK(tie.accuracy == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(tie.class_accuracy == std::vector<double>{1.0, 0.0, 0.0});
  CHECK(std::abs(tie.mean_loss - std::log(3.0)) <= 1e-12);

  // A bias that always names class 2 is perfect on a set labelled only 2.
  Classifier biased = zero_head(tiny_classifier(4, 4, 1, 3, {5}, 2));
  biased.mutable_parameters().back() = Tensor::vector({0.0, 0.0, 5.0});
  Dataset only2 = ds;
  for (auto& y : only2.labels) y = 2;
  const EvalResult perfect = evaluate(biased, only2, ChannelStats::identity(1));
  CHECK(perfect.accuracy == 1.0);
  CHECK(std::isnan(perfect.class_accuracy[0]));
  CHECK(perfect.class_accuracy[2] == 1.0);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Classifier model(tiny_classifier(4, 4, 1, 3, {4}, rng()));
    const Dataset noisy = inject_label_noise(blobs(3, 1 + trial % 5, 0.3, rng()), 0.3, rng());
    const EvalResult r = evaluate(model, noisy, ChannelStats::identity(1));
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      if (r.class_counts[k] > 0) total += r.class_accuracy[k] * static_cast<double>(r.class_counts[k]);
      n += r.class_counts[k];
    }
    CHECK(n == noisy.size());
    CHECK(std::abs(total / static_cast<double>(n) - r.accuracy) <= 1e-12);
  }
}

TEST_CASE("weighted loss gradients match finite differences and linearity") {
  Rng rng(90);
  for (int trial = 0; trial < 10; ++trial) {
    const auto cfg = tiny_classifier(3, 3, 1, 3, {5}, rng());
    const Classifier model(cfg);
    const Tensor x = random_tensor({4, 3, 3, 1}, rng, 0.0, 1.0);
    const auto labels = random_labels(4, 3, rng);
    const Tensor wt = random_tensor({4}, rng, 0.2, 2.5);
    const std::vector<double> w(wt.data().begin(), wt.data().end());
    auto objective = [&](const Classifier& m, Tape& tape, std::span<const double> weights) {
      return weighted_mean(softmax_loss_rows(m.forward_batch(m.register_parameters(tape), tape.constant(x)), labels,
                                             LossConfig{}),
                           weights);
    };
    Tape tape;
    const auto grads = tape.backward(objective(model, tape, w));
    const std::vector<Tensor> params(model.parameters().begin(), model.parameters().end());
    CHECK(max_fd_error(params, grads, [&](const std::vector<Tensor>& p) {
            Tape t;
            return objective(Classifier(cfg, p), t, w).value().item();
          }) <= 1e-5);

    // (1/B) sum_i w_i grad l_i, one sample at a time.
    std::vector<Tensor> combined;
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<double> onehot(4, 0.0);
      onehot[i] = w[i];
      Tape t;
      const auto gi = t.backward(objective(model, t, onehot));
      if (combined.empty()) {
        combined = gi;
      } else {
        for (std::size_t p = 0; p < gi.size(); ++p) combined[p] = add(combined[p], gi[p]);
      }
    }
    for (std::size_t p = 0; p < grads.size(); ++p) CHECK(testing::max_abs_diff(combined[p], grads[p]) <= 1e-12);
  }
}

TEST_CASE("uniform weighting with sigma 1 reproduces the NS-free loop bitwise") {
  const Dataset train_set = blobs(3, 10, 0.3, 5);
  const Dataset test_set = blobs(3, 5, 0.3, 5, Split::test);
  const Classifier init(tiny_classifier(4, 4, 1, 3, {6}, 11));
  TrainConfig ns = small_config(7);
  ns.weighting = WeightingConfig{Strategy::uniform, 1.0, 0.0};
  TrainConfig erm = ns;
  erm.ns_enabled = false;
  const TrainResult a = train(ns, train_set, test_set, init);
  const TrainResult b = train(erm, train_set, test_set, init);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) CHECK(same_record(a.metrics[i], b.metrics[i]));
  CHECK(parameter_digest(a.model) == parameter_digest(b.model));
  CHECK(b.metrics[0].ns_forward == 0);
  CHECK(a.metrics[0].ns_forward > 0);
}

TEST_CASE("the score dump does not perturb training") {
  const Dataset train_set = blobs(3, 10, 0.3, 6);
  const Dataset test_set = blobs(3, 5, 0.3, 6, Split::test);
  const Classifier init(tiny_classifier(4, 4, 1, 3, {6}, 12));
  const TrainConfig cfg = small_config(8);
  std::vector<ScoreRow> rows;
  TrainHooks hooks;
  hooks.on_score = [&](const ScoreRow& r) { rows.push_back(r); };
  const TrainResult with = train(cfg, train_set, test_set, init, hooks);
  const TrainResult without = train(cfg, train_set, test_set, init);
  CHECK(parameter_digest(with.model) == parameter_digest(without.model));
  for (std::size_t i = 0; i < with.metrics.size(); ++i) CHECK(same_record(with.metrics[i], without.metrics[i]));
  CHECK(rows.size() == cfg.epochs * train_set.size());
  for (const ScoreRow& r : rows) {
    CHECK(r.label == train_set.labels[r.sample_index]);
    CHECK(std::abs(r.weight - (0.7 + r.score)) <= 1e-15);
  }
}

TEST_CASE("forward counters and determinism") {
  const Dataset train_set = blobs(5, 5, 0.3, 9);  // N = 25, B = 10: batches of 10, 10, 5
  const Dataset test_set = blobs(5, 2, 0.3, 9, Split::test);
  TrainConfig cfg = small_config(3);
  cfg.batch_size = 10;
  const Classifier init(tiny_classifier(4, 4, 1, 5, {4}, 13));
  const TrainResult a = train(cfg, train_set, test_set, init);
  const TrainResult b = train(cfg, train_set, test_set, init);
  REQUIRE(a.metrics.size() == 2 * cfg.epochs);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const MetricsRecord& tr = a.metrics[2 * e];
    CHECK(tr.split == Split::train);
    CHECK(a.metrics[2 * e + 1].split == Split::test);
    CHECK(tr.epoch == e);
    CHECK(tr.train_forward == 25);
    CHECK(tr.ns_forward == 10 / 4 + 10 / 4 + 5 / 4);
    CHECK(tr.ns_seconds <= tr.wall_seconds);
    double weighted = 0.0;
    for (std::size_t k = 0; k < 5; ++k) weighted += tr.class_accuracy[k] * static_cast<double>(tr.class_counts[k]);
    CHECK(std::abs(weighted / 25.0 - tr.accuracy) <= 1e-12);
  }
  for (std::size_t i = 0; i < a.metrics.size(); ++i) CHECK(same_record(a.metrics[i], b.metrics[i]));
  CHECK(parameter_digest(a.model) == parameter_digest(b.model));
}

TEST_CASE("one step on a separable toy set lowers the loss") {
  const Dataset ds = blobs(2, 8, 0.0, 21);
  const Classifier init = zero_head(tiny_classifier(4, 4, 1, 2, {}, 1));
  TrainConfig cfg = small_config(1);
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.momentum = 0.0;
  cfg.milestones.clear();
  cfg.learning_rate = 0.1;
  cfg.layout = GridLayout{1, 2};
  const ChannelStats stats = channel_stats(ds);
  const double before = evaluate(init, ds, stats).mean_loss;
  const TrainResult r = train(cfg, ds, ds, init);
  CHECK(std::abs(before - std::log(2.0)) <= 1e-12);
  CHECK(r.metrics[1].mean_loss < before);
}

TEST_CASE("a diverging run aborts with a diagnostic") {
  const Dataset ds = blobs(2, 8, 0.3, 2);
  TrainConfig cfg = small_config(1);
  cfg.learning_rate = 1e300;
  cfg.momentum = 0.0;
  try {
    train(cfg, ds, ds, Classifier(tiny_classifier(4, 4, 1, 2, {4}, 3)));
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    CHECK(std::string(e.what()).find("epoch 0, step") != std::string::npos);
  }
}

TEST_CASE("duality examples") {
  const DualityReport two = duality_check({{0.3}, {0.7}}, 5.0);
  CHECK(two.reversed);
  CHECK(two.mean_fitness[0] > two.mean_fitness[1]);
  CHECK(two.spearman == -1.0);
  CHECK(two.fitness_positive);

  const DualityReport tie = duality_check({{0.4, 0.6}, {0.5, 0.5}}, 1.0);
  CHECK(tie.mean_fitness[0] == tie.mean_fitness[1]);
  CHECK(tie.fitness_rank[0] == tie.fitness_rank[1]);
  CHECK(tie.reversed);
  CHECK(std::isnan(tie.spearman));

  CHECK_FALSE(duality_check({{2.0}}, 1.0).fitness_positive);
}

TEST_CASE("fitness ranking reverses risk ranking over random settings") {
  const Dataset ds = blobs(3, 6, 0.3, 30);
  Rng rng(31);
  std::vector<Classifier> models;
  for (int i = 0; i < 10; ++i) models.emplace_back(tiny_classifier(4, 4, 1, 3, {5}, rng()));
  for (double m : {1.0, 10.0, 100.0}) {
    const DualityReport r = duality_check(models, ds, ChannelStats::identity(1), m);
    CHECK(r.reversed);
    CHECK(r.spearman == -1.0);
    for (std::size_t i = 0; i < 10; ++i) CHECK(r.fitness_rank[i] == 11.0 - r.risk_rank[i]);
  }
}
