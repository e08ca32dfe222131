#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "natsel/autodiff.hpp"
#include "natsel/imageops.hpp"
#include "natsel/model.hpp"
#include "natsel/nscore.hpp"
#include "natsel/trainer.hpp"

namespace {

using namespace natsel;

Tensor random_images(std::size_t n, std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n * h * w * c);
  for (double& x : v) x = u(rng);
  return Tensor({n, h, w, c}, std::move(v));
}

std::vector<int> random_labels(std::size_t n, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> u(0, k - 1);
  std::vector<int> y(n);
  for (int& v : y) v = u(rng);
  return y;
}

Classifier make_model(std::size_t side) {
  ClassifierConfig cfg;
  cfg.input = ImageShape{side, side, 1};
  cfg.hidden = {64};
  cfg.num_classes = 10;
  cfg.init_seed = 7;
  return Classifier(cfg);
}

GridLayout layout_arg(const benchmark::State& state) {
  return GridLayout{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1))};
}

void BM_StitchResize(benchmark::State& state) {
  const GridLayout layout = layout_arg(state);
  const Tensor batch = random_images(layout.size(), 8, 8, 1, 1);
  std::vector<Tensor> members;
  for (std::size_t i = 0; i < layout.size(); ++i) members.push_back(select(batch, i));
  for (auto _ : state) {
    benchmark::DoNotOptimize(bilinear_resize(stitch(members, layout), 8, 8));
  }
}
BENCHMARK(BM_StitchResize)->Args({1, 2})->Args({2, 2})->Args({2, 4})->Args({4, 4});

void BM_BatchNSScores(benchmark::State& state) {
  const GridLayout layout = layout_arg(state);
  const Tensor batch = random_images(64, 8, 8, 1, 2);
  const auto labels = random_labels(64, 10, 3);
  const Classifier model = make_model(8);
  const ChannelStats stats = ChannelStats::identity(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_ns_scores(batch, labels, model, stats, layout));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_BatchNSScores)->Args({1, 2})->Args({2, 2})->Args({4, 4});

// Taped forward, weighted loss, backward and momentum step for one batch of 64.
void BM_TrainStep(benchmark::State& state) {
  const Tensor batch = random_images(64, 8, 8, 1, 4);
  const auto labels = random_labels(64, 10, 5);
  const std::vector<double> weights(64, 1.0);
  Classifier model = make_model(8);
  MomentumState momentum;
  for (auto _ : state) {
    Tape tape;
    const auto params = model.register_parameters(tape);
    const Var loss = weighted_mean(softmax_loss_rows(model.forward_batch(params, tape.constant(batch)), labels, {}),
                                   weights);
    const auto grads = tape.backward(loss);
    sgd_momentum_step(model.mutable_parameters(), grads, momentum, 1e-3, 0.9);
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
