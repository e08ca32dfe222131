#include "natsel/model.hpp"

#include <cmath>
#include <string>

#include "natsel/error.hpp"
#include "natsel/random.hpp"

namespace natsel {

void ClassifierConfig::validate() const {
  if (num_classes < 2) throw ConfigError("classifier needs at least 2 classes");
  if (input.height < 2 || input.width < 2) throw ConfigError("input height and width must be >= 2");
  if (input.channels < 1) throw ConfigError("input needs at least one channel");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
  }
  if (conv.enabled()) {
    if (conv.out_channels == 0) throw ConfigError("conv stage needs out_channels > 0");
    if (conv.kernel > input.height || conv.kernel > input.width) throw ConfigError("conv kernel larger than input");
  }
}

std::vector<Shape> parameter_shapes(const ClassifierConfig& config) {
  std::vector<Shape> shapes;
  std::size_t fan_in = config.input.pixels();
  if (config.conv.enabled()) {
    const std::size_t k = config.conv.kernel;
    shapes.push_back({k * k * config.input.channels, config.conv.out_channels});
    shapes.push_back({config.conv.out_channels});
    fan_in = (config.input.height - k + 1) * (config.input.width - k + 1) * config.conv.out_channels;
  }
  for (std::size_t width : config.hidden) {
    shapes.push_back({fan_in, width});
    shapes.push_back({width});
    fan_in = width;
  }
  shapes.push_back({fan_in, config.num_classes});
  shapes.push_back({config.num_classes});
  return shapes;
}

Classifier::Classifier(ClassifierConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(derive_seed(config_.init_seed, "classifier-init"));
  const auto shapes = parameter_shapes(config_);
  // Weights and biases of a layer share the bound 1/sqrt(fan_in).
  for (std::size_t i = 0; i < shapes.size(); i += 2) {
    const std::size_t fan_in = shapes[i][0];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t j = i; j < i + 2; ++j) {
      std::vector<double> values(shape_size(shapes[j]));
      for (double& v : values) v = dist(rng);
      parameters_.emplace_back(shapes[j], std::move(values));
    }
  }
}

Classifier::Classifier(ClassifierConfig config, std::vector<Tensor> parameters)
    : config_(std::move(config)), parameters_(std::move(parameters)) {
  config_.validate();
  const auto shapes = parameter_shapes(config_);
  if (shapes.size() != parameters_.size()) throw ShapeError("Classifier: wrong number of parameter tensors");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (parameters_[i].shape() != shapes[i]) {
      throw ShapeError("Classifier: parameter " + std::to_string(i) + " has shape " +
                       shape_string(parameters_[i].shape()) + ", expected " + shape_string(shapes[i]));
    }
  }
}

std::size_t Classifier::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& p : parameters_) n += p.size();
  return n;
}

namespace {

// Shared layer pipeline for plain Tensors and taped Vars. `param(i)` yields
// the i-th parameter in storage order.
template <class V, class ParamFn>
V run_layers(const ClassifierConfig& cfg, V x, std::size_t batch, ParamFn param) {
  std::size_t next = 0;
  if (cfg.conv.enabled()) {
    const std::size_t k = cfg.conv.kernel;
    const std::size_t ho = cfg.input.height - k + 1, wo = cfg.input.width - k + 1;
    V cols = im2col(x, k);
    V conv = relu(linear(cols, param(0), param(1)));
    x = reshape(conv, Shape{batch, ho * wo * cfg.conv.out_channels});
    next = 2;
  } else {
    x = reshape(x, Shape{batch, cfg.input.pixels()});
  }
  for (std::size_t layer = 0; layer < cfg.hidden.size(); ++layer, next += 2) {
    x = relu(linear(x, param(next), param(next + 1)));
  }
  return linear(x, param(next), param(next + 1));
}

void check_batch(const ClassifierConfig& cfg, const Shape& shape) {
  const Shape expected{cfg.input.height, cfg.input.width, cfg.input.channels};
  if (shape.size() != 4 || Shape(shape.begin() + 1, shape.end()) != expected) {
    throw ShapeError("forward: expected [B x " + std::to_string(cfg.input.height) + " x " +
                     std::to_string(cfg.input.width) + " x " + std::to_string(cfg.input.channels) + "], got " +
                     shape_string(shape));
  }
}

}  // namespace

Tensor Classifier::forward(const Tensor& x) const {
  if (x.shape() != config_.input.shape()) {
    throw ShapeError("forward: expected " + shape_string(config_.input.shape()) + ", got " + shape_string(x.shape()));
  }
  Shape batched{1};
  batched.insert(batched.end(), x.shape().begin(), x.shape().end());
  return forward_batch(x.reshaped(batched)).reshaped({config_.num_classes});
}

Tensor Classifier::forward_batch(const Tensor& x) const {
  check_batch(config_, x.shape());
  return run_layers<Tensor>(config_, x, x.dim(0), [this](std::size_t i) -> const Tensor& { return parameters_[i]; });
}

Var Classifier::forward_batch(std::span<const Var> params, const Var& x) const {
  check_batch(config_, x.shape());
  if (params.size() != parameters_.size()) throw ShapeError("forward_batch: wrong number of parameter handles");
  return run_layers<Var>(config_, x, x.shape()[0], [params](std::size_t i) -> const Var& { return params[i]; });
}

std::vector<Var> Classifier::register_parameters(Tape& tape) const {
  std::vector<Var> vars;
  vars.reserve(parameters_.size());
  for (const Tensor& p : parameters_) vars.push_back(tape.parameter(p));
  return vars;
}

}  // namespace natsel
