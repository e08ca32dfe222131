#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "natsel/autodiff.hpp"
#include "natsel/loss.hpp"
#include "natsel/tensor.hpp"

namespace natsel {

struct ImageShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t pixels() const { return height * width * channels; }
  Shape shape() const { return {height, width, channels}; }
  bool operator==(const ImageShape&) const = default;
};

// Optional convolution stage in front of the dense layers: valid padding,
// stride 1, ReLU. Disabled when kernel == 0.
struct ConvStage {
  std::size_t kernel = 0;
  std::size_t out_channels = 0;

  bool enabled() const { return kernel > 0; }
  bool operator==(const ConvStage&) const = default;
};

struct ClassifierConfig {
  ImageShape input;
  std::vector<std::size_t> hidden;
  ConvStage conv;
  std::size_t num_classes = 2;
  std::uint64_t init_seed = 0;

  void validate() const;
  bool operator==(const ClassifierConfig&) const = default;
};

// MLP classifier with an optional single convolution stage.
//
// Parameters are stored as [conv_w, conv_b]? followed by (w, b) per dense
// layer; dense weights are [fan_in x fan_out]. No dropout or normalization
// layers, so there is a single evaluation mode.
class Classifier {
 public:
  explicit Classifier(ClassifierConfig config);
  Classifier(ClassifierConfig config, std::vector<Tensor> parameters);

  const ClassifierConfig& config() const { return config_; }
  std::span<const Tensor> parameters() const { return parameters_; }
  std::span<Tensor> mutable_parameters() { return parameters_; }
  std::size_t parameter_count() const;

  // Untaped inference. x: [H x W x C] -> [K]
  Tensor forward(const Tensor& x) const;
  // Untaped inference. x: [B x H x W x C] -> [B x K]
  Tensor forward_batch(const Tensor& x) const;
  // Taped forward. `params` are this model's parameters registered on the tape.
  Var forward_batch(std::span<const Var> params, const Var& x) const;

  // Registers every parameter on `tape`, in storage order.
  std::vector<Var> register_parameters(Tape& tape) const;

 private:
  ClassifierConfig config_;
  std::vector<Tensor> parameters_;
};

// Shapes of all parameters, in storage order.
std::vector<Shape> parameter_shapes(const ClassifierConfig& config);

// Checkpoint: text header, then every parameter as little-endian IEEE-754
// binary64 in storage order. See README for the byte layout.
void save_checkpoint(std::ostream& out, const Classifier& model);
Classifier load_checkpoint(std::istream& in);

}  // namespace natsel
