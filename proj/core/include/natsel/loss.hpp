#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "natsel/tensor.hpp"

namespace natsel {

enum class LossKind { cross_entropy, focal, label_smoothing };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

struct LossConfig {
  LossKind kind = LossKind::cross_entropy;
  double focal_gamma = 2.0;
  double smoothing = 0.1;  // only read for label_smoothing

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

// Probabilities are clamped to this floor before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

// Loss of one probability vector against class `label`:
//   cross_entropy    -log p_y
//   focal            (1 - p_y)^gamma * (-log p_y)
//   label_smoothing  -sum_k t_k log p_k with t = (1 - eps) onehot(y) + eps / K
double per_sample_loss(std::span<const double> probs, int label, const LossConfig& cfg);
double per_sample_loss(const Tensor& probs, int label, const LossConfig& cfg);

// d loss / d logits for the same loss, given probs = softmax(logits).
// The clamp is treated as inactive, which only matters for p_y < 1e-12.
void loss_logit_gradient(std::span<const double> probs, int label, const LossConfig& cfg,
                         std::span<double> grad_out);

}  // namespace natsel
