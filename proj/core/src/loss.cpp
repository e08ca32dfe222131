#include "natsel/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "natsel/error.hpp"

namespace natsel {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::cross_entropy: return "cross_entropy";
    case LossKind::focal: return "focal";
    case LossKind::label_smoothing: return "label_smoothing";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "cross_entropy") return LossKind::cross_entropy;
  if (text == "focal") return LossKind::focal;
  if (text == "label_smoothing") return LossKind::label_smoothing;
  throw ConfigError("unknown loss kind '" + text + "'");
}

void LossConfig::validate() const {
  if (!(focal_gamma >= 0.0) || !std::isfinite(focal_gamma)) throw ConfigError("focal_gamma must be >= 0");
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("smoothing must lie in [0, 1)");
}

namespace {

void check_label(std::size_t k, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= k) {
    throw std::out_of_range("label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")");
  }
}

double clamped_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

}  // namespace

double per_sample_loss(std::span<const double> probs, int label, const LossConfig& cfg) {
  check_label(probs.size(), label);
  const double py = probs[static_cast<std::size_t>(label)];
  if (!(py >= 0.0) || !std::isfinite(py)) throw DomainError("per_sample_loss: invalid probability " + std::to_string(py));
  switch (cfg.kind) {
    case LossKind::cross_entropy:
      return -clamped_log(py);
    case LossKind::focal:
      return std::pow(1.0 - py, cfg.focal_gamma) * -clamped_log(py);
    case LossKind::label_smoothing: {
      const double k = static_cast<double>(probs.size());
      double loss = -(1.0 - cfg.smoothing) * clamped_log(py);
      if (cfg.smoothing > 0.0) {
        double log_sum = 0.0;
        for (double p : probs) log_sum += clamped_log(p);
        loss -= cfg.smoothing / k * log_sum;
      }
      return loss;
    }
  }
  throw std::logic_error("per_sample_loss: unknown loss kind");
}

double per_sample_loss(const Tensor& probs, int label, const LossConfig& cfg) {
  if (probs.rank() != 1) throw ShapeError("per_sample_loss: expected a probability vector");
  return per_sample_loss(probs.data(), label, cfg);
}

void loss_logit_gradient(std::span<const double> probs, int label, const LossConfig& cfg,
                         std::span<double> grad_out) {
  check_label(probs.size(), label);
  const std::size_t k = probs.size();
  const std::size_t y = static_cast<std::size_t>(label);
  switch (cfg.kind) {
    case LossKind::cross_entropy:
    case LossKind::label_smoothing: {
      const double eps = cfg.kind == LossKind::label_smoothing ? cfg.smoothing : 0.0;
      const double off = eps / static_cast<double>(k);
      for (std::size_t j = 0; j < k; ++j) grad_out[j] = probs[j] - off - (j == y ? 1.0 - eps : 0.0);
      return;
    }
    case LossKind::focal: {
      // With p_y = softmax_y(z): d p_y / d z_j = p_y (delta_jy - p_j), so
      // dL/dz_j = (dL/dp_y * p_y) * (delta_jy - p_j).
      const double py = probs[y];
      const double gamma = cfg.focal_gamma;
      const double rest = 1.0 - py;
      double dldp_times_p = -std::pow(rest, gamma) * py / std::max(py, kProbabilityFloor);
      if (gamma != 0.0 && rest > 0.0) dldp_times_p += gamma * std::pow(rest, gamma - 1.0) * py * clamped_log(py);
      for (std::size_t j = 0; j < k; ++j) grad_out[j] = dldp_times_p * ((j == y ? 1.0 : 0.0) - probs[j]);
      return;
    }
  }
}

}  // namespace natsel
