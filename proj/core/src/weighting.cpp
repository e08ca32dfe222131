#include "natsel/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "natsel/error.hpp"
#include "natsel/nscore.hpp"
#include "natsel/random.hpp"

namespace natsel {

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::uniform: return "uniform";
    case Strategy::ns_ws: return "ns_ws";
    case Strategy::ns_lf: return "ns_lf";
    case Strategy::focal_like: return "focal_like";
  }
  return "?";
}

Strategy parse_strategy(const std::string& text) {
  if (text == "uniform") return Strategy::uniform;
  if (text == "ns_ws") return Strategy::ns_ws;
  if (text == "ns_lf") return Strategy::ns_lf;
  if (text == "focal_like") return Strategy::focal_like;
  throw ConfigError("unknown strategy '" + text + "'");
}

Strategy strategy_for_rho(double rho) {
  if (rho > 0.0) return Strategy::ns_ws;
  if (rho < 0.0) return Strategy::ns_lf;
  return Strategy::uniform;
}

double default_rho(Strategy strategy) {
  switch (strategy) {
    case Strategy::ns_ws:
    case Strategy::focal_like: return 1.0;
    case Strategy::ns_lf: return -1.0;
    case Strategy::uniform: return 0.0;
  }
  return 0.0;
}

void WeightingConfig::validate() const {
  if (!std::isfinite(sigma) || sigma < 0.0) throw ConfigError("sigma must be a non-negative number");
  if (!std::isfinite(rho)) throw ConfigError("rho must be finite");
  switch (strategy) {
    case Strategy::uniform:
      if (rho != 0.0) throw ConfigError("strategy uniform requires rho = 0");
      break;
    case Strategy::ns_ws:
    case Strategy::focal_like:
      if (!(rho > 0.0)) throw ConfigError("strategy " + to_string(strategy) + " requires rho > 0");
      break;
    case Strategy::ns_lf:
      if (!(rho < 0.0)) throw ConfigError("strategy ns_lf requires rho < 0");
      break;
  }
}

double WeightingConfig::min_weight() const { return std::min(sigma, sigma + rho); }
double WeightingConfig::max_weight() const { return std::max(sigma, sigma + rho); }

std::vector<double> compute_weights(std::span<const double> scores, const WeightingConfig& cfg) {
  cfg.validate();
  std::vector<double> w(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    if (!std::isfinite(s)) throw DomainError("compute_weights: non-finite NS score");
    switch (cfg.strategy) {
      case Strategy::uniform:
      case Strategy::ns_ws:
      case Strategy::ns_lf:
        w[i] = cfg.sigma + cfg.rho * s;
        break;
      case Strategy::focal_like:
        w[i] = cfg.sigma + cfg.rho * std::pow(1.0 - s, kFocalLikeGamma);
        break;
    }
    if (w[i] < 0.0) {
      throw ConfigError("negative sample weight " + std::to_string(w[i]) + ": sigma " + std::to_string(cfg.sigma) +
                        " is too small for rho " + std::to_string(cfg.rho));
    }
  }
  return w;
}

std::vector<CurvePoint> weight_curve(std::span<const double> scores, const WeightingConfig& cfg) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>{});
  const std::vector<double> w = compute_weights(sorted, cfg);
  std::vector<CurvePoint> curve(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) curve[i] = CurvePoint{i, w[i]};
  return curve;
}

std::vector<double> simulated_scores(std::size_t n, std::size_t group_size, std::uint64_t seed) {
  if (group_size < 1) group_size = 1;
  Rng rng(derive_seed(seed, "weight-curve"));
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> out;
  out.reserve(n);
  while (out.size() < n) {
    std::vector<double> raw(group_size);
    for (double& q : raw) q = std::max(dist(rng), kScoreMassFloor);
    for (double s : normalize_scores(raw)) {
      if (out.size() < n) out.push_back(s);
    }
  }
  return out;
}

std::vector<CurvePoint> weight_curve(std::size_t n, const WeightingConfig& cfg, std::size_t group_size,
                                     std::uint64_t seed) {
  return weight_curve(simulated_scores(n, group_size, seed), cfg);
}

}  // namespace natsel
