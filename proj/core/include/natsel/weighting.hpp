#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace natsel {

// uniform:     w = sigma                      (rho must be 0)
// ns_ws:       w = sigma + rho * s            (rho > 0, winners up-weighted)
// ns_lf:       w = sigma + rho * s            (rho < 0, losers up-weighted)
// focal_like:  w = sigma + rho * (1 - s)^2    (rho > 0, focal-style modulation of the NS score)
enum class Strategy { uniform, ns_ws, ns_lf, focal_like };

std::string to_string(Strategy strategy);
Strategy parse_strategy(const std::string& text);

struct WeightingConfig {
  Strategy strategy = Strategy::uniform;
  double sigma = 1.0;
  double rho = 0.0;

  // Throws ConfigError on a negative sigma or a rho whose sign contradicts the strategy.
  void validate() const;
  double min_weight() const;
  double max_weight() const;
  bool operator==(const WeightingConfig&) const = default;
};

// Strategy label implied by the sign of rho.
Strategy strategy_for_rho(double rho);

// rho used when a config names a strategy but no rho: +1, -1 or 0.
double default_rho(Strategy strategy);

inline constexpr double kFocalLikeGamma = 2.0;

// Per-sample loss weights from NS scores. Throws ConfigError instead of
// emitting a negative weight.
std::vector<double> compute_weights(std::span<const double> scores, const WeightingConfig& cfg);

struct CurvePoint {
  std::size_t rank = 0;  // 0-based, scores sorted descending
  double weight = 0.0;
};

// Weights of `scores` after sorting them in descending order.
std::vector<CurvePoint> weight_curve(std::span<const double> scores, const WeightingConfig& cfg);

// NS scores of n simulated samples: groups of `group_size` draw raw scores
// uniformly from (0, 1) and normalize them within the group.
std::vector<double> simulated_scores(std::size_t n, std::size_t group_size, std::uint64_t seed);

// weight_curve(simulated_scores(n, group_size, seed), cfg)
std::vector<CurvePoint> weight_curve(std::size_t n, const WeightingConfig& cfg, std::size_t group_size = 4,
                                     std::uint64_t seed = 2024);

}  // namespace natsel
