#pragma once

// Shared helpers for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "natsel/model.hpp"
#include "natsel/random.hpp"
#include "natsel/tensor.hpp"

namespace natsel::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> data(shape_size(shape));
  for (double& v : data) v = u(rng);
  return Tensor(shape, std::move(data));
}

inline std::vector<int> random_labels(std::size_t n, std::size_t k, Rng& rng) {
  std::uniform_int_distribution<int> u(0, static_cast<int>(k) - 1);
  std::vector<int> out(n);
  for (int& y : out) y = u(rng);
  return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Relative error of a gradient component against its finite-difference
// estimate. The floor keeps components that are zero up to round-off from
// dominating: with step h = 1e-6 and O(1) losses the central difference
// carries an absolute round-off of about 1e-10.
inline constexpr double kGradRelFloor = 1e-4;

inline double grad_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradRelFloor});
}

// Central finite differences of f over every element of `params`, compared
// with `grads`. Returns the largest relative error.
inline double max_fd_error(std::vector<Tensor> params, const std::vector<Tensor>& grads,
                           const std::function<double(const std::vector<Tensor>&)>& f, double step = 1e-6) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = params[p][i];
      params[p].mutable_data()[i] = orig + step;
      const double up = f(params);
      params[p].mutable_data()[i] = orig - step;
      const double down = f(params);
      params[p].mutable_data()[i] = orig;
      worst = std::max(worst, grad_rel_error(grads[p][i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

// Direct evaluation of the half-pixel bilinear formula for one output pixel
// of an [H x W x C] image resized to oh x ow.
inline double resize_reference(const Tensor& img, std::size_t oh, std::size_t ow, std::size_t i, std::size_t j,
                               std::size_t ch) {
  const auto h = static_cast<long>(img.dim(0)), w = static_cast<long>(img.dim(1));
  const std::size_t c = img.dim(2);
  const double sy = std::clamp((static_cast<double>(i) + 0.5) * static_cast<double>(h) / static_cast<double>(oh) - 0.5,
                               0.0, static_cast<double>(h - 1));
  const double sx = std::clamp((static_cast<double>(j) + 0.5) * static_cast<double>(w) / static_cast<double>(ow) - 0.5,
                               0.0, static_cast<double>(w - 1));
  const long y0 = static_cast<long>(std::floor(sy)), x0 = static_cast<long>(std::floor(sx));
  const long y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
  auto px = [&](long y, long x) { return img[static_cast<std::size_t>(y * w + x) * c + ch]; };
  return (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x1)) + fy * ((1 - fx) * px(y1, x0) + fx * px(y1, x1));
}

inline ClassifierConfig tiny_classifier(std::size_t h, std::size_t w, std::size_t c, std::size_t k,
                                        std::vector<std::size_t> hidden, std::uint64_t seed,
                                        ConvStage conv = {}) {
  ClassifierConfig cfg;
  cfg.input = ImageShape{h, w, c};
  cfg.hidden = std::move(hidden);
  cfg.conv = conv;
  cfg.num_classes = k;
  cfg.init_seed = seed;
  return cfg;
}

}  // namespace natsel::testing
