#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "natsel/tensor.hpp"

namespace natsel {

// R x C arrangement of a competition group. Members fill cells row-major in
// batch order: member g sits at row g / cols, column g % cols.
struct GridLayout {
  std::size_t rows = 1;
  std::size_t cols = 2;

  std::size_t size() const { return rows * cols; }
  bool operator==(const GridLayout&) const = default;
};

std::string to_string(const GridLayout& layout);
// Parses "RxC", e.g. "2x2". Throws ConfigError.
GridLayout parse_layout(const std::string& text);

// Images are [H x W x C] tensors.

// Concatenates R*C equally shaped images into one [(R*H) x (C*W) x C] image.
Tensor stitch(std::span<const Tensor> images, const GridLayout& layout);

// Inverse of stitch for one cell.
Tensor crop_cell(const Tensor& stitched, const GridLayout& layout, std::size_t row, std::size_t col);

// Bilinear resampling with half-pixel centers: output pixel (i, j) samples the
// source at ((i + 0.5) * H / H' - 0.5, (j + 0.5) * W / W' - 0.5), clamped to
// the image, and blends the four neighbouring pixels.
Tensor bilinear_resize(const Tensor& image, std::size_t out_height, std::size_t out_width);

// (pixel - mean[c]) / stddev[c] for each channel c.
Tensor channel_normalize(const Tensor& image, std::span<const double> mean, std::span<const double> stddev);

// Per-channel standardization statistics shared by training inputs and
// resized composites.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static ChannelStats identity(std::size_t channels);
  // Accepts any tensor whose last axis is the channel axis.
  Tensor apply(const Tensor& images) const;
};

}  // namespace natsel
