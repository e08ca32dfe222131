#include "natsel/imageops.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "natsel/error.hpp"

namespace natsel {

std::string to_string(const GridLayout& layout) {
  return std::to_string(layout.rows) + "x" + std::to_string(layout.cols);
}

GridLayout parse_layout(const std::string& text) {
  const auto x = text.find_first_of("xX");
  auto part = [&](std::size_t from, std::size_t to) {
    std::size_t value = 0;
    const char* first = text.data() + from;
    const char* last = text.data() + to;
    const auto res = std::from_chars(first, last, value);
    if (first == last || res.ec != std::errc{} || res.ptr != last) {
      throw ConfigError("layout '" + text + "' is not of the form RxC");
    }
    if (value == 0) throw ConfigError("layout '" + text + "' has an empty dimension");
    return value;
  };
  if (x == std::string::npos) throw ConfigError("layout '" + text + "' is not of the form RxC");
  return GridLayout{part(0, x), part(x + 1, text.size())};
}

namespace {

void check_image(const Tensor& image, const char* what) {
  if (image.rank() != 3) throw ShapeError(std::string(what) + ": expected [H x W x C], got " + shape_string(image.shape()));
}

}  // namespace

Tensor stitch(std::span<const Tensor> images, const GridLayout& layout) {
  if (images.size() != layout.size()) {
    throw ShapeError("stitch: layout " + to_string(layout) + " needs " + std::to_string(layout.size()) +
                     " images, got " + std::to_string(images.size()));
  }
  check_image(images.front(), "stitch");
  const Shape& cell = images.front().shape();
  for (const Tensor& img : images) {
    if (img.shape() != cell) throw ShapeError("stitch: heterogeneous image shapes");
  }
  const std::size_t h = cell[0], w = cell[1], c = cell[2];
  const std::size_t out_w = layout.cols * w;
  std::vector<double> out(layout.size() * h * w * c);
  for (std::size_t g = 0; g < images.size(); ++g) {
    const std::size_t r0 = (g / layout.cols) * h, c0 = (g % layout.cols) * w;
    const auto src = images[g].data();
    for (std::size_t i = 0; i < h; ++i) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * w * c), w * c,
                  out.begin() + static_cast<std::ptrdiff_t>(((r0 + i) * out_w + c0) * c));
    }
  }
  return Tensor({layout.rows * h, out_w, c}, std::move(out));
}

Tensor crop_cell(const Tensor& stitched, const GridLayout& layout, std::size_t row, std::size_t col) {
  check_image(stitched, "crop_cell");
  if (row >= layout.rows || col >= layout.cols) throw ShapeError("crop_cell: cell outside layout");
  if (stitched.dim(0) % layout.rows || stitched.dim(1) % layout.cols) throw ShapeError("crop_cell: image not divisible by layout");
  const std::size_t h = stitched.dim(0) / layout.rows, w = stitched.dim(1) / layout.cols, c = stitched.dim(2);
  const std::size_t in_w = stitched.dim(1);
  const auto src = stitched.data();
  std::vector<double> out(h * w * c);
  for (std::size_t i = 0; i < h; ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(((row * h + i) * in_w + col * w) * c), w * c,
                out.begin() + static_cast<std::ptrdiff_t>(i * w * c));
  }
  return Tensor({h, w, c}, std::move(out));
}

Tensor bilinear_resize(const Tensor& image, std::size_t out_height, std::size_t out_width) {
  check_image(image, "bilinear_resize");
  if (out_height == 0 || out_width == 0) throw ShapeError("bilinear_resize: zero target dimension");
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  if (H == 0 || W == 0) throw ShapeError("bilinear_resize: empty source image");
  const double sy_scale = static_cast<double>(H) / static_cast<double>(out_height);
  const double sx_scale = static_cast<double>(W) / static_cast<double>(out_width);
  const auto src = image.data();
  std::vector<double> out(out_height * out_width * C);

  // Column taps are shared by every output row.
  std::vector<std::size_t> x0(out_width), x1(out_width);
  std::vector<double> fx(out_width);
  for (std::size_t j = 0; j < out_width; ++j) {
    const double sx = std::clamp((static_cast<double>(j) + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(W - 1));
    x0[j] = static_cast<std::size_t>(sx);
    x1[j] = std::min(x0[j] + 1, W - 1);
    fx[j] = sx - static_cast<double>(x0[j]);
  }
  for (std::size_t i = 0; i < out_height; ++i) {
    const double sy = std::clamp((static_cast<double>(i) + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(H - 1));
    const std::size_t y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t j = 0; j < out_width; ++j) {
      const double w00 = (1.0 - fy) * (1.0 - fx[j]), w01 = (1.0 - fy) * fx[j];
      const double w10 = fy * (1.0 - fx[j]), w11 = fy * fx[j];
      for (std::size_t c = 0; c < C; ++c) {
        out[(i * out_width + j) * C + c] =
            w00 * src[(y0 * W + x0[j]) * C + c] + w01 * src[(y0 * W + x1[j]) * C + c] +
            w10 * src[(y1 * W + x0[j]) * C + c] + w11 * src[(y1 * W + x1[j]) * C + c];
      }
    }
  }
  return Tensor({out_height, out_width, C}, std::move(out));
}

Tensor channel_normalize(const Tensor& image, std::span<const double> mean, std::span<const double> stddev) {
  check_image(image, "channel_normalize");
  const std::size_t C = image.dim(2);
  if (mean.size() != C || stddev.size() != C) throw ShapeError("channel_normalize: statistics do not match channels");
  return ChannelStats{{mean.begin(), mean.end()}, {stddev.begin(), stddev.end()}}.apply(image);
}

ChannelStats ChannelStats::identity(std::size_t channels) {
  return ChannelStats{std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

Tensor ChannelStats::apply(const Tensor& images) const {
  if (images.rank() == 0) throw ShapeError("ChannelStats::apply: scalar input");
  const std::size_t C = images.shape().back();
  if (mean.size() != C || stddev.size() != C) throw ShapeError("ChannelStats::apply: statistics do not match channels");
  for (double s : stddev) {
    if (!(s > 0.0)) throw DomainError("channel normalization: standard deviation must be positive");
  }
  Tensor out = images;
  auto data = out.mutable_data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = (data[i] - mean[i % C]) / stddev[i % C];
  ensure_finite(out, "ChannelStats::apply");
  return out;
}

}  // namespace natsel
