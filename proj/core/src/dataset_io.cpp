#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "natsel/data.hpp"
#include "natsel/error.hpp"

namespace natsel {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) throw FormatError(path.string() + ": truncated IDX header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

}  // namespace

Tensor load_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (read_be32(bytes, 0, path) != kIdxImages) throw FormatError(path.string() + ": bad IDX image magic");
  const std::size_t n = read_be32(bytes, 4, path), h = read_be32(bytes, 8, path), w = read_be32(bytes, 12, path);
  const std::size_t payload = n * h * w;
  if (bytes.size() < 16 + payload) throw FormatError(path.string() + ": truncated IDX image data");
  std::vector<double> pixels(payload);
  for (std::size_t i = 0; i < payload; ++i) pixels[i] = static_cast<double>(bytes[16 + i]) / 255.0;
  return Tensor({n, h, w, 1}, std::move(pixels));
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (read_be32(bytes, 0, path) != kIdxLabels) throw FormatError(path.string() + ": bad IDX label magic");
  const std::size_t n = read_be32(bytes, 4, path);
  if (bytes.size() < 8 + n) throw FormatError(path.string() + ": truncated IDX label data");
  return std::vector<int>(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(n));
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t num_classes) {
  Tensor pixels = load_idx_images(images);
  std::vector<int> ys = load_idx_labels(labels);
  if (ys.size() != pixels.dim(0)) throw FormatError("IDX image and label counts differ");
  const int max_label = ys.empty() ? 0 : *std::max_element(ys.begin(), ys.end());
  if (num_classes == 0) num_classes = static_cast<std::size_t>(max_label) + 1;
  if (static_cast<std::size_t>(max_label) >= num_classes) {
    throw FormatError(labels.string() + ": label " + std::to_string(max_label) + " out of range");
  }
  Dataset ds;
  ds.shape = ImageShape{pixels.dim(1), pixels.dim(2), 1};
  ds.num_classes = num_classes;
  ds.images = std::move(pixels);
  ds.labels = ys;
  ds.clean_labels = std::move(ys);
  return ds;
}

void write_idx(const Dataset& dataset, const std::filesystem::path& images, const std::filesystem::path& labels) {
  if (dataset.shape.channels != 1) throw FormatError("write_idx: IDX images are single-channel");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw FormatError("write_idx: cannot open output files");
  write_be32(img, kIdxImages);
  write_be32(img, static_cast<std::uint32_t>(dataset.size()));
  write_be32(img, static_cast<std::uint32_t>(dataset.shape.height));
  write_be32(img, static_cast<std::uint32_t>(dataset.shape.width));
  for (double v : dataset.images.data()) {
    img.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  write_be32(lab, kIdxLabels);
  write_be32(lab, static_cast<std::uint32_t>(dataset.size()));
  for (int y : dataset.labels) lab.put(static_cast<char>(static_cast<unsigned char>(y)));
  if (!img || !lab) throw FormatError("write_idx: write failed");
}

Dataset load_cifar_binary(const std::filesystem::path& path, CifarVariant variant) {
  constexpr std::size_t kSide = 32, kPlane = kSide * kSide, kPixels = 3 * kPlane;
  const std::size_t label_bytes = variant == CifarVariant::cifar10 ? 1 : 2;
  const std::size_t record = label_bytes + kPixels;
  const std::size_t num_classes = variant == CifarVariant::cifar10         ? 10
                                  : variant == CifarVariant::cifar100_fine ? 100
                                                                           : 20;
  const auto bytes = read_file(path);
  if (bytes.empty() || bytes.size() % record != 0) {
    throw FormatError(path.string() + ": size is not a whole number of CIFAR records (truncated?)");
  }
  const std::size_t n = bytes.size() / record;
  std::vector<double> pixels(n * kPixels);
  std::vector<int> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    const unsigned char* rec = bytes.data() + r * record;
    const int label = variant == CifarVariant::cifar100_fine ? rec[1] : rec[0];
    if (static_cast<std::size_t>(label) >= num_classes) {
      throw FormatError(path.string() + ": label " + std::to_string(label) + " out of range in record " +
                        std::to_string(r));
    }
    labels[r] = label;
    const unsigned char* px = rec + label_bytes;
    // Channel-planar on disk, interleaved [H x W x 3] in memory.
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < kPlane; ++p) pixels[r * kPixels + p * 3 + c] = static_cast<double>(px[c * kPlane + p]) / 255.0;
  }
  Dataset ds;
  ds.shape = ImageShape{kSide, kSide, 3};
  ds.num_classes = num_classes;
  ds.images = Tensor({n, kSide, kSide, 3}, std::move(pixels));
  ds.labels = labels;
  ds.clean_labels = std::move(labels);
  return ds;
}

}  // namespace natsel
