#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "natsel/imageops.hpp"
#include "natsel/model.hpp"
#include "natsel/random.hpp"
#include "natsel/tensor.hpp"

namespace natsel {

enum class DatasetKind { synthetic_blobs, idx_files, cifar_binary };
enum class Split { train, test };

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& text);
std::string to_string(Split split);

struct Dataset {
  ImageShape shape;
  std::size_t num_classes = 0;
  Tensor images;                  // [N x H x W x C], raw pixels in [0, 1]
  std::vector<int> labels;        // training labels (possibly noisy)
  std::vector<int> clean_labels;  // labels before noise injection; diagnostics only

  std::size_t size() const { return labels.size(); }
  std::vector<std::size_t> class_counts() const;
};

struct DatasetRecipe {
  DatasetKind kind = DatasetKind::synthetic_blobs;
  std::size_t num_classes = 10;
  ImageShape shape{8, 8, 1};
  std::vector<std::size_t> per_class;  // length == num_classes
  double pixel_noise = 0.0;
  double label_noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// One fixed low-frequency template per class plus i.i.d. Gaussian pixel noise,
// clamped to [0, 1]. Samples are ordered by class. Templates depend only on
// recipe.seed, so train and test splits share them; the noise stream differs
// per split and per class. Label noise is not applied here.
Dataset gen_synthetic(const DatasetRecipe& recipe, Split split = Split::train);

// Class template images [K x H x W x C] used by gen_synthetic.
Tensor class_templates(const DatasetRecipe& recipe);

// n_k = round(n_max * IF^(-k / (K - 1))), at least 1.
std::vector<std::size_t> longtail_counts(std::size_t n_max, std::size_t num_classes, double imbalance_factor);

// Flips exactly floor(rate * N) labels, each to a uniformly chosen different
// class. clean_labels keeps the originals.
Dataset inject_label_noise(Dataset dataset, double rate, std::uint64_t seed);

// Keeps the first counts[k] samples of every class k (in dataset order).
Dataset subsample_per_class(const Dataset& dataset, std::span<const std::size_t> counts);

enum class SamplerKind { instance_uniform, cbs, srs, pbs };

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(const std::string& text);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::instance_uniform;
  std::size_t total_epochs = 1;  // T, read by pbs
  bool operator==(const SamplerConfig&) const = default;
};

// Per-class sampling probabilities at epoch t:
//   instance_uniform  n_k / sum n
//   cbs               1 / K
//   srs               sqrt(n_k) / sum sqrt(n)
//   pbs               (1 - t/T) n_k / sum n + (t/T) / K
std::vector<double> class_sampling_probs(std::span<const std::size_t> counts, const SamplerConfig& sampler,
                                         std::size_t epoch);

// Sample indices for one epoch. instance_uniform is a permutation of the
// dataset; the class-level samplers draw N indices with replacement (class by
// class_sampling_probs, then an instance uniformly within the class).
std::vector<std::size_t> epoch_order(const Dataset& dataset, const SamplerConfig& sampler, std::size_t epoch,
                                     Rng& rng);

// Per-channel mean and standard deviation over all pixels. A degenerate
// channel (stddev < 1e-8) gets stddev 1.
ChannelStats channel_stats(const Dataset& dataset);

// IDX (big-endian): magic 0x00000803 images [N x H x W] / 0x00000801 labels [N],
// unsigned bytes scaled to [0, 1].
Tensor load_idx_images(const std::filesystem::path& path);
std::vector<int> load_idx_labels(const std::filesystem::path& path);
// num_classes == 0 infers K from the largest label.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t num_classes = 0);
// Writes single-channel images quantized to round(v * 255).
void write_idx(const Dataset& dataset, const std::filesystem::path& images, const std::filesystem::path& labels);

enum class CifarVariant { cifar10, cifar100_fine, cifar100_coarse };

// Records of label byte(s) + 3072 channel-planar pixel bytes (32 x 32 x RGB).
// cifar100 records carry a coarse then a fine label byte.
Dataset load_cifar_binary(const std::filesystem::path& path, CifarVariant variant = CifarVariant::cifar10);

}  // namespace natsel
