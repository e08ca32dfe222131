#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "natsel/data.hpp"
#include "natsel/model.hpp"
#include "natsel/trainer.hpp"

namespace natsel {

// Where the images of an experiment come from and how they are shaped.
struct DataConfig {
  DatasetKind kind = DatasetKind::synthetic_blobs;
  std::size_t num_classes = 10;
  ImageShape shape{8, 8, 1};
  std::size_t per_class = 100;        // balanced train size per class
  std::size_t n_max = 0;              // > 0: long-tail train split, head class size
  double imbalance_factor = 1.0;      // n_max / n_min for the long-tail split
  double pixel_noise = 0.25;          // synthetic only
  double label_noise = 0.0;           // symmetric, train split only
  std::size_t test_per_class = 50;    // synthetic only
  // idx_files
  std::string train_images, train_labels, test_images, test_labels;
  // cifar_binary
  std::string train_file, test_file;
  CifarVariant cifar_variant = CifarVariant::cifar10;

  bool operator==(const DataConfig&) const = default;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{64};
  ConvStage conv;
  bool operator==(const ModelConfig&) const = default;
};

// One experiment: a dataset, a model family and a training recipe, repeated
// over a list of seeds. The per-seed dataset, init and shuffle seeds are all
// derived from the run seed.
struct ExperimentConfig {
  std::string label = "experiment";
  std::filesystem::path output_dir = "runs";
  std::vector<std::uint64_t> seeds{2024, 2025, 2026};
  DataConfig data;
  ModelConfig model;
  TrainConfig train;  // train.seed is ignored; see train_config(seed)
  bool dump_scores = false;

  void validate() const;
  ClassifierConfig classifier_config(std::uint64_t seed) const;
  TrainConfig train_config(std::uint64_t seed) const;
  bool operator==(const ExperimentConfig&) const = default;
};

// INI text: top-level keys label/output_dir/seeds, then sections [dataset],
// [model], [train] and [ns]. Missing keys take the defaults documented in the
// README; unknown keys, malformed values and invariant violations throw
// ConfigError. [dataset] kind and [ns] strategy are required.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical text with every key spelled out; parse_config(serialize(c)) == c.
std::string serialize(const ExperimentConfig& config);

std::string to_string(CifarVariant variant);
CifarVariant parse_cifar_variant(const std::string& text);

// Strict finite decimal number; throws ConfigError.
double parse_config_number(const std::string& text);

// Default layout for a group size: the most square R x C with R <= C.
GridLayout layout_for_group_size(std::size_t m);

}  // namespace natsel
