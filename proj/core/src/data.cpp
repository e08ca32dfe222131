#include "natsel/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "natsel/error.hpp"

namespace natsel {

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::synthetic_blobs: return "synthetic_blobs";
    case DatasetKind::idx_files: return "idx_files";
    case DatasetKind::cifar_binary: return "cifar_binary";
  }
  return "?";
}

DatasetKind parse_dataset_kind(const std::string& text) {
  if (text == "synthetic_blobs") return DatasetKind::synthetic_blobs;
  if (text == "idx_files") return DatasetKind::idx_files;
  if (text == "cifar_binary") return DatasetKind::cifar_binary;
  throw ConfigError("unknown dataset kind '" + text + "'");
}

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::instance_uniform: return "instance_uniform";
    case SamplerKind::cbs: return "cbs";
    case SamplerKind::srs: return "srs";
    case SamplerKind::pbs: return "pbs";
  }
  return "?";
}

SamplerKind parse_sampler_kind(const std::string& text) {
  if (text == "instance_uniform") return SamplerKind::instance_uniform;
  if (text == "cbs") return SamplerKind::cbs;
  if (text == "srs") return SamplerKind::srs;
  if (text == "pbs") return SamplerKind::pbs;
  throw ConfigError("unknown sampler '" + text + "'");
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

void DatasetRecipe::validate() const {
  if (num_classes < 2) throw ConfigError("dataset needs at least 2 classes");
  if (shape.height < 2 || shape.width < 2 || shape.channels < 1) throw ConfigError("dataset image shape too small");
  if (per_class.size() != num_classes) throw ConfigError("per-class counts must have one entry per class");
  if (!(pixel_noise >= 0.0) || !std::isfinite(pixel_noise)) throw ConfigError("pixel noise must be >= 0");
  if (!(label_noise >= 0.0 && label_noise < 1.0)) throw ConfigError("label noise rate must lie in [0, 1)");
}

Tensor class_templates(const DatasetRecipe& recipe) {
  recipe.validate();
  const ImageShape& s = recipe.shape;
  std::vector<double> out;
  out.reserve(recipe.num_classes * s.pixels());
  constexpr int kComponents = 3;
  for (std::size_t k = 0; k < recipe.num_classes; ++k) {
    Rng rng(derive_seed(derive_seed(recipe.seed, "template"), k));
    std::uniform_int_distribution<int> freq(0, 2);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> amp(0.5, 1.0);
    struct Wave { int fy, fx; double amp; std::vector<double> phase; };
    std::vector<Wave> waves;
    for (int c = 0; c < kComponents; ++c) {
      Wave w{freq(rng), freq(rng), amp(rng), {}};
      if (w.fx == 0 && w.fy == 0) w.fx = 1;
      for (std::size_t ch = 0; ch < s.channels; ++ch) w.phase.push_back(phase(rng));
      waves.push_back(std::move(w));
    }
    double norm = 0.0;
    for (const Wave& w : waves) norm += w.amp;
    for (std::size_t i = 0; i < s.height; ++i) {
      for (std::size_t j = 0; j < s.width; ++j) {
        const double y = static_cast<double>(i) / static_cast<double>(s.height);
        const double x = static_cast<double>(j) / static_cast<double>(s.width);
        for (std::size_t ch = 0; ch < s.channels; ++ch) {
          double v = 0.0;
          for (const Wave& w : waves) {
            v += w.amp * std::cos(2.0 * std::numbers::pi * (w.fy * y + w.fx * x) + w.phase[ch]);
          }
          out.push_back(0.5 + 0.4 * v / norm);
        }
      }
    }
  }
  return Tensor({recipe.num_classes, s.height, s.width, s.channels}, std::move(out));
}

Dataset gen_synthetic(const DatasetRecipe& recipe, Split split) {
  if (recipe.kind != DatasetKind::synthetic_blobs) throw ConfigError("gen_synthetic: recipe is not synthetic_blobs");
  const Tensor templates = class_templates(recipe);
  const std::size_t pixels = recipe.shape.pixels();
  const std::size_t total = std::accumulate(recipe.per_class.begin(), recipe.per_class.end(), std::size_t{0});

  Dataset ds;
  ds.shape = recipe.shape;
  ds.num_classes = recipe.num_classes;
  std::vector<double> images;
  images.reserve(total * pixels);
  const std::uint64_t split_seed = derive_seed(recipe.seed, to_string(split));
  for (std::size_t k = 0; k < recipe.num_classes; ++k) {
    Rng rng(derive_seed(split_seed, k));
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto tmpl = templates.data().subspan(k * pixels, pixels);
    for (std::size_t n = 0; n < recipe.per_class[k]; ++n) {
      for (double t : tmpl) {
        const double v = recipe.pixel_noise > 0.0 ? t + recipe.pixel_noise * noise(rng) : t;
        images.push_back(std::clamp(v, 0.0, 1.0));
      }
      ds.labels.push_back(static_cast<int>(k));
    }
  }
  ds.images = Tensor({total, recipe.shape.height, recipe.shape.width, recipe.shape.channels}, std::move(images));
  ds.clean_labels = ds.labels;
  return ds;
}

std::vector<std::size_t> longtail_counts(std::size_t n_max, std::size_t num_classes, double imbalance_factor) {
  if (num_classes < 2) throw ConfigError("longtail_counts: need at least 2 classes");
  if (!(imbalance_factor >= 1.0) || !std::isfinite(imbalance_factor)) {
    throw ConfigError("longtail_counts: imbalance factor must be >= 1");
  }
  if (n_max == 0) throw ConfigError("longtail_counts: n_max must be positive");
  std::vector<std::size_t> counts(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double exponent = -static_cast<double>(k) / static_cast<double>(num_classes - 1);
    const double n = std::round(static_cast<double>(n_max) * std::pow(imbalance_factor, exponent));
    counts[k] = std::max<std::size_t>(1, static_cast<std::size_t>(n));
  }
  return counts;
}

Dataset inject_label_noise(Dataset dataset, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("label noise rate must lie in [0, 1)");
  const std::size_t n = dataset.size();
  // The epsilon keeps products like 0.29 * 100 from flooring to 28.
  const auto flips = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
  if (flips == 0) return dataset;
  if (dataset.num_classes < 2) throw ConfigError("label noise needs at least 2 classes");
  Rng rng(derive_seed(seed, "label-noise"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> other(0, static_cast<int>(dataset.num_classes) - 2);
  for (std::size_t i = 0; i < flips; ++i) {
    int& label = dataset.labels[order[i]];
    const int draw = other(rng);
    label = draw >= label ? draw + 1 : draw;
  }
  return dataset;
}

Dataset subsample_per_class(const Dataset& dataset, std::span<const std::size_t> counts) {
  if (counts.size() != dataset.num_classes) throw ConfigError("subsample_per_class: one count per class required");
  std::vector<std::size_t> taken(dataset.num_classes, 0), keep;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto k = static_cast<std::size_t>(dataset.labels[i]);
    if (taken[k] < counts[k]) {
      ++taken[k];
      keep.push_back(i);
    }
  }
  Dataset out;
  out.shape = dataset.shape;
  out.num_classes = dataset.num_classes;
  out.images = gather(dataset.images, keep);
  for (std::size_t i : keep) {
    out.labels.push_back(dataset.labels[i]);
    out.clean_labels.push_back(dataset.clean_labels[i]);
  }
  return out;
}

std::vector<double> class_sampling_probs(std::span<const std::size_t> counts, const SamplerConfig& sampler,
                                         std::size_t epoch) {
  const std::size_t k = counts.size();
  if (k == 0) throw ConfigError("class_sampling_probs: no classes");
  double total = 0.0, total_sqrt = 0.0;
  for (std::size_t n : counts) {
    if (n == 0) throw ConfigError("class_sampling_probs: class counts must be positive");
    total += static_cast<double>(n);
    total_sqrt += std::sqrt(static_cast<double>(n));
  }
  const double uniform = 1.0 / static_cast<double>(k);
  std::vector<double> p(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double freq = static_cast<double>(counts[i]) / total;
    switch (sampler.kind) {
      case SamplerKind::instance_uniform: p[i] = freq; break;
      case SamplerKind::cbs: p[i] = uniform; break;
      case SamplerKind::srs: p[i] = std::sqrt(static_cast<double>(counts[i])) / total_sqrt; break;
      case SamplerKind::pbs: {
        const double t = std::min(1.0, static_cast<double>(epoch) / static_cast<double>(std::max<std::size_t>(sampler.total_epochs, 1)));
        p[i] = (1.0 - t) * freq + t * uniform;
        break;
      }
    }
  }
  return p;
}

std::vector<std::size_t> epoch_order(const Dataset& dataset, const SamplerConfig& sampler, std::size_t epoch,
                                     Rng& rng) {
  const std::size_t n = dataset.size();
  std::vector<std::size_t> order;
  if (sampler.kind == SamplerKind::instance_uniform) {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    return order;
  }
  std::vector<std::vector<std::size_t>> members(dataset.num_classes);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
  // Classes without samples cannot be drawn; sample among the present ones.
  std::vector<std::size_t> present, counts;
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (!members[k].empty()) {
      present.push_back(k);
      counts.push_back(members[k].size());
    }
  }
  const std::vector<double> probs = class_sampling_probs(counts, sampler, epoch);
  std::discrete_distribution<std::size_t> pick_class(probs.begin(), probs.end());
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pool = members[present[pick_class(rng)]];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    order.push_back(pool[pick(rng)]);
  }
  return order;
}

ChannelStats channel_stats(const Dataset& dataset) {
  const std::size_t c = dataset.shape.channels;
  std::vector<double> sum(c, 0.0), sq(c, 0.0);
  const auto px = dataset.images.data();
  for (std::size_t i = 0; i < px.size(); ++i) sum[i % c] += px[i];
  const double per_channel = static_cast<double>(px.size() / std::max<std::size_t>(c, 1));
  ChannelStats stats = ChannelStats::identity(c);
  if (per_channel == 0.0) return stats;
  for (std::size_t ch = 0; ch < c; ++ch) stats.mean[ch] = sum[ch] / per_channel;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double d = px[i] - stats.mean[i % c];
    sq[i % c] += d * d;
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double sd = std::sqrt(sq[ch] / per_channel);
    stats.stddev[ch] = sd < 1e-8 ? 1.0 : sd;
  }
  return stats;
}

}  // namespace natsel
