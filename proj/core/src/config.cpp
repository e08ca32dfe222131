#include "natsel/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "natsel/csv.hpp"
#include "natsel/error.hpp"
#include "natsel/random.hpp"

namespace natsel {

namespace pt = boost::property_tree;

std::string to_string(CifarVariant variant) {
  switch (variant) {
    case CifarVariant::cifar10: return "cifar10";
    case CifarVariant::cifar100_fine: return "cifar100_fine";
    case CifarVariant::cifar100_coarse: return "cifar100_coarse";
  }
  return "?";
}

CifarVariant parse_cifar_variant(const std::string& text) {
  if (text == "cifar10") return CifarVariant::cifar10;
  if (text == "cifar100_fine") return CifarVariant::cifar100_fine;
  if (text == "cifar100_coarse") return CifarVariant::cifar100_coarse;
  throw ConfigError("unknown cifar variant '" + text + "'");
}

GridLayout layout_for_group_size(std::size_t m) {
  if (m < 2) throw ConfigError("group size must be >= 2");
  std::size_t rows = 1;
  for (std::size_t r = 1; r * r <= m; ++r) {
    if (m % r == 0) rows = r;
  }
  return GridLayout{rows, m / rows};
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  for (const std::string& f : split_fields(text, ',')) out.push_back(trim(f));
  return out;
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& text) {
  T value{};
  const std::string t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(value)) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true") return true;
  if (t == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<Milestone> parse_milestones(const std::string& text) {
  std::vector<Milestone> out;
  for (const std::string& item : split_list(text)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("train.milestones: expected epoch:factor, got '" + item + "'");
    out.push_back(Milestone{parse_unsigned<std::size_t>("train.milestones", item.substr(0, colon)),
                            parse_real("train.milestones", item.substr(colon + 1))});
  }
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += fmt(values[i]);
  }
  return out;
}

// Key handlers per section. Each handler parses the raw value into the config.
using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

struct Fields {
  std::map<std::string, Setter> top, dataset, model, train, ns;
};

const Fields& fields() {
  static const Fields f = [] {
    Fields f;
    f.top["label"] = [](ExperimentConfig& c, const std::string& v) { c.label = trim(v); };
    f.top["output_dir"] = [](ExperimentConfig& c, const std::string& v) { c.output_dir = trim(v); };
    f.top["seeds"] = [](ExperimentConfig& c, const std::string& v) {
      c.seeds.clear();
      for (const auto& s : split_list(v)) c.seeds.push_back(parse_unsigned<std::uint64_t>("seeds", s));
    };

    f.dataset["kind"] = [](ExperimentConfig& c, const std::string& v) { c.data.kind = parse_dataset_kind(trim(v)); };
    f.dataset["classes"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.num_classes = parse_unsigned<std::size_t>("dataset.classes", v);
    };
    f.dataset["height"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.shape.height = parse_unsigned<std::size_t>("dataset.height", v);
    };
    f.dataset["width"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.shape.width = parse_unsigned<std::size_t>("dataset.width", v);
    };
    f.dataset["channels"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.shape.channels = parse_unsigned<std::size_t>("dataset.channels", v);
    };
    f.dataset["per_class"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.per_class = parse_unsigned<std::size_t>("dataset.per_class", v);
    };
    f.dataset["n_max"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.n_max = parse_unsigned<std::size_t>("dataset.n_max", v);
    };
    f.dataset["imbalance_factor"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.imbalance_factor = parse_real("dataset.imbalance_factor", v);
    };
    f.dataset["pixel_noise"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.pixel_noise = parse_real("dataset.pixel_noise", v);
    };
    f.dataset["label_noise"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.label_noise = parse_real("dataset.label_noise", v);
    };
    f.dataset["test_per_class"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.test_per_class = parse_unsigned<std::size_t>("dataset.test_per_class", v);
    };
    f.dataset["train_images"] = [](ExperimentConfig& c, const std::string& v) { c.data.train_images = trim(v); };
    f.dataset["train_labels"] = [](ExperimentConfig& c, const std::string& v) { c.data.train_labels = trim(v); };
    f.dataset["test_images"] = [](ExperimentConfig& c, const std::string& v) { c.data.test_images = trim(v); };
    f.dataset["test_labels"] = [](ExperimentConfig& c, const std::string& v) { c.data.test_labels = trim(v); };
    f.dataset["train_file"] = [](ExperimentConfig& c, const std::string& v) { c.data.train_file = trim(v); };
    f.dataset["test_file"] = [](ExperimentConfig& c, const std::string& v) { c.data.test_file = trim(v); };
    f.dataset["cifar_variant"] = [](ExperimentConfig& c, const std::string& v) {
      c.data.cifar_variant = parse_cifar_variant(trim(v));
    };

    f.model["hidden"] = [](ExperimentConfig& c, const std::string& v) {
      c.model.hidden.clear();
      for (const auto& s : split_list(v)) c.model.hidden.push_back(parse_unsigned<std::size_t>("model.hidden", s));
    };
    f.model["conv_kernel"] = [](ExperimentConfig& c, const std::string& v) {
      c.model.conv.kernel = parse_unsigned<std::size_t>("model.conv_kernel", v);
    };
    f.model["conv_channels"] = [](ExperimentConfig& c, const std::string& v) {
      c.model.conv.out_channels = parse_unsigned<std::size_t>("model.conv_channels", v);
    };
    f.model["loss"] = [](ExperimentConfig& c, const std::string& v) { c.train.loss.kind = parse_loss_kind(trim(v)); };
    f.model["focal_gamma"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.loss.focal_gamma = parse_real("model.focal_gamma", v);
    };
    f.model["smoothing"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.loss.smoothing = parse_real("model.smoothing", v);
    };

    f.train["batch_size"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.batch_size = parse_unsigned<std::size_t>("train.batch_size", v);
    };
    f.train["epochs"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.epochs = parse_unsigned<std::size_t>("train.epochs", v);
    };
    f.train["learning_rate"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.learning_rate = parse_real("train.learning_rate", v);
    };
    f.train["momentum"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.momentum = parse_real("train.momentum", v);
    };
    f.train["milestones"] = [](ExperimentConfig& c, const std::string& v) { c.train.milestones = parse_milestones(v); };
    f.train["sampler"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.sampler.kind = parse_sampler_kind(trim(v));
    };

    f.ns["enabled"] = [](ExperimentConfig& c, const std::string& v) { c.train.ns_enabled = parse_bool("ns.enabled", v); };
    f.ns["strategy"] = [](ExperimentConfig& c, const std::string& v) {
      c.train.weighting.strategy = parse_strategy(trim(v));
    };
    f.ns["sigma"] = [](ExperimentConfig& c, const std::string& v) { c.train.weighting.sigma = parse_real("ns.sigma", v); };
    f.ns["rho"] = [](ExperimentConfig& c, const std::string& v) { c.train.weighting.rho = parse_real("ns.rho", v); };
    f.ns["layout"] = [](ExperimentConfig& c, const std::string& v) { c.train.layout = parse_layout(trim(v)); };
    // group_size is cross-checked against the layout after all keys are read.
    f.ns["group_size"] = [](ExperimentConfig&, const std::string& v) {
      (void)parse_unsigned<std::size_t>("ns.group_size", v);
    };
    f.ns["dump_scores"] = [](ExperimentConfig& c, const std::string& v) { c.dump_scores = parse_bool("ns.dump_scores", v); };
    return f;
  }();
  return f;
}

void apply_section(ExperimentConfig& cfg, const pt::ptree& section, const std::map<std::string, Setter>& setters,
                   const std::string& prefix) {
  for (const auto& [key, node] : section) {
    if (!node.empty()) throw ConfigError("unexpected nested section '" + prefix + key + "'");
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown key '" + prefix + key + "'");
    it->second(cfg, node.data());
  }
}

}  // namespace

double parse_config_number(const std::string& text) { return parse_real("value", text); }

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seed list must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seed list contains duplicates");
  }
  if (label.empty()) throw ConfigError("label must not be empty");
  if (label.find_first_of(",/\\") != std::string::npos) throw ConfigError("label may not contain ',', '/' or '\\'");
  if (data.num_classes < 2) throw ConfigError("dataset.classes must be >= 2");
  if (data.shape.height < 2 || data.shape.width < 2 || data.shape.channels < 1) {
    throw ConfigError("dataset image shape too small");
  }
  if (!(data.pixel_noise >= 0.0)) throw ConfigError("dataset.pixel_noise must be >= 0");
  if (!(data.label_noise >= 0.0 && data.label_noise < 1.0)) throw ConfigError("dataset.label_noise must lie in [0, 1)");
  if (!(data.imbalance_factor >= 1.0)) throw ConfigError("dataset.imbalance_factor must be >= 1");
  if (data.n_max == 0 && data.imbalance_factor != 1.0) {
    throw ConfigError("dataset.imbalance_factor needs dataset.n_max > 0");
  }
  switch (data.kind) {
    case DatasetKind::synthetic_blobs:
      if (data.n_max == 0 && data.per_class == 0) throw ConfigError("dataset.per_class must be positive");
      if (data.test_per_class == 0) throw ConfigError("dataset.test_per_class must be positive");
      break;
    case DatasetKind::idx_files:
      if (data.train_images.empty() || data.train_labels.empty() || data.test_images.empty() ||
          data.test_labels.empty()) {
        throw ConfigError("idx_files needs train_images, train_labels, test_images and test_labels");
      }
      break;
    case DatasetKind::cifar_binary:
      if (data.train_file.empty() || data.test_file.empty()) throw ConfigError("cifar_binary needs train_file and test_file");
      break;
  }
  if (model.conv.enabled()) {
    if (model.conv.out_channels == 0) throw ConfigError("model.conv_channels must be positive with a conv stage");
    if (model.conv.kernel > data.shape.height || model.conv.kernel > data.shape.width) {
      throw ConfigError("model.conv_kernel larger than the image");
    }
  } else if (model.conv.out_channels != 0) {
    throw ConfigError("model.conv_channels set without model.conv_kernel");
  }
  for (std::size_t h : model.hidden) {
    if (h == 0) throw ConfigError("model.hidden widths must be positive");
  }
  if (train.epochs == 0) throw ConfigError("train.epochs must be positive");
  train.validate();
  classifier_config(seeds.front()).validate();
}

ClassifierConfig ExperimentConfig::classifier_config(std::uint64_t seed) const {
  ClassifierConfig c;
  c.input = data.shape;
  c.hidden = model.hidden;
  c.conv = model.conv;
  c.num_classes = data.num_classes;
  c.init_seed = derive_seed(seed, "init");
  return c;
}

TrainConfig ExperimentConfig::train_config(std::uint64_t seed) const {
  TrainConfig t = train;
  t.seed = seed;
  t.sampler.total_epochs = t.epochs;
  return t;
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  ExperimentConfig cfg;
  const Fields& f = fields();
  bool has_kind = false, has_strategy = false;
  std::optional<std::size_t> group_size;
  bool has_layout = false, has_rho = false;
  for (const auto& [name, node] : tree) {
    const bool is_section = name == "dataset" || name == "model" || name == "train" || name == "ns";
    if (node.empty() && !is_section) {
      const auto it = f.top.find(name);
      if (it == f.top.end()) throw ConfigError("unknown key '" + name + "'");
      it->second(cfg, node.data());
      continue;
    }
    if (name == "dataset") {
      apply_section(cfg, node, f.dataset, "dataset.");
      has_kind = node.count("kind") > 0;
    } else if (name == "model") {
      apply_section(cfg, node, f.model, "model.");
    } else if (name == "train") {
      apply_section(cfg, node, f.train, "train.");
    } else if (name == "ns") {
      apply_section(cfg, node, f.ns, "ns.");
      has_strategy = node.count("strategy") > 0;
      has_layout = node.count("layout") > 0;
      has_rho = node.count("rho") > 0;
      if (const auto m = node.get_optional<std::string>("group_size")) {
        group_size = parse_unsigned<std::size_t>("ns.group_size", *m);
      }
    } else {
      throw ConfigError("unknown section [" + name + "]");
    }
  }
  if (!has_kind) throw ConfigError("missing required key 'dataset.kind'");
  if (!has_strategy) throw ConfigError("missing required key 'ns.strategy'");
  if (!has_rho) cfg.train.weighting.rho = default_rho(cfg.train.weighting.strategy);
  if (group_size) {
    if (!has_layout) {
      cfg.train.layout = layout_for_group_size(*group_size);
    } else if (cfg.train.layout.size() != *group_size) {
      throw ConfigError("ns.group_size " + std::to_string(*group_size) + " does not match layout " +
                        to_string(cfg.train.layout) + " (rows * cols = " + std::to_string(cfg.train.layout.size()) + ")");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize(const ExperimentConfig& c) {
  auto num = [](double v) { return format_number(v); };
  auto uint = [](auto v) { return std::to_string(v); };
  std::ostringstream out;
  out << "label = " << c.label << '\n';
  out << "output_dir = " << c.output_dir.string() << '\n';
  out << "seeds = " << join(c.seeds, uint) << '\n';
  out << "\n[dataset]\n";
  out << "kind = " << to_string(c.data.kind) << '\n';
  out << "classes = " << c.data.num_classes << '\n';
  out << "height = " << c.data.shape.height << '\n';
  out << "width = " << c.data.shape.width << '\n';
  out << "channels = " << c.data.shape.channels << '\n';
  out << "per_class = " << c.data.per_class << '\n';
  out << "n_max = " << c.data.n_max << '\n';
  out << "imbalance_factor = " << num(c.data.imbalance_factor) << '\n';
  out << "pixel_noise = " << num(c.data.pixel_noise) << '\n';
  out << "label_noise = " << num(c.data.label_noise) << '\n';
  out << "test_per_class = " << c.data.test_per_class << '\n';
  out << "train_images = " << c.data.train_images << '\n';
  out << "train_labels = " << c.data.train_labels << '\n';
  out << "test_images = " << c.data.test_images << '\n';
  out << "test_labels = " << c.data.test_labels << '\n';
  out << "train_file = " << c.data.train_file << '\n';
  out << "test_file = " << c.data.test_file << '\n';
  out << "cifar_variant = " << to_string(c.data.cifar_variant) << '\n';
  out << "\n[model]\n";
  out << "hidden = " << join(c.model.hidden, uint) << '\n';
  out << "conv_kernel = " << c.model.conv.kernel << '\n';
  out << "conv_channels = " << c.model.conv.out_channels << '\n';
  out << "loss = " << to_string(c.train.loss.kind) << '\n';
  out << "focal_gamma = " << num(c.train.loss.focal_gamma) << '\n';
  out << "smoothing = " << num(c.train.loss.smoothing) << '\n';
  out << "\n[train]\n";
  out << "batch_size = " << c.train.batch_size << '\n';
  out << "epochs = " << c.train.epochs << '\n';
  out << "learning_rate = " << num(c.train.learning_rate) << '\n';
  out << "momentum = " << num(c.train.momentum) << '\n';
  out << "milestones = "
      << join(c.train.milestones, [&](const Milestone& m) { return std::to_string(m.epoch) + ":" + num(m.factor); })
      << '\n';
  out << "sampler = " << to_string(c.train.sampler.kind) << '\n';
  out << "\n[ns]\n";
  out << "enabled = " << (c.train.ns_enabled ? "true" : "false") << '\n';
  out << "strategy = " << to_string(c.train.weighting.strategy) << '\n';
  out << "sigma = " << num(c.train.weighting.sigma) << '\n';
  out << "rho = " << num(c.train.weighting.rho) << '\n';
  out << "layout = " << to_string(c.train.layout) << '\n';
  out << "group_size = " << c.train.layout.size() << '\n';
  out << "dump_scores = " << (c.dump_scores ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace natsel
