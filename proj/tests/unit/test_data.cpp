#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include "natsel/data.hpp"
#include "natsel/error.hpp"
#include "test_support.hpp"

using namespace natsel;
namespace fs = std::filesystem;

namespace {

DatasetRecipe recipe(std::size_t k, std::size_t per_class, double noise, std::uint64_t seed) {
  DatasetRecipe r;
  r.num_classes = k;
  r.shape = ImageShape{6, 5, 2};
  r.per_class.assign(k, per_class);
  r.pixel_noise = noise;
  r.seed = seed;
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("natsel_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 8),
          static_cast<unsigned char>(v)};
}

std::vector<unsigned char> concat(std::initializer_list<std::vector<unsigned char>> parts) {
  std::vector<unsigned char> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

TEST_CASE("synthetic generation examples") {
  const Dataset ds = gen_synthetic(recipe(2, 5, 0.3, 1));
  CHECK(ds.size() == 10);
  CHECK(ds.class_counts() == std::vector<std::size_t>{5, 5});
  CHECK(ds.images.shape() == Shape{10, 6, 5, 2});

  const auto clean = recipe(3, 4, 0.0, 9);
  const Dataset exact = gen_synthetic(clean);
  const Tensor templates = class_templates(clean);
  for (std::size_t i = 0; i < exact.size(); ++i) {
    CHECK(select(exact.images, i) == select(templates, static_cast<std::size_t>(exact.labels[i])));
  }
}

TEST_CASE("synthetic generation is deterministic and bounded") {
  const auto r = recipe(4, 6, 0.5, 77);
  const Dataset a = gen_synthetic(r), b = gen_synthetic(r);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(gen_synthetic(r, Split::test).images == a.images);
  CHECK(class_templates(r) == class_templates(r));
  for (double v : a.images.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // Templates are distinct per class.
  const Tensor t = class_templates(r);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) CHECK_FALSE(select(t, i) == select(t, j));
  auto other = r;
  other.seed = 78;
  CHECK_FALSE(gen_synthetic(other).images == a.images);
}

TEST_CASE("recipe validation") {
  auto r = recipe(3, 2, 0.1, 0);
  r.per_class = {1, 2};
  CHECK_THROWS_AS(gen_synthetic(r), ConfigError);
  r = recipe(1, 2, 0.1, 0);
  CHECK_THROWS_AS(gen_synthetic(r), ConfigError);
  r = recipe(2, 2, -0.1, 0);
  CHECK_THROWS_AS(gen_synthetic(r), ConfigError);
}

TEST_CASE("long-tail count examples") {
  CHECK(longtail_counts(100, 2, 100.0) == std::vector<std::size_t>{100, 1});
  CHECK(longtail_counts(100, 3, 100.0) == std::vector<std::size_t>{100, 10, 1});
  CHECK(longtail_counts(37, 6, 1.0) == std::vector<std::size_t>(6, 37));
  CHECK_THROWS_AS(longtail_counts(100, 1, 10.0), ConfigError);
  CHECK_THROWS_AS(longtail_counts(100, 4, 0.5), ConfigError);
}

TEST_CASE("long-tail counts are non-increasing and hit both endpoints") {
  for (std::size_t k : {2u, 3u, 5u, 10u, 17u}) {
    for (double f : {1.0, 10.0, 50.0, 100.0, 200.0}) {
      for (std::size_t n : {1u, 7u, 100u, 500u, 5000u}) {
        const auto c = longtail_counts(n, k, f);
        REQUIRE(c.size() == k);
        CHECK(c.front() == n);
        CHECK(c.back() == std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n / f))));
        for (std::size_t i = 0; i < k; ++i) {
          CHECK(c[i] >= 1);
          if (i > 0) CHECK(c[i] <= c[i - 1]);
        }
      }
    }
  }
}

TEST_CASE("label noise flips an exact count to other classes") {
  const Dataset base = gen_synthetic(recipe(10, 100, 0.1, 3));
  CHECK(inject_label_noise(base, 0.0, 5).labels == base.labels);

  const Dataset noisy = inject_label_noise(base, 0.2, 5);
  REQUIRE(noisy.size() == 1000);
  CHECK(noisy.clean_labels == base.labels);
  CHECK(noisy.images == base.images);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    if (noisy.labels[i] != noisy.clean_labels[i]) ++flipped;
    CHECK(noisy.labels[i] >= 0);
    CHECK(noisy.labels[i] < 10);
  }
  CHECK(flipped == 200);
  CHECK(inject_label_noise(base, 0.2, 5).labels == noisy.labels);
  CHECK_FALSE(inject_label_noise(base, 0.2, 6).labels == noisy.labels);

  for (std::size_t n : {7u, 13u, 99u}) {
    const Dataset small = gen_synthetic(recipe(2, n, 0.0, 1));
    const Dataset flip = inject_label_noise(small, 0.35, 2);
    std::size_t count = 0;
    for (std::size_t i = 0; i < flip.size(); ++i) count += flip.labels[i] != flip.clean_labels[i];
    CHECK(count == static_cast<std::size_t>(std::floor(0.35 * static_cast<double>(2 * n))));
  }
  CHECK_THROWS_AS(inject_label_noise(base, 1.0, 1), ConfigError);
}

TEST_CASE("subsampling keeps the first samples of each class") {
  const Dataset ds = gen_synthetic(recipe(3, 5, 0.2, 4));
  const std::vector<std::size_t> counts{5, 2, 1};
  const Dataset sub = subsample_per_class(ds, counts);
  CHECK(sub.class_counts() == counts);
  CHECK(select(sub.images, 5) == select(ds.images, 5));
  CHECK(select(sub.images, 7) == select(ds.images, 10));
}

TEST_CASE("sampling probability examples") {
  const std::vector<std::size_t> four{5, 50, 500, 7};
  for (double p : class_sampling_probs(four, SamplerConfig{SamplerKind::cbs, 1}, 0)) CHECK(p == 0.25);
  const std::vector<std::size_t> two{100, 1};
  const auto srs = class_sampling_probs(two, SamplerConfig{SamplerKind::srs, 1}, 0);
  CHECK(std::abs(srs[0] - 10.0 / 11.0) <= 1e-15);
  CHECK(std::abs(srs[1] - 1.0 / 11.0) <= 1e-15);
  const SamplerConfig pbs{SamplerKind::pbs, 10};
  CHECK(class_sampling_probs(four, pbs, 0) == class_sampling_probs(four, SamplerConfig{}, 0));
  const auto end = class_sampling_probs(four, pbs, 10);
  for (double p : end) CHECK(std::abs(p - 0.25) <= 1e-15);
  const auto mid = class_sampling_probs(two, pbs, 5);
  CHECK(std::abs(mid[0] - (0.5 * 100.0 / 101.0 + 0.25)) <= 1e-15);
}

TEST_CASE("sampling probabilities are distributions") {
  Rng rng(12);
  std::uniform_int_distribution<std::size_t> count(1, 1000), classes(2, 20);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> counts(classes(rng));
    for (auto& c : counts) c = count(rng);
    for (const SamplerKind kind : {SamplerKind::instance_uniform, SamplerKind::cbs, SamplerKind::srs, SamplerKind::pbs}) {
      const SamplerConfig cfg{kind, 12};
      const auto p = class_sampling_probs(counts, cfg, static_cast<std::size_t>(trial % 13));
      double total = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
  const std::vector<std::size_t> bad{3, 0};
  CHECK_THROWS_AS(class_sampling_probs(bad, SamplerConfig{}, 0), ConfigError);
}

TEST_CASE("epoch order") {
  const Dataset ds = gen_synthetic(recipe(3, 4, 0.0, 1));
  Rng a(5), b(5);
  const auto perm = epoch_order(ds, SamplerConfig{}, 0, a);
  CHECK(perm == epoch_order(ds, SamplerConfig{}, 0, b));
  std::vector<std::size_t> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(ds.size());
  std::iota(iota.begin(), iota.end(), std::size_t{0});
  CHECK(sorted == iota);
  Rng c(6);
  const auto draws = epoch_order(ds, SamplerConfig{SamplerKind::cbs, 4}, 1, c);
  CHECK(draws.size() == ds.size());
  for (auto i : draws) CHECK(i < ds.size());
  CHECK(parse_sampler_kind(to_string(SamplerKind::srs)) == SamplerKind::srs);
}

TEST_CASE("channel stats") {
  DatasetRecipe r = recipe(2, 3, 0.0, 1);
  Dataset ds = gen_synthetic(r);
  const ChannelStats stats = channel_stats(ds);
  REQUIRE(stats.mean.size() == 2);
  const Tensor normalized = stats.apply(ds.images);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (std::size_t i = ch; i < normalized.size(); i += 2, n += 1.0) {
      sum += normalized[i];
      sq += normalized[i] * normalized[i];
    }
    CHECK(std::abs(sum / n) <= 1e-12);
    CHECK(std::abs(sq / n - 1.0) <= 1e-9);
  }
  ds.images = Tensor(ds.images.shape(), 0.3);
  const ChannelStats flat = channel_stats(ds);
  CHECK(flat.stddev == std::vector<double>{1.0, 1.0});
}

TEST_CASE("IDX label file example and errors") {
  TempDir dir("idx_example");
  write_bytes(dir.path / "labels", concat({be32(0x801), be32(2), {3, 7}}));
  CHECK(load_idx_labels(dir.path / "labels") == std::vector<int>{3, 7});
  write_bytes(dir.path / "bad_magic", concat({be32(0x802), be32(2), {3, 7}}));
  CHECK_THROWS_AS(load_idx_labels(dir.path / "bad_magic"), FormatError);
  write_bytes(dir.path / "short", concat({be32(0x801), be32(3), {3, 7}}));
  CHECK_THROWS_AS(load_idx_labels(dir.path / "short"), FormatError);
  write_bytes(dir.path / "images", concat({be32(0x803), be32(2), be32(2), be32(2), {0, 255, 51, 102, 1, 2, 3}}));
  CHECK_THROWS_AS(load_idx_images(dir.path / "images"), FormatError);
  write_bytes(dir.path / "images", concat({be32(0x803), be32(1), be32(2), be32(2), {0, 255, 51, 102}}));
  const Tensor img = load_idx_images(dir.path / "images");
  CHECK(img == Tensor({1, 2, 2, 1}, std::vector<double>{0.0, 1.0, 0.2, 0.4}));
  write_bytes(dir.path / "one_label", concat({be32(0x801), be32(1), {4}}));
  CHECK_THROWS_AS(load_idx(dir.path / "images", dir.path / "one_label", 3), FormatError);
  CHECK(load_idx(dir.path / "images", dir.path / "one_label").num_classes == 5);
  CHECK_THROWS_AS(load_idx_labels(dir.path / "missing"), FormatError);
}

TEST_CASE("IDX round-trip") {
  TempDir dir("idx_roundtrip");
  DatasetRecipe r = recipe(3, 4, 0.2, 8);
  r.shape = ImageShape{5, 4, 1};
  const Dataset ds = gen_synthetic(r);
  write_idx(ds, dir.path / "img", dir.path / "lab");
  const Dataset back = load_idx(dir.path / "img", dir.path / "lab", 3);
  CHECK(back.labels == ds.labels);
  CHECK(back.num_classes == 3);
  REQUIRE(back.images.shape() == ds.images.shape());
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    CHECK(back.images[i] == std::round(ds.images[i] * 255.0) / 255.0);
  }
  // Already-quantized data survives bitwise.
  write_idx(back, dir.path / "img2", dir.path / "lab2");
  CHECK(load_idx(dir.path / "img2", dir.path / "lab2", 3).images == back.images);

  DatasetRecipe rgb = recipe(2, 1, 0.0, 1);
  CHECK_THROWS_AS(write_idx(gen_synthetic(rgb), dir.path / "x", dir.path / "y"), FormatError);
}

TEST_CASE("CIFAR binary records") {
  TempDir dir("cifar");
  std::vector<unsigned char> rec(1 + 3072);
  rec[0] = 5;
  for (std::size_t i = 0; i < 3072; ++i) rec[1 + i] = static_cast<unsigned char>(i % 251);
  write_bytes(dir.path / "one.bin", rec);
  const Dataset ds = load_cifar_binary(dir.path / "one.bin");
  CHECK(ds.size() == 1);
  CHECK(ds.labels == std::vector<int>{5});
  CHECK(ds.images.shape() == Shape{1, 32, 32, 3});
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t p : {0u, 33u, 1023u}) {
      CHECK(ds.images[p * 3 + ch] == static_cast<double>((ch * 1024 + p) % 251) / 255.0);
    }
  }

  auto truncated = rec;
  truncated.pop_back();
  write_bytes(dir.path / "short.bin", truncated);
  CHECK_THROWS_AS(load_cifar_binary(dir.path / "short.bin"), FormatError);

  auto bad = rec;
  bad[0] = 10;
  write_bytes(dir.path / "bad.bin", bad);
  CHECK_THROWS_AS(load_cifar_binary(dir.path / "bad.bin"), FormatError);

  std::vector<unsigned char> rec100(2 + 3072, 0);
  rec100[0] = 3;
  rec100[1] = 42;
  write_bytes(dir.path / "c100.bin", rec100);
  CHECK(load_cifar_binary(dir.path / "c100.bin", CifarVariant::cifar100_fine).labels == std::vector<int>{42});
  CHECK(load_cifar_binary(dir.path / "c100.bin", CifarVariant::cifar100_coarse).labels == std::vector<int>{3});
  CHECK(load_cifar_binary(dir.path / "c100.bin", CifarVariant::cifar100_fine).num_classes == 100);
}
