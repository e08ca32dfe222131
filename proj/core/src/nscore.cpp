#include "natsel/nscore.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "natsel/error.hpp"

namespace natsel {

GroupPartition partition_groups(std::size_t batch_size, const GridLayout& layout) {
  const std::size_t m = layout.size();
  if (m < 2) throw std::invalid_argument("partition_groups: group size must be >= 2");
  if (batch_size == 0) throw std::invalid_argument("partition_groups: empty batch");
  GroupPartition out;
  const std::size_t full = batch_size / m;
  out.groups.reserve(full);
  for (std::size_t g = 0; g < full; ++g) {
    GroupSpec spec{layout, {}};
    spec.members.reserve(m);
    for (std::size_t i = 0; i < m; ++i) spec.members.push_back(g * m + i);
    out.groups.push_back(std::move(spec));
  }
  for (std::size_t i = full * m; i < batch_size; ++i) out.leftover.push_back(i);
  return out;
}

std::vector<double> normalize_scores(std::span<const double> raw) {
  double total = 0.0;
  for (double q : raw) total += q;
  total = std::max(total, kScoreMassFloor);
  std::vector<double> s(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) s[i] = raw[i] / total;
  return s;
}

namespace {

void check_inputs(const Tensor& images, std::span<const int> labels, const Classifier& model) {
  const ClassifierConfig& cfg = model.config();
  if (images.rank() != 4 || Shape(images.shape().begin() + 1, images.shape().end()) != cfg.input.shape()) {
    throw ShapeError("NS scoring: images " + shape_string(images.shape()) + " do not match model input " +
                     shape_string(cfg.input.shape()));
  }
  if (labels.size() != images.dim(0)) throw ShapeError("NS scoring: label count does not match batch size");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= cfg.num_classes) {
      throw std::out_of_range("NS scoring: label " + std::to_string(y) + " out of range");
    }
  }
}

std::vector<MemberScore> score_members(const GroupSpec& group, std::span<const int> labels,
                                       std::span<const double> posterior) {
  std::vector<double> raw(group.members.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = posterior[static_cast<std::size_t>(labels[group.members[i]])];
  const std::vector<double> s = normalize_scores(raw);
  std::vector<MemberScore> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = MemberScore{raw[i], s[i]};
  return out;
}

}  // namespace

Tensor build_composite(const Tensor& images, const GroupSpec& group, const ChannelStats& stats) {
  if (images.rank() != 4) throw ShapeError("build_composite: expected [B x H x W x C]");
  std::vector<Tensor> members;
  members.reserve(group.members.size());
  for (std::size_t idx : group.members) members.push_back(select(images, idx));
  const Tensor stitched = stitch(members, group.layout);
  return stats.apply(bilinear_resize(stitched, images.dim(1), images.dim(2)));
}

std::vector<MemberScore> group_ns_scores(const GroupSpec& group, const Tensor& images, std::span<const int> labels,
                                         const Classifier& model, const ChannelStats& stats) {
  check_inputs(images, labels, model);
  const Tensor composite = build_composite(images, group, stats);
  const Tensor posterior = softmax(model.forward(composite));
  return score_members(group, labels, posterior.data());
}

NSResult batch_ns_scores(const Tensor& images, std::span<const int> labels, const Classifier& model,
                         const ChannelStats& stats, const GridLayout& layout) {
  check_inputs(images, labels, model);
  const std::size_t batch = images.dim(0);
  const GroupPartition partition = partition_groups(batch, layout);

  NSResult result;
  result.raw.assign(batch, std::numeric_limits<double>::quiet_NaN());
  result.score.assign(batch, 0.0);
  result.group.assign(batch, kLeftoverGroup);
  const double uniform = 1.0 / static_cast<double>(layout.size());
  for (std::size_t i : partition.leftover) result.score[i] = uniform;
  if (partition.groups.empty()) return result;

  // One batched inference over all composites; row g only depends on
  // composite g, so this equals scoring the groups one by one.
  std::vector<Tensor> composites;
  composites.reserve(partition.groups.size());
  for (const GroupSpec& group : partition.groups) composites.push_back(build_composite(images, group, stats));
  const Tensor posteriors = softmax(model.forward_batch(stack(composites)));
  result.composite_passes = partition.groups.size();

  const std::size_t k = model.config().num_classes;
  for (std::size_t g = 0; g < partition.groups.size(); ++g) {
    const GroupSpec& group = partition.groups[g];
    const auto scores = score_members(group, labels, posteriors.data().subspan(g * k, k));
    for (std::size_t i = 0; i < group.members.size(); ++i) {
      const std::size_t pos = group.members[i];
      result.raw[pos] = scores[i].raw;
      result.score[pos] = scores[i].score;
      result.group[pos] = static_cast<std::int64_t>(g);
    }
  }
  return result;
}

}  // namespace natsel
