#pragma once

// Natural-selection (NS) scores.
//
// The shuffled mini-batch is cut into contiguous groups of m = R*C samples.
// Each group is stitched into an R x C composite, resized back to the model's
// input resolution, normalized like any training input and classified once,
// without a tape. Member i's raw score is the composite posterior at its own
// label, q_i = p[y_i]; its NS score is its share of the group's raw mass,
// s_i = q_i / sum_j q_j.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "natsel/imageops.hpp"
#include "natsel/model.hpp"
#include "natsel/tensor.hpp"

namespace natsel {

struct GroupSpec {
  GridLayout layout;
  std::vector<std::size_t> members;  // batch positions, row-major over the grid
};

struct GroupPartition {
  std::vector<GroupSpec> groups;
  // Trailing batch positions when m does not divide B; they get s = 1/m.
  std::vector<std::size_t> leftover;
};

// Group g holds batch positions [g*m, (g+1)*m). Throws std::invalid_argument
// if m < 2 or the batch is empty.
GroupPartition partition_groups(std::size_t batch_size, const GridLayout& layout);

// Guard on the group's raw mass; unreachable with an exact softmax.
inline constexpr double kScoreMassFloor = 1e-12;

// s_i = q_i / max(sum_j q_j, kScoreMassFloor).
std::vector<double> normalize_scores(std::span<const double> raw);

// stitch -> bilinear resize to the input resolution -> channel normalization.
// `images` is a raw-pixel batch [B x H x W x C].
Tensor build_composite(const Tensor& images, const GroupSpec& group, const ChannelStats& stats);

struct MemberScore {
  double raw = 0.0;
  double score = 0.0;
};

std::vector<MemberScore> group_ns_scores(const GroupSpec& group, const Tensor& images, std::span<const int> labels,
                                         const Classifier& model, const ChannelStats& stats);

inline constexpr std::int64_t kLeftoverGroup = -1;

struct NSResult {
  std::vector<double> raw;          // q_i; NaN for leftover samples (no composite)
  std::vector<double> score;        // s_i
  std::vector<std::int64_t> group;  // group id, kLeftoverGroup for leftovers
  std::size_t composite_passes = 0;
};

// Scores a whole batch with floor(B/m) composite inferences. Results are in
// batch order. Neither the model nor any gradient state is touched.
NSResult batch_ns_scores(const Tensor& images, std::span<const int> labels, const Classifier& model,
                         const ChannelStats& stats, const GridLayout& layout);

}  // namespace natsel
