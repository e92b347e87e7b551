#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lfg/geometry.hpp"
#include "lfg/grid.hpp"

namespace lfg {

/// Depth values with a validity mask. Ground-truth depths must be strictly
/// positive where valid; predictions only finite.
struct DepthMap {
  ScalarMap depth;
  Mask valid;

  DepthMap() = default;
  DepthMap(int height, int width) : depth(height, width), valid(height, width, 1, 0) {}
  int height() const noexcept { return depth.height(); }
  int width() const noexcept { return depth.width(); }
};

struct DepthAlignment {
  double scale = 1.0;
  double shift = 0.0;
  DepthMap aligned;
};

/// Closed-form least squares for (s, t) minimizing sum (s*pred + t - gt)^2
/// over jointly valid pixels.
DepthAlignment align_depth_scale_shift(const DepthMap& pred, const DepthMap& gt);

struct DepthScores {
  double abs_rel = 0.0;
  double rmse = 0.0;
};

DepthScores depth_metrics(const DepthMap& aligned, const DepthMap& gt);

struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return scale * (rotation * p) + translation;
  }
};

/// Umeyama least-squares alignment mapping pred onto gt. With `with_scale`
/// false the scale is fixed to 1.
Similarity umeyama_align(std::span<const Eigen::Vector3d> pred,
                         std::span<const Eigen::Vector3d> gt, bool with_scale = true);

struct TrajScores {
  double ate = 0.0;    // meters
  double rot = 0.0;    // degrees
  double trans = 0.0;  // meters
};

/// ATE after aligning positions, plus mean rotation / translation errors over
/// consecutive relative poses (i, i+1).
TrajScores trajectory_scores(std::span<const Pose> pred, std::span<const Pose> gt,
                             bool with_scale = true);

/// How classes absent from both prediction and ground truth enter mIoU/mDice.
enum class AbsentClassPolicy { kExclude, kCountAsZero, kCountAsOne };

/// confusion[g][p] counts pixels with ground truth g predicted as p.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  void add(const LabelMap& pred, const LabelMap& gt);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  std::uint64_t total() const;
};

struct SegScores {
  double pixel_accuracy = 0.0;
  double mean_iou = 0.0;
  double mean_dice = 0.0;
  double fw_iou = 0.0;
};

SegScores scores_from_confusion(const ConfusionMatrix& cm,
                                AbsentClassPolicy policy = AbsentClassPolicy::kExclude);

SegScores seg_scores(const LabelMap& pred, const LabelMap& gt,
                     AbsentClassPolicy policy = AbsentClassPolicy::kExclude);

/// Repeats ground truth frame split_index-1 as the prediction for every later
/// frame and scores the pooled confusion matrix.
SegScores static_baseline(std::span<const LabelMap> seq_gt, int split_index,
                          AbsentClassPolicy policy = AbsentClassPolicy::kExclude);

}  // namespace lfg
