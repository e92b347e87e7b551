#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lfg/geometry.hpp"
#include "lfg/grid.hpp"

namespace lfg {

struct Keypoint {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();  // (x, y), subpixel
  bool visible = false;
};

/// One tracked object: per-frame instance masks (masks[0] is the first-frame
/// detection) and per-frame 2D keypoints.
struct InstanceTrack {
  int instance_id = 0;
  std::vector<Mask> masks;
  std::vector<std::vector<Keypoint>> keypoints;

  int frame_count() const noexcept { return static_cast<int>(keypoints.size()); }
  const Mask& first_frame_mask() const { return masks.front(); }
  void validate() const;
};

enum class MotionRule { kMinFrames, kMajority };

/// Frame in which centroid displacements are measured. kWorld maps each
/// centroid through the frame's camera-to-world pose before differencing.
enum class DisplacementFrame { kWorld, kCamera };

struct MotionConfig {
  double tau_motion = 0.1;
  int k_min = 2;
  MotionRule rule = MotionRule::kMajority;
  int grid_size = 80;
  DisplacementFrame frame = DisplacementFrame::kWorld;

  void validate() const;
};

struct Centroid {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  bool valid = false;
};

/// Mean of the backprojected visible keypoints per frame. Keypoints that fall
/// outside the image or on invalid point-map samples are skipped.
std::vector<Centroid> instance_centroids(const InstanceTrack& track,
                                         std::span<const PointMap> point_maps);

/// Applies camera-to-world poses to valid centroids.
std::vector<Centroid> centroids_to_world(std::span<const Centroid> centroids,
                                         std::span<const Pose> poses);

/// |c_{t+1} - c_t| for every t where both frames are valid. Frames adjacent
/// to a gap contribute no entry.
std::vector<double> displacement_series(std::span<const Centroid> centroids);

/// Number of displacements strictly above tau.
int count_moving(std::span<const double> displacements, double tau);

bool classify_dynamic(std::span<const double> displacements, const MotionConfig& cfg);

/// Union of the per-frame masks of every dynamic track, one map per frame.
std::vector<MotionMask> rasterize_motion_masks(std::span<const InstanceTrack> tracks,
                                               const std::vector<bool>& dynamic, int frames,
                                               int height, int width);

struct InstanceMotion {
  int instance_id = 0;
  std::vector<double> displacements;
  int moving_count = 0;
  bool dynamic = false;
};

struct PseudoLabelResult {
  std::vector<MotionMask> masks;
  std::vector<InstanceMotion> instances;  // ascending instance id
};

/// Full pipeline: centroids, displacements, classification, rasterization.
/// `poses` may be empty, in which case point maps are taken to share one
/// frame already and no pose transform is applied.
PseudoLabelResult generate_pseudo_gt(std::span<const InstanceTrack> tracks,
                                     std::span<const PointMap> point_maps,
                                     std::span<const Pose> poses, const MotionConfig& cfg);

}  // namespace lfg
