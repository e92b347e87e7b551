#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "lfg/grid.hpp"

namespace lfg {

inline constexpr double kRotationTolerance = 1e-6;

/// Rigid transform x' = R x + t.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  /// Builds a pose from a homogeneous 4x4 matrix; validates the rotation block
  /// and the bottom row.
  static Pose from_matrix(const Eigen::Matrix4d& m);

  Eigen::Matrix4d matrix() const;
  Pose inverse() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  /// Throws kNotOrthonormal if R^T R != I or det R != 1 beyond kRotationTolerance.
  void validate() const;
};

void validate_rotation(const Eigen::Matrix3d& r);

/// Nearest rotation in Frobenius norm (SVD projection with det fix).
Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m);

Pose compose(const Pose& a, const Pose& b);

/// Transform taking frame-j coordinates into frame-i coordinates:
/// from_i^{-1} * to_j, with both poses mapping camera to world.
Pose relative_pose(const Pose& from_i, const Pose& to_j);

/// Angle of R1^T R2 in [0, pi].
double geodesic_rotation_distance(const Eigen::Matrix3d& r1, const Eigen::Matrix3d& r2);

/// Rotation about a unit axis by `angle` radians.
Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle);
Eigen::Matrix3d rot_z(double angle);

/// Per-pixel 3D points with a validity mask.
class PointMap {
 public:
  PointMap() = default;
  PointMap(int height, int width);

  int height() const noexcept { return points_.height(); }
  int width() const noexcept { return points_.width(); }

  Eigen::Vector3d point(int y, int x) const {
    return {points_(y, x, 0), points_(y, x, 1), points_(y, x, 2)};
  }
  void set_point(int y, int x, const Eigen::Vector3d& p) {
    points_(y, x, 0) = p.x();
    points_(y, x, 1) = p.y();
    points_(y, x, 2) = p.z();
  }
  bool valid(int y, int x) const noexcept { return valid_(y, x) != 0; }
  void set_valid(int y, int x, bool v) noexcept { valid_(y, x) = v ? 1 : 0; }

  Grid<double>& points() noexcept { return points_; }
  const Grid<double>& points() const noexcept { return points_; }
  Mask& validity() noexcept { return valid_; }
  const Mask& validity() const noexcept { return valid_; }

  std::size_t valid_count() const;
  /// Every valid entry must be finite.
  void validate() const;

  friend bool operator==(const PointMap&, const PointMap&) = default;

 private:
  Grid<double> points_{0, 0, 3};
  Mask valid_;
};

struct SampledPoint {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  bool valid = false;
};

/// Bilinear sample at subpixel (x, y). Only neighbours with non-zero weight
/// contribute, and any invalid contributor vetoes the sample. Grid nodes
/// return the stored value unchanged.
SampledPoint sample_point_map(const PointMap& pm, const Eigen::Vector2d& pixel);

/// Modalities of one frame; each one may be absent.
struct Frame {
  std::optional<PointMap> points;
  std::optional<Pose> pose;
  std::optional<SemanticMap> semantics;
  std::optional<ConfidenceMap> confidence;
  std::optional<MotionMask> motion;
};

/// Observed frames followed by predicted future frames.
struct FrameSequence {
  int num_observed = 0;
  int num_future = 0;
  std::vector<Frame> frames;

  int size() const noexcept { return static_cast<int>(frames.size()); }
  bool is_future(int t) const noexcept { return t >= num_observed; }
  void validate() const;
};

struct NormalizedSequence {
  FrameSequence sequence;
  double scale = 1.0;
};

/// Divides every point and pose translation by the mean norm of valid points
/// across all frames.
NormalizedSequence normalize_geometry(const FrameSequence& seq);

/// Inverse of normalize_geometry for a known scale.
FrameSequence denormalize_geometry(const FrameSequence& seq, double scale);

/// Mean Euclidean norm of valid points over the sequence; throws
/// kDegenerateInput when no point is valid.
double mean_point_norm(const FrameSequence& seq);

}  // namespace lfg
