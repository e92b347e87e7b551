#include "lfg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SVD>

namespace lfg {

void validate_rotation(const Eigen::Matrix3d& r) {
  require(r.allFinite(), ErrorCode::kNonFinite, "rotation has non-finite entries");
  const double ortho_err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  const double det_err = std::abs(r.determinant() - 1.0);
  if (ortho_err > kRotationTolerance || det_err > kRotationTolerance) {
    std::ostringstream msg;
    msg << "rotation not in SO(3): |R^T R - I|max=" << ortho_err << ", |det-1|=" << det_err;
    fail(ErrorCode::kNotOrthonormal, msg.str());
  }
}

Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Pose Pose::from_matrix(const Eigen::Matrix4d& m) {
  require(m.allFinite(), ErrorCode::kNonFinite, "pose matrix has non-finite entries");
  const Eigen::RowVector4d bottom = m.row(3);
  require((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <= kRotationTolerance,
          ErrorCode::kInvalidArgument, "pose matrix bottom row must be (0, 0, 0, 1)");
  Pose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  p.validate();
  return p;
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

void Pose::validate() const {
  validate_rotation(rotation);
  require(translation.allFinite(), ErrorCode::kNonFinite, "translation has non-finite entries");
}

Pose compose(const Pose& a, const Pose& b) {
  a.validate();
  b.validate();
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose relative_pose(const Pose& from_i, const Pose& to_j) {
  from_i.validate();
  to_j.validate();
  Pose out;
  out.rotation = from_i.rotation.transpose() * to_j.rotation;
  out.translation = from_i.rotation.transpose() * (to_j.translation - from_i.translation);
  return out;
}

double geodesic_rotation_distance(const Eigen::Matrix3d& r1, const Eigen::Matrix3d& r2) {
  validate_rotation(r1);
  validate_rotation(r2);
  const Eigen::Matrix3d e = r1.transpose() * r2;
  double c = 0.5 * (e.trace() - 1.0);
  if (c > 1.0 + kRotationTolerance || c < -1.0 - kRotationTolerance) {
    fail(ErrorCode::kOutOfDomain, "rotation trace outside [-1, 3]");
  }
  c = std::clamp(c, -1.0, 1.0);
  // sin(theta) from the skew part keeps full precision near 0 and pi, where
  // arccos of the clamped cosine loses half the mantissa.
  const Eigen::Vector3d w(e(2, 1) - e(1, 2), e(0, 2) - e(2, 0), e(1, 0) - e(0, 1));
  const double s = 0.5 * w.norm();
  return std::atan2(s, c);
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Eigen::Matrix3d rot_z(double angle) { return axis_angle(Eigen::Vector3d::UnitZ(), angle); }

PointMap::PointMap(int height, int width) : points_(height, width, 3), valid_(height, width, 1, 0) {}

std::size_t PointMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.data().begin(), valid_.data().end(), 1));
}

void PointMap::validate() const {
  require(points_.channels() == 3, ErrorCode::kShapeMismatch, "point map must have 3 channels");
  require(points_.same_extent(valid_), ErrorCode::kShapeMismatch,
          "point map and validity mask differ in shape");
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      if (valid(y, x) && !point(y, x).allFinite()) {
        fail(ErrorCode::kNonFinite, "valid point map entry at (" + std::to_string(x) + ", " +
                                        std::to_string(y) + ") is not finite");
      }
    }
  }
}

SampledPoint sample_point_map(const PointMap& pm, const Eigen::Vector2d& pixel) {
  const double x = pixel.x();
  const double y = pixel.y();
  const int w = pm.width();
  const int h = pm.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) {
    std::ostringstream msg;
    msg << "pixel (" << x << ", " << y << ") outside [0, " << w - 1 << "] x [0, " << h - 1 << "]";
    fail(ErrorCode::kOutOfDomain, msg.str());
  }
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;

  const int xs[2] = {x0, std::min(x0 + 1, w - 1)};
  const int ys[2] = {y0, std::min(y0 + 1, h - 1)};
  const double wx[2] = {1.0 - fx, fx};
  const double wy[2] = {1.0 - fy, fy};

  SampledPoint out;
  out.valid = true;
  bool first = true;
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const double weight = wy[j] * wx[i];
      if (weight == 0.0) continue;
      if (!pm.valid(ys[j], xs[i])) {
        out.valid = false;
        out.point.setZero();
        return out;
      }
      if (first) {
        out.point = weight * pm.point(ys[j], xs[i]);
        first = false;
      } else {
        out.point += weight * pm.point(ys[j], xs[i]);
      }
    }
  }
  return out;
}

void FrameSequence::validate() const {
  require(num_observed >= 0 && num_future >= 0, ErrorCode::kInvalidArgument,
          "frame counts must be non-negative");
  require(static_cast<int>(frames.size()) == num_observed + num_future,
          ErrorCode::kShapeMismatch,
          "sequence holds " + std::to_string(frames.size()) + " frames, expected N+M=" +
              std::to_string(num_observed + num_future));
  for (const auto& f : frames) {
    if (f.points) f.points->validate();
    if (f.pose) f.pose->validate();
  }
}

double mean_point_norm(const FrameSequence& seq) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& f : seq.frames) {
    if (!f.points) continue;
    const PointMap& pm = *f.points;
    for (int y = 0; y < pm.height(); ++y) {
      for (int x = 0; x < pm.width(); ++x) {
        if (!pm.valid(y, x)) continue;
        sum += pm.point(y, x).norm();
        ++count;
      }
    }
  }
  require(count > 0, ErrorCode::kDegenerateInput, "sequence has no valid points to normalize");
  return sum / static_cast<double>(count);
}

namespace {

FrameSequence scale_geometry(const FrameSequence& seq, double factor) {
  FrameSequence out = seq;
  for (auto& f : out.frames) {
    if (f.points) {
      for (double& v : f.points->points().data()) v *= factor;
    }
    if (f.pose) f.pose->translation *= factor;
  }
  return out;
}

}  // namespace

NormalizedSequence normalize_geometry(const FrameSequence& seq) {
  seq.validate();
  const double scale = mean_point_norm(seq);
  require(scale > 0.0 && std::isfinite(scale), ErrorCode::kDegenerateInput,
          "mean point norm is zero; all valid points sit at the origin");
  // Division rather than multiplying by 1/scale keeps scale == 1 an exact no-op.
  NormalizedSequence out;
  out.sequence = seq;
  for (auto& f : out.sequence.frames) {
    if (f.points) {
      for (double& v : f.points->points().data()) v /= scale;
    }
    if (f.pose) f.pose->translation /= scale;
  }
  out.scale = scale;
  return out;
}

FrameSequence denormalize_geometry(const FrameSequence& seq, double scale) {
  require(scale > 0.0 && std::isfinite(scale), ErrorCode::kInvalidArgument,
          "normalization scale must be positive and finite");
  return scale_geometry(seq, scale);
}

}  // namespace lfg
