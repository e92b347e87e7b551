#include "lfg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace lfg {

namespace {

Eigen::Vector3d vee_of_skew_part(const Eigen::Matrix3d& m) {
  return {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
}

struct ClampedProb {
  double value;
  bool active;  // true when the clamp changed the input
};

ClampedProb clamp_prob(double p) {
  if (p < kProbEpsilon) return {kProbEpsilon, true};
  if (p > 1.0 - kProbEpsilon) return {1.0 - kProbEpsilon, true};
  return {p, false};
}

double bce(double p, double y) { return -(y * std::log(p) + (1.0 - y) * std::log1p(-p)); }

double bce_derivative(double p, double y) { return (p - y) / (p * (1.0 - p)); }

void require_finite_weight(double v, const char* name, bool strictly_positive = false) {
  const bool ok = std::isfinite(v) && (strictly_positive ? v > 0.0 : v >= 0.0);
  require(ok, ErrorCode::kBadConfig,
          std::string(name) + (strictly_positive ? " must be positive and finite"
                                                 : " must be non-negative and finite"));
}

}  // namespace

void LossWeights::validate() const {
  require_finite_weight(lambda_seg, "lambda_seg");
  require_finite_weight(lambda_pose, "lambda_pose");
  require_finite_weight(lambda_point, "lambda_point");
  require_finite_weight(lambda_motion, "lambda_motion");
  require_finite_weight(lambda_conf, "lambda_conf");
  require_finite_weight(lambda_trans, "lambda_trans");
  require_finite_weight(lambda_future, "lambda_future");
  require(std::isfinite(omega) && omega > 1.0, ErrorCode::kBadConfig, "omega must exceed 1");
  require_finite_weight(alpha, "alpha", true);
  require_finite_weight(huber_delta, "huber_delta", true);
  require_finite_weight(conf_threshold, "conf_threshold", true);
}

void ClassWeightTable::validate() const {
  for (double w : weights) require_finite_weight(w, "class weight");
}

GridLoss seg_loss(const SemanticMap& pred_probs, const LabelMap& target,
                  const ClassWeightTable& weights) {
  require(pred_probs.channels() == kNumClasses, ErrorCode::kShapeMismatch,
          "semantic prediction must have 7 channels");
  require_same_extent(pred_probs.height(), pred_probs.width(), target.height(), target.width(),
                      "seg_loss");
  target.validate();
  weights.validate();
  const std::size_t count = pred_probs.size();
  require(count > 0, ErrorCode::kDegenerateInput, "seg_loss on an empty map");

  GridLoss out;
  out.gradient = Grid<double>(pred_probs.height(), pred_probs.width(), kNumClasses);
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (int y = 0; y < pred_probs.height(); ++y) {
    for (int x = 0; x < pred_probs.width(); ++x) {
      const int label = target(y, x);
      for (int c = 0; c < kNumClasses; ++c) {
        const double raw = pred_probs(y, x, c);
        require(!std::isnan(raw), ErrorCode::kNonFinite, "NaN in semantic prediction");
        const ClampedProb p = clamp_prob(raw);
        const double t = (c == label) ? 1.0 : 0.0;
        const double w = weights.weights[static_cast<std::size_t>(c)];
        sum += w * bce(p.value, t);
        out.gradient(y, x, c) = p.active ? 0.0 : w * bce_derivative(p.value, t) * inv;
      }
    }
  }
  out.value = sum * inv;
  return out;
}

std::vector<std::pair<int, int>> make_pairs(int frame_count, PairSet pair_set) {
  std::vector<std::pair<int, int>> pairs;
  if (pair_set == PairSet::kConsecutive) {
    for (int i = 0; i + 1 < frame_count; ++i) pairs.emplace_back(i, i + 1);
  } else {
    for (int i = 0; i < frame_count; ++i) {
      for (int j = i + 1; j < frame_count; ++j) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_derivative(double r, double delta) {
  if (std::abs(r) <= delta) return r;
  return r > 0.0 ? delta : -delta;
}

PoseLoss pose_loss(std::span<const Pose> pred, std::span<const Pose> target, PairSet pair_set,
                   double delta, double lambda_trans) {
  require(pred.size() == target.size(), ErrorCode::kShapeMismatch,
          "pose_loss: sequence lengths differ");
  require(pred.size() >= 2, ErrorCode::kInvalidArgument, "pose_loss needs at least 2 poses");
  require(std::isfinite(delta) && delta > 0.0, ErrorCode::kInvalidArgument,
          "huber delta must be positive");
  require(std::isfinite(lambda_trans) && lambda_trans >= 0.0, ErrorCode::kInvalidArgument,
          "lambda_trans must be non-negative");

  const auto pairs = make_pairs(static_cast<int>(pred.size()), pair_set);
  const double inv_pairs = 1.0 / static_cast<double>(pairs.size());
  const double inv_elems = inv_pairs / 3.0;

  PoseLoss out;
  out.d_translation.assign(pred.size(), Eigen::Vector3d::Zero());
  out.d_rotation.assign(pred.size(), Eigen::Vector3d::Zero());

  for (const auto& [i, j] : pairs) {
    const Pose rp = relative_pose(pred[i], pred[j]);
    const Pose rt = relative_pose(target[i], target[j]);

    // Rotation: theta = angle(E), E = target_rel^T * pred_rel.
    const Eigen::Matrix3d e = rt.rotation.transpose() * rp.rotation;
    const double c = std::clamp(0.5 * (e.trace() - 1.0), -1.0, 1.0);
    const Eigen::Vector3d w = vee_of_skew_part(e);
    const double s = 0.5 * w.norm();
    const double theta = std::atan2(s, c);
    out.rot_term += theta * inv_pairs;
    if (s > 1e-12) {
      const double k = inv_pairs / (2.0 * s);
      out.d_rotation[j] += k * w;
      const Eigen::Matrix3d f = rp.rotation * rt.rotation.transpose();
      out.d_rotation[i] -= k * vee_of_skew_part(f);
    }

    // Translation: element-wise Huber on R_i^T (t_j - t_i) - target.
    const Eigen::Vector3d v = rp.translation;
    const Eigen::Vector3d r = v - rt.translation;
    Eigen::Vector3d g;
    for (int k = 0; k < 3; ++k) {
      out.trans_term += huber(r[k], delta) * inv_elems;
      g[k] = lambda_trans * huber_derivative(r[k], delta) * inv_elems;
    }
    const Eigen::Vector3d world_g = pred[i].rotation * g;
    out.d_translation[j] += world_g;
    out.d_translation[i] -= world_g;
    out.d_rotation[i] += g.cross(v);
  }
  out.value = out.rot_term + lambda_trans * out.trans_term;
  return out;
}

GridLoss point_loss(const PointMap& pred, const PointMap& target, double alpha) {
  require_same_extent(pred.height(), pred.width(), target.height(), target.width(),
                      "point_loss");
  require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::kInvalidArgument,
          "alpha must be positive");
  pred.validate();
  target.validate();

  std::size_t n = 0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) n += (pred.valid(y, x) && target.valid(y, x)) ? 1 : 0;
  }
  require(n > 0, ErrorCode::kDegenerateInput, "point_loss: no jointly valid pixels");

  GridLoss out;
  out.gradient = Grid<double>(pred.height(), pred.width(), 3);
  const double scale = alpha / (3.0 * static_cast<double>(n));
  double sum = 0.0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!(pred.valid(y, x) && target.valid(y, x))) continue;
      for (int k = 0; k < 3; ++k) {
        const double d = pred.points()(y, x, k) - target.points()(y, x, k);
        sum += std::abs(d);
        out.gradient(y, x, k) = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
      }
    }
  }
  out.value = sum * scale;
  return out;
}

ConfidenceTarget confidence_target(const PointMap& pred_points, const PointMap& target_points,
                                   double threshold) {
  require_same_extent(pred_points.height(), pred_points.width(), target_points.height(),
                      target_points.width(), "confidence_target");
  require(std::isfinite(threshold) && threshold > 0.0, ErrorCode::kInvalidArgument,
          "confidence threshold must be positive");
  ConfidenceTarget out{Mask(pred_points.height(), pred_points.width()),
                       Mask(pred_points.height(), pred_points.width())};
  for (int y = 0; y < pred_points.height(); ++y) {
    for (int x = 0; x < pred_points.width(); ++x) {
      if (!(pred_points.valid(y, x) && target_points.valid(y, x))) continue;
      out.mask(y, x) = 1;
      const double err = (pred_points.point(y, x) - target_points.point(y, x)).norm();
      out.labels(y, x) = err < threshold ? 1 : 0;
    }
  }
  return out;
}

GridLoss binary_ce(const ScalarMap& pred, const Mask& target, const Mask& mask) {
  require(pred.channels() == 1 && target.channels() == 1 && mask.channels() == 1,
          ErrorCode::kShapeMismatch, "binary_ce expects single-channel maps");
  require_same_extent(pred.height(), pred.width(), target.height(), target.width(), "binary_ce");
  require_same_extent(pred.height(), pred.width(), mask.height(), mask.width(), "binary_ce mask");

  std::size_t n = 0;
  for (auto m : mask.data()) n += m ? 1 : 0;
  require(n > 0, ErrorCode::kDegenerateInput, "binary_ce: empty mask");

  GridLoss out;
  out.gradient = Grid<double>(pred.height(), pred.width(), 1);
  const double inv = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t idx = 0; idx < pred.size(); ++idx) {
    if (!mask.data()[idx]) continue;
    const double raw = pred.data()[idx];
    require(!std::isnan(raw), ErrorCode::kNonFinite, "NaN in probability map");
    const ClampedProb p = clamp_prob(raw);
    const double y = target.data()[idx] ? 1.0 : 0.0;
    sum += bce(p.value, y);
    out.gradient.data()[idx] = p.active ? 0.0 : bce_derivative(p.value, y) * inv;
  }
  out.value = sum * inv;
  return out;
}

LossReport total_loss(const LossTerms& current, const LossTerms& future,
                      const LossWeights& weights) {
  weights.validate();
  struct Named {
    const char* name;
    double cur;
    double fut;
    double lambda;
  };
  const Named rows[] = {
      {"seg", current.seg, future.seg, weights.lambda_seg},
      {"pose", current.pose, future.pose, weights.lambda_pose},
      {"point", current.point, future.point, weights.lambda_point},
      {"motion", current.motion, future.motion, weights.lambda_motion},
      {"conf", current.conf, future.conf, weights.lambda_conf},
  };
  LossReport report;
  double future_sum = 0.0;
  for (const auto& row : rows) {
    require(std::isfinite(row.cur), ErrorCode::kNonFinite,
            std::string("non-finite loss term current.") + row.name);
    require(std::isfinite(row.fut), ErrorCode::kNonFinite,
            std::string("non-finite loss term future.") + row.name);
    report.current += row.lambda * row.cur;
    future_sum += row.lambda * row.fut;
    report.terms[row.name] = {row.cur, row.fut};
  }
  report.future = weights.omega * future_sum;
  report.total = report.current + weights.lambda_future * report.future;
  return report;
}

}  // namespace lfg
