#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lfg/geometry.hpp"
#include "lfg/grid.hpp"

namespace lfg {

/// Probability clamp shared by every BCE variant.
inline constexpr double kProbEpsilon = 1e-7;

struct LossWeights {
  double lambda_seg = 1.0;
  double lambda_pose = 1.0;
  double lambda_point = 1.0;
  double lambda_motion = 1.0;
  double lambda_conf = 0.05;
  double lambda_trans = 0.1;
  double lambda_future = 1.0;
  double omega = 10.0;
  double alpha = 1.0;
  double huber_delta = 1.0;
  double conf_threshold = 0.1;

  void validate() const;
};

enum SegClass : int {
  kRoad = 0,
  kVehicle = 1,
  kPerson = 2,
  kTrafficLight = 3,
  kTrafficSign = 4,
  kSky = 5,
  kBackground = 6,
};

/// Per-class BCE weights, indexed by SegClass.
struct ClassWeightTable {
  std::array<double, kNumClasses> weights{0.5, 1.2, 1.6, 1.8, 1.8, 0.3, 0.2};
  void validate() const;
};

/// Scalar loss with the gradient of the value with respect to each element of
/// the prediction tensor (same layout as the prediction).
struct GridLoss {
  double value = 0.0;
  Grid<double> gradient;
};

/// Class-weighted multi-label BCE against the one-hot target, averaged over
/// pixels and channels.
GridLoss seg_loss(const SemanticMap& pred_probs, const LabelMap& target,
                  const ClassWeightTable& weights = {});

enum class PairSet { kConsecutive, kAllPairs };

std::vector<std::pair<int, int>> make_pairs(int frame_count, PairSet pair_set);

/// Gradient of the pose loss. Rotation entries are with respect to a right
/// perturbation R_i * Exp(phi_i) evaluated at phi_i = 0.
struct PoseLoss {
  double value = 0.0;
  double rot_term = 0.0;
  double trans_term = 0.0;
  std::vector<Eigen::Vector3d> d_translation;
  std::vector<Eigen::Vector3d> d_rotation;
};

double huber(double r, double delta);
double huber_derivative(double r, double delta);

/// L_rot + lambda_trans * L_trans over relative poses of the chosen pairs.
/// L_rot averages geodesic distances, L_trans averages element-wise Huber.
PoseLoss pose_loss(std::span<const Pose> pred, std::span<const Pose> target,
                   PairSet pair_set = PairSet::kConsecutive, double delta = 1.0,
                   double lambda_trans = 0.1);

/// alpha * mean |pred - target| over jointly valid pixels and the three
/// coordinates. Gradient has shape H x W x 3, zero on invalid pixels and at
/// exact ties.
GridLoss point_loss(const PointMap& pred, const PointMap& target, double alpha = 1.0);

struct ConfidenceTarget {
  Mask labels;  // 1 where the point error is below threshold
  Mask mask;    // pixels that take part in the loss
};

ConfidenceTarget confidence_target(const PointMap& pred_points, const PointMap& target_points,
                                   double threshold);

/// Mean BCE over masked pixels with probabilities clamped to
/// [kProbEpsilon, 1 - kProbEpsilon]. Gradient is zero where clamping is active.
GridLoss binary_ce(const ScalarMap& pred, const Mask& target, const Mask& mask);

/// Unweighted per-term values for one side (current or future) of the
/// objective. The pose term already contains lambda_trans and the point term
/// already contains alpha.
struct LossTerms {
  double seg = 0.0;
  double pose = 0.0;
  double point = 0.0;
  double motion = 0.0;
  double conf = 0.0;
};

struct TermPair {
  double current = 0.0;
  double future = 0.0;
};

struct LossReport {
  double total = 0.0;
  double current = 0.0;  // weighted current sum
  double future = 0.0;   // omega * weighted future sum, before lambda_future
  std::map<std::string, TermPair> terms;
};

/// total = current + lambda_future * future, with
/// current = sum_k lambda_k * current_k and future = omega * sum_k lambda_k * future_k.
LossReport total_loss(const LossTerms& current, const LossTerms& future,
                      const LossWeights& weights = {});

}  // namespace lfg
