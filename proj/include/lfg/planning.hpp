#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace lfg {

inline constexpr int kNumWaypoints = 8;
inline constexpr double kWaypointDt = 0.5;  // seconds between waypoints
inline constexpr int kPlanDims = 2 * kNumWaypoints;

/// Ego plan in the t=0 ego frame; waypoint i sits at time (i + 1) * kWaypointDt.
struct PlanTrajectory {
  std::array<Eigen::Vector2d, kNumWaypoints> waypoints{};

  /// Heading of segment i -> i+1; the last waypoint reuses its predecessor's.
  /// Zero-length segments inherit the previous heading (0 if none exists).
  std::array<double, kNumWaypoints> headings() const;

  Eigen::Matrix<double, kPlanDims, 1> flatten() const;
  static PlanTrajectory unflatten(const Eigen::Matrix<double, kPlanDims, 1>& v);

  friend bool operator==(const PlanTrajectory&, const PlanTrajectory&) = default;
};

struct AnchorSet {
  std::vector<PlanTrajectory> anchors;
  std::uint64_t seed = 0;

  int size() const noexcept { return static_cast<int>(anchors.size()); }
};

struct KMeansResult {
  AnchorSet anchors;
  std::vector<PlanTrajectory> initial_centroids;
  std::vector<int> assignment;
  /// Sum of squared distances after each assignment step.
  std::vector<double> objective_history;
  int iterations = 0;
};

inline constexpr int kMaxLloydIterations = 100;

/// k-means++ seeding followed by Lloyd iterations on the flattened 16-d
/// waypoints. An empty cluster is re-seeded from the point farthest from its
/// current centroid.
KMeansResult kmeans_anchors(std::span<const PlanTrajectory> futures, int k, std::uint64_t seed);

/// Objective for fixed centroids: each point pays its squared distance to the
/// nearest centroid (lowest index on ties).
double kmeans_objective(std::span<const PlanTrajectory> futures,
                        std::span<const PlanTrajectory> centroids,
                        std::vector<int>* assignment = nullptr);

struct ModePrediction {
  std::vector<double> confidences;
  std::vector<std::array<Eigen::Vector2d, kNumWaypoints>> offsets;

  int modes() const noexcept { return static_cast<int>(confidences.size()); }
};

struct DecodedPlan {
  PlanTrajectory plan;
  int mode = 0;
};

/// Highest-confidence mode (lowest index on ties) plus its offsets.
DecodedPlan decode_plan(const AnchorSet& anchors, const ModePrediction& pred);

/// Anchor with the smallest mean waypoint L2 distance to gt (lowest index on ties).
int nearest_anchor(const AnchorSet& anchors, const PlanTrajectory& gt);

struct PlanningLoss {
  double focal = 0.0;
  double l1 = 0.0;
  int target_mode = 0;
  std::vector<double> d_confidences;
  std::vector<std::array<Eigen::Vector2d, kNumWaypoints>> d_offsets;
};

/// Focal loss -(1 - p)^gamma log p over softmax(confidences) at the target
/// mode, and mean L1 between the target mode's decoded waypoints and gt.
PlanningLoss planning_losses(const AnchorSet& anchors, const ModePrediction& pred,
                             const PlanTrajectory& gt, double gamma = 2.0);

}  // namespace lfg
