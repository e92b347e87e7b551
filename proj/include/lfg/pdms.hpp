#pragma once

#include <vector>

#include <Eigen/Core>

#include "lfg/planning.hpp"

namespace lfg {

enum class AgentKind { kVehicle, kStaticObject };

/// Oriented rectangle moving at constant planar velocity. Vehicles count as
/// dynamic agents whether or not they move.
struct Agent {
  AgentKind kind = AgentKind::kVehicle;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();  // at t = 0
  double heading = 0.0;
  double length = 4.5;
  double width = 2.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();

  Eigen::Vector2d center_at(double t) const { return center + t * velocity; }
};

struct EgoFootprint {
  double length = 4.5;
  double width = 2.0;
};

struct SceneSpec {
  std::vector<Eigen::Vector2d> drivable_area;  // simple polygon, either orientation
  std::vector<Agent> agents;
  EgoFootprint ego;
  std::vector<Eigen::Vector2d> route;  // centerline, progress measured from route[0]
  double safe_progress_upper_bound = 1.0;

  /// Throws kBadScene for a degenerate or self-intersecting polygon, a
  /// zero-length centerline, non-positive extents or progress bound.
  void validate() const;
};

/// Rule thresholds. The defaults are artifact choices.
struct PdmsConfig {
  double ttc_threshold_s = 1.5;
  double max_accel = 4.0;  // m/s^2
  double max_jerk = 8.0;   // m/s^3
  double substep_s = 0.1;
  double ttc_step_s = 0.1;

  void validate() const;
};

struct PdmsBreakdown {
  double nc = 1.0;
  double dac = 1.0;
  double ep = 1.0;
  double ttc = 1.0;
  double comfort = 1.0;
  double pdms = 1.0;

  static double compose(double nc, double dac, double ep, double ttc, double comfort) {
    return (nc * dac) * (5.0 * ep + 5.0 * ttc + 2.0 * comfort) / 12.0;
  }
  static PdmsBreakdown from_subscores(double nc, double dac, double ep, double ttc,
                                      double comfort) {
    return {nc, dac, ep, ttc, comfort, compose(nc, dac, ep, ttc, comfort)};
  }
};

/// Ego state sampled along the plan.
struct RolloutSample {
  double time = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double heading = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
};

/// Linear interpolation of position and heading between waypoints at
/// cfg.substep_s spacing, from the first to the last waypoint.
std::vector<RolloutSample> sample_rollout(const PlanTrajectory& plan, double substep_s);

/// Arc-length coordinate of the closest point on the polyline.
double project_onto_polyline(const std::vector<Eigen::Vector2d>& polyline,
                             const Eigen::Vector2d& p);

/// Whether two oriented rectangles overlap (touching counts).
bool rectangles_overlap(const Eigen::Vector2d& c1, double h1, double l1, double w1,
                        const Eigen::Vector2d& c2, double h2, double l2, double w2);

PdmsBreakdown rollout_checks(const PlanTrajectory& plan, const SceneSpec& scene,
                             const PdmsConfig& cfg = {});

}  // namespace lfg
