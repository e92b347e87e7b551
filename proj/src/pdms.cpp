#include "lfg/pdms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "lfg/error.hpp"

namespace lfg {

namespace bg = boost::geometry;
using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint, /*clockwise=*/false, /*closed=*/true>;

namespace {

BgPolygon make_polygon(const std::vector<Eigen::Vector2d>& vertices) {
  BgPolygon poly;
  for (const auto& v : vertices) bg::append(poly.outer(), BgPoint(v.x(), v.y()));
  if (!vertices.empty()) {
    bg::append(poly.outer(), BgPoint(vertices.front().x(), vertices.front().y()));
  }
  bg::correct(poly);
  return poly;
}

BgPolygon make_rectangle(const Eigen::Vector2d& center, double heading, double length,
                         double width) {
  const Eigen::Vector2d ax(std::cos(heading), std::sin(heading));
  const Eigen::Vector2d ay(-ax.y(), ax.x());
  const Eigen::Vector2d hl = 0.5 * length * ax;
  const Eigen::Vector2d hw = 0.5 * width * ay;
  return make_polygon({center + hl + hw, center - hl + hw, center - hl - hw, center + hl - hw});
}

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

}  // namespace

void SceneSpec::validate() const {
  require(drivable_area.size() >= 3, ErrorCode::kBadScene,
          "drivable area needs at least 3 vertices");
  for (const auto& v : drivable_area) {
    require(v.allFinite(), ErrorCode::kBadScene, "non-finite drivable area vertex");
  }
  const BgPolygon area = make_polygon(drivable_area);
  require(std::abs(bg::area(area)) > 0.0, ErrorCode::kBadScene, "drivable area has zero area");
  require(bg::is_valid(area), ErrorCode::kBadScene, "drivable area polygon is self-intersecting");

  require(route.size() >= 2, ErrorCode::kBadScene, "route centerline needs at least 2 points");
  double length = 0.0;
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    require(route[i].allFinite() && route[i + 1].allFinite(), ErrorCode::kBadScene,
            "non-finite centerline vertex");
    length += (route[i + 1] - route[i]).norm();
  }
  require(length > 0.0, ErrorCode::kBadScene, "route centerline has zero length");

  require(ego.length > 0.0 && ego.width > 0.0, ErrorCode::kBadScene,
          "ego footprint extents must be positive");
  for (const auto& a : agents) {
    require(a.length > 0.0 && a.width > 0.0, ErrorCode::kBadScene,
            "agent extents must be positive");
    require(a.center.allFinite() && a.velocity.allFinite() && std::isfinite(a.heading),
            ErrorCode::kBadScene, "non-finite agent state");
  }
  require(std::isfinite(safe_progress_upper_bound) && safe_progress_upper_bound > 0.0,
          ErrorCode::kBadScene, "safe progress upper bound must be positive");
}

void PdmsConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  require(positive(ttc_threshold_s) && positive(max_accel) && positive(max_jerk),
          ErrorCode::kBadConfig, "PDMS thresholds must be positive");
  require(positive(substep_s) && substep_s <= kWaypointDt, ErrorCode::kBadConfig,
          "substep must lie in (0, waypoint spacing]");
  require(positive(ttc_step_s), ErrorCode::kBadConfig, "ttc step must be positive");
}

std::vector<RolloutSample> sample_rollout(const PlanTrajectory& plan, double substep_s) {
  const int per_segment = std::max(1, static_cast<int>(std::lround(kWaypointDt / substep_s)));
  const auto headings = plan.headings();
  std::vector<RolloutSample> out;
  out.reserve(static_cast<std::size_t>((kNumWaypoints - 1) * per_segment + 1));
  for (int i = 0; i + 1 < kNumWaypoints; ++i) {
    const Eigen::Vector2d a = plan.waypoints[i];
    const Eigen::Vector2d b = plan.waypoints[i + 1];
    const Eigen::Vector2d v = (b - a) / kWaypointDt;
    const double dh = wrap_angle(headings[i + 1] - headings[i]);
    for (int s = 0; s < per_segment; ++s) {
      const double f = static_cast<double>(s) / per_segment;
      out.push_back({kWaypointDt * (i + 1 + f), a + f * (b - a), headings[i] + f * dh, v});
    }
  }
  const Eigen::Vector2d last_v =
      (plan.waypoints[kNumWaypoints - 1] - plan.waypoints[kNumWaypoints - 2]) / kWaypointDt;
  out.push_back({kWaypointDt * kNumWaypoints, plan.waypoints[kNumWaypoints - 1],
                 headings[kNumWaypoints - 1], last_v});
  return out;
}

double project_onto_polyline(const std::vector<Eigen::Vector2d>& polyline,
                             const Eigen::Vector2d& p) {
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double s0 = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const Eigen::Vector2d a = polyline[i];
    const Eigen::Vector2d ab = polyline[i + 1] - a;
    const double len2 = ab.squaredNorm();
    const double len = std::sqrt(len2);
    const double f = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double d = (a + f * ab - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best_s = s0 + f * len;
    }
    s0 += len;
  }
  return best_s;
}

bool rectangles_overlap(const Eigen::Vector2d& c1, double h1, double l1, double w1,
                        const Eigen::Vector2d& c2, double h2, double l2, double w2) {
  return bg::intersects(make_rectangle(c1, h1, l1, w1), make_rectangle(c2, h2, l2, w2));
}

PdmsBreakdown rollout_checks(const PlanTrajectory& plan, const SceneSpec& scene,
                             const PdmsConfig& cfg) {
  scene.validate();
  cfg.validate();
  for (const auto& w : plan.waypoints) {
    require(w.allFinite(), ErrorCode::kNonFinite, "non-finite plan waypoint");
  }

  const auto samples = sample_rollout(plan, cfg.substep_s);
  const BgPolygon area = make_polygon(scene.drivable_area);
  const double ego_l = scene.ego.length;
  const double ego_w = scene.ego.width;

  // No-collision: dynamic hits dominate static-object hits.
  bool dynamic_hit = false;
  bool static_hit = false;
  bool left_area = false;
  for (const auto& s : samples) {
    const BgPolygon ego = make_rectangle(s.position, s.heading, ego_l, ego_w);
    if (!bg::covered_by(ego, area)) left_area = true;
    for (const auto& a : scene.agents) {
      const BgPolygon other = make_rectangle(a.center_at(s.time), a.heading, a.length, a.width);
      if (!bg::intersects(ego, other)) continue;
      (a.kind == AgentKind::kVehicle ? dynamic_hit : static_hit) = true;
    }
  }
  const double nc = dynamic_hit ? 0.0 : (static_hit ? 0.5 : 1.0);
  const double dac = left_area ? 0.0 : 1.0;

  const double progress =
      project_onto_polyline(scene.route, plan.waypoints[kNumWaypoints - 1]);
  const double ep = std::clamp(progress / scene.safe_progress_upper_bound, 0.0, 1.0);

  // Time-to-collision: constant-velocity extrapolation of ego and dynamic
  // agents from every rollout sample, probed up to the threshold inclusive.
  const int ttc_steps = static_cast<int>(std::lround(cfg.ttc_threshold_s / cfg.ttc_step_s));
  bool ttc_violation = false;
  for (const auto& s : samples) {
    for (int k = 0; k <= ttc_steps && !ttc_violation; ++k) {
      const double tau = std::min(k * cfg.ttc_step_s, cfg.ttc_threshold_s);
      const BgPolygon ego = make_rectangle(s.position + tau * s.velocity, s.heading, ego_l, ego_w);
      for (const auto& a : scene.agents) {
        if (a.kind != AgentKind::kVehicle) continue;
        const BgPolygon other =
            make_rectangle(a.center_at(s.time + tau), a.heading, a.length, a.width);
        if (bg::intersects(ego, other)) {
          ttc_violation = true;
          break;
        }
      }
    }
    if (ttc_violation) break;
  }
  const double ttc = ttc_violation ? 0.0 : 1.0;

  // Comfort: finite differences at interior waypoints.
  std::array<Eigen::Vector2d, kNumWaypoints> accel{};
  bool comfortable = true;
  const double dt2 = kWaypointDt * kWaypointDt;
  for (int i = 1; i + 1 < kNumWaypoints; ++i) {
    accel[i] = (plan.waypoints[i + 1] - 2.0 * plan.waypoints[i] + plan.waypoints[i - 1]) / dt2;
    if (accel[i].norm() > cfg.max_accel) comfortable = false;
  }
  for (int i = 1; i + 2 < kNumWaypoints; ++i) {
    const Eigen::Vector2d jerk = (accel[i + 1] - accel[i]) / kWaypointDt;
    if (jerk.norm() > cfg.max_jerk) comfortable = false;
  }
  const double comfort = comfortable ? 1.0 : 0.0;

  return PdmsBreakdown::from_subscores(nc, dac, ep, ttc, comfort);
}

}  // namespace lfg
