#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "lfg/error.hpp"
#include "lfg/pdms.hpp"
#include "lfg/planning.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "test_support.hpp"

namespace lfg {
namespace {

using testing::Random;
using testing::straight_plan;
using testing::straight_road;

PlanTrajectory random_plan(Random& rng, double spread = 10.0) {
  PlanTrajectory p;
  for (auto& w : p.waypoints) w = {rng.uniform(-spread, spread), rng.uniform(-spread, spread)};
  return p;
}

std::vector<PlanTrajectory> clustered_futures(Random& rng, int n) {
  std::vector<PlanTrajectory> out;
  for (int i = 0; i < n; ++i) {
    const double speed = rng.uniform(0.0, 12.0);
    const double curve = rng.uniform(-0.3, 0.3);
    PlanTrajectory p;
    for (int k = 0; k < kNumWaypoints; ++k) {
      const double s = speed * kWaypointDt * (k + 1);
      p.waypoints[k] = {s * std::cos(curve * k), s * std::sin(curve * k)};
    }
    out.push_back(p);
  }
  return out;
}

TEST(KMeans, DistinctInputsBecomeCentroids) {
  Random rng(50);
  std::vector<PlanTrajectory> data;
  for (int i = 0; i < 5; ++i) data.push_back(random_plan(rng));
  const auto r = kmeans_anchors(data, 5, 9);
  EXPECT_EQ(r.objective_history.back(), 0.0);
  for (const auto& d : data) {
    const bool found = std::any_of(r.anchors.anchors.begin(), r.anchors.anchors.end(),
                                   [&](const PlanTrajectory& a) { return a == d; });
    EXPECT_TRUE(found);
  }
}

TEST(KMeans, SingleClusterIsMean) {
  Random rng(51);
  const auto data = clustered_futures(rng, 30);
  const auto r = kmeans_anchors(data, 1, 1);
  for (int k = 0; k < kNumWaypoints; ++k) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& d : data) mean += d.waypoints[k];
    mean /= 30.0;
    EXPECT_LT((r.anchors.anchors[0].waypoints[k] - mean).norm(), 1e-12);
  }
}

TEST(KMeans, MatchesIndependentLloyd) {
  Random rng(52);
  for (int trial = 0; trial < 10; ++trial) {
    const auto data = clustered_futures(rng, 200);
    const auto r = kmeans_anchors(data, 20, 100 + trial);
    const auto history = oracle::lloyd(data, r.initial_centroids, kMaxLloydIterations);
    ASSERT_EQ(history.size(), r.objective_history.size());
    for (std::size_t i = 0; i < history.size(); ++i) {
      EXPECT_NEAR(history[i], r.objective_history[i], 1e-9 * (1.0 + history[i]));
    }
  }
}

TEST(KMeans, MonotoneAndSeedReproducible) {
  Random rng(53);
  const auto data = clustered_futures(rng, 300);
  const auto a = kmeans_anchors(data, 20, 42);
  const auto b = kmeans_anchors(data, 20, 42);
  for (std::size_t i = 1; i < a.objective_history.size(); ++i) {
    EXPECT_LE(a.objective_history[i], a.objective_history[i - 1]);
  }
  EXPECT_EQ(a.anchors.anchors, b.anchors.anchors);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.anchors.seed, 42u);
  EXPECT_NEAR(kmeans_objective(data, a.anchors.anchors), a.objective_history.back(),
              1e-9 * a.objective_history.back());
}

TEST(KMeans, DuplicatePointsDoNotBreak) {
  const std::vector<PlanTrajectory> data(6, straight_plan(3.0));
  const auto r = kmeans_anchors(data, 3, 5);
  EXPECT_EQ(r.objective_history.back(), 0.0);
  EXPECT_EQ(r.anchors.size(), 3);
}

TEST(KMeans, Errors) {
  Random rng(54);
  const auto data = clustered_futures(rng, 3);
  EXPECT_THROW(kmeans_anchors(data, 4, 0), Error);
  EXPECT_THROW(kmeans_anchors(data, 0, 0), Error);
}

AnchorSet random_anchors(Random& rng, int k) {
  AnchorSet a;
  for (int i = 0; i < k; ++i) a.anchors.push_back(random_plan(rng));
  return a;
}

ModePrediction random_prediction(Random& rng, int k) {
  ModePrediction p;
  for (int i = 0; i < k; ++i) {
    p.confidences.push_back(rng.uniform(-3, 3));
    std::array<Eigen::Vector2d, kNumWaypoints> off;
    for (auto& o : off) o = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    p.offsets.push_back(off);
  }
  return p;
}

TEST(Decode, OneHotZeroOffsets) {
  Random rng(55);
  const AnchorSet a = random_anchors(rng, 6);
  ModePrediction p = random_prediction(rng, 6);
  for (auto& o : p.offsets)
    for (auto& v : o) v.setZero();
  std::fill(p.confidences.begin(), p.confidences.end(), 0.0);
  p.confidences[3] = 1.0;
  const DecodedPlan d = decode_plan(a, p);
  EXPECT_EQ(d.mode, 3);
  EXPECT_EQ(d.plan, a.anchors[3]);
}

TEST(Decode, TieGoesToLowestIndex) {
  Random rng(56);
  const AnchorSet a = random_anchors(rng, 4);
  ModePrediction p = random_prediction(rng, 4);
  std::fill(p.confidences.begin(), p.confidences.end(), 0.25);
  EXPECT_EQ(decode_plan(a, p).mode, 0);
}

TEST(Decode, MatchesLoopOracleAndMonotoneInvariance) {
  Random rng(57);
  for (int i = 0; i < 200; ++i) {
    const AnchorSet a = random_anchors(rng, 20);
    const ModePrediction p = random_prediction(rng, 20);
    int best = 0;
    for (int m = 0; m < 20; ++m)
      if (p.confidences[m] > p.confidences[best]) best = m;
    const DecodedPlan d = decode_plan(a, p);
    ASSERT_EQ(d.mode, best);
    for (int k = 0; k < kNumWaypoints; ++k)
      ASSERT_EQ(d.plan.waypoints[k], a.anchors[best].waypoints[k] + p.offsets[best][k]);
    ModePrediction q = p;
    for (double& c : q.confidences) c = std::exp(c);
    ASSERT_EQ(decode_plan(a, q).mode, best);
    for (double& c : q.confidences) c = std::atan(3.0 * c + 1.0);
    ASSERT_EQ(decode_plan(a, q).mode, best);
  }
}

TEST(Decode, ModeCountMismatch) {
  Random rng(58);
  try {
    decode_plan(random_anchors(rng, 3), random_prediction(rng, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(PlanningLoss, FocalAtGammaZeroIsCrossEntropy) {
  Random rng(59);
  for (int i = 0; i < 100; ++i) {
    const AnchorSet a = random_anchors(rng, 8);
    const ModePrediction p = random_prediction(rng, 8);
    const PlanTrajectory gt = random_plan(rng);
    const PlanningLoss l = planning_losses(a, p, gt, 0.0);
    ASSERT_NEAR(l.focal, oracle::cross_entropy(p.confidences, nearest_anchor(a, gt)), 1e-12);
  }
}

TEST(PlanningLoss, HalfProbabilityGammaTwo) {
  AnchorSet a;
  a.anchors = {straight_plan(1.0), straight_plan(10.0)};
  ModePrediction p;
  p.confidences = {0.7, 0.7};
  p.offsets.assign(2, {});
  for (auto& o : p.offsets)
    for (auto& v : o) v.setZero();
  const PlanningLoss l = planning_losses(a, p, straight_plan(9.0), 2.0);
  EXPECT_EQ(l.target_mode, 1);
  EXPECT_NEAR(l.focal, 0.25 * std::log(2.0), 1e-15);
  EXPECT_NEAR(l.focal, 0.1733, 1e-4);
}

TEST(PlanningLoss, ZeroL1WhenDecodedTargetMatches) {
  Random rng(60);
  const AnchorSet a = random_anchors(rng, 5);
  ModePrediction p = random_prediction(rng, 5);
  const PlanTrajectory gt = random_plan(rng);
  const int t = nearest_anchor(a, gt);
  for (int k = 0; k < kNumWaypoints; ++k) p.offsets[t][k] = gt.waypoints[k] - a.anchors[t].waypoints[k];
  EXPECT_NEAR(planning_losses(a, p, gt).l1, 0.0, 1e-15);
}

TEST(PlanningLoss, RejectsNegativeGamma) {
  Random rng(61);
  EXPECT_THROW(planning_losses(random_anchors(rng, 2), random_prediction(rng, 2), random_plan(rng), -1.0),
               Error);
}

// ----------------------------------------------------------------- PDMS

TEST(Pdms, CleanDriveScoresOne) {
  const SceneSpec scene = straight_road();
  const PdmsBreakdown b = rollout_checks(straight_plan(5.0), scene);
  EXPECT_EQ(b.nc, 1.0);
  EXPECT_EQ(b.dac, 1.0);
  EXPECT_EQ(b.ep, 1.0);
  EXPECT_EQ(b.ttc, 1.0);
  EXPECT_EQ(b.comfort, 1.0);
  EXPECT_EQ(b.pdms, 1.0);
}

TEST(Pdms, DynamicCollisionIsHardZero) {
  SceneSpec scene = straight_road();
  Agent car;
  car.center = {10.0, 0.0};
  scene.agents.push_back(car);
  const PdmsBreakdown b = rollout_checks(straight_plan(5.0), scene);
  EXPECT_EQ(b.nc, 0.0);
  EXPECT_EQ(b.pdms, 0.0);
}

TEST(Pdms, StaticObjectCollisionHalves) {
  SceneSpec scene = straight_road();
  Agent cone;
  cone.kind = AgentKind::kStaticObject;
  cone.center = {10.0, 0.8};
  cone.length = cone.width = 0.5;
  scene.agents.push_back(cone);
  const PdmsBreakdown b = rollout_checks(straight_plan(5.0), scene);
  EXPECT_EQ(b.nc, 0.5);
  EXPECT_EQ(b.ttc, 1.0);  // static objects are not TTC targets
  EXPECT_DOUBLE_EQ(b.pdms, oracle::pdms_formula(0.5, 1, 1, 1, 1));
}

TEST(Pdms, FormulaCase) {
  EXPECT_DOUBLE_EQ(PdmsBreakdown::compose(1, 1, 0.8, 1, 0), 0.75);
  SceneSpec scene = straight_road();
  scene.safe_progress_upper_bound = 25.0;
  PlanTrajectory zigzag = straight_plan(5.0);
  for (int i = 0; i < kNumWaypoints; ++i) zigzag.waypoints[i].y() = (i % 2 ? 0.3 : -0.3);
  const PdmsBreakdown b = rollout_checks(zigzag, scene);
  EXPECT_EQ(b.nc, 1.0);
  EXPECT_EQ(b.dac, 1.0);
  EXPECT_NEAR(b.ep, 0.8, 1e-12);
  EXPECT_EQ(b.ttc, 1.0);
  EXPECT_EQ(b.comfort, 0.0);
  EXPECT_NEAR(b.pdms, 0.75, 1e-12);
}

TEST(Pdms, LeavingDrivableAreaIsHardZero) {
  const PdmsBreakdown b = rollout_checks(straight_plan(5.0, 3.5), straight_road());
  EXPECT_EQ(b.dac, 0.0);
  EXPECT_EQ(b.pdms, 0.0);
}

TEST(Pdms, TimeToCollisionViolation) {
  SceneSpec scene = straight_road();
  Agent parked;
  parked.center = {26.0, 0.0};
  scene.agents.push_back(parked);
  const PdmsBreakdown b = rollout_checks(straight_plan(5.0), scene);
  EXPECT_EQ(b.nc, 1.0);
  EXPECT_EQ(b.ttc, 0.0);
  EXPECT_NEAR(b.pdms, 7.0 / 12.0, 1e-15);
  PdmsConfig tight;
  tight.ttc_threshold_s = 0.2;
  EXPECT_EQ(rollout_checks(straight_plan(5.0), scene, tight).ttc, 1.0);
}

TEST(Pdms, BreakdownAlwaysObeysFormula) {
  Random rng(62);
  for (int i = 0; i < 200; ++i) {
    SceneSpec scene = straight_road();
    scene.safe_progress_upper_bound = rng.uniform(5.0, 40.0);
    for (int k = rng.integer(0, 3); k > 0; --k) {
      Agent a;
      a.kind = rng.coin() ? AgentKind::kVehicle : AgentKind::kStaticObject;
      a.center = {rng.uniform(0, 40), rng.uniform(-3, 3)};
      a.heading = rng.uniform(-3, 3);
      a.velocity = {rng.uniform(-3, 3), rng.uniform(-1, 1)};
      scene.agents.push_back(a);
    }
    PlanTrajectory plan = straight_plan(rng.uniform(0.5, 10.0), rng.uniform(-3.5, 3.5));
    for (auto& w : plan.waypoints) w += Eigen::Vector2d(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
    const PdmsBreakdown b = rollout_checks(plan, scene);
    ASSERT_DOUBLE_EQ(b.pdms, oracle::pdms_formula(b.nc, b.dac, b.ep, b.ttc, b.comfort));
    if (b.nc == 0.0 || b.dac == 0.0) ASSERT_EQ(b.pdms, 0.0);
  }
}

TEST(Pdms, RollingSamplesCoverHorizon) {
  const auto s = sample_rollout(straight_plan(4.0), 0.1);
  ASSERT_EQ(s.size(), 36u);
  EXPECT_DOUBLE_EQ(s.front().time, 0.5);
  EXPECT_DOUBLE_EQ(s.back().time, 4.0);
  EXPECT_NEAR(s[3].position.x(), 4.0 * 0.8, 1e-12);
}

TEST(Pdms, PolylineProjection) {
  const std::vector<Eigen::Vector2d> line = {{0, 0}, {10, 0}, {10, 10}};
  EXPECT_DOUBLE_EQ(project_onto_polyline(line, {5, 3}), 5.0);
  EXPECT_DOUBLE_EQ(project_onto_polyline(line, {12, 4}), 14.0);
  EXPECT_DOUBLE_EQ(project_onto_polyline(line, {-5, 0}), 0.0);
}

TEST(Pdms, TouchingRectanglesOverlap) {
  EXPECT_TRUE(rectangles_overlap({0, 0}, 0, 2, 2, {2, 0}, 0, 2, 2));
  EXPECT_FALSE(rectangles_overlap({0, 0}, 0, 2, 2, {2.001, 0}, 0, 2, 2));
  EXPECT_TRUE(rectangles_overlap({0, 0}, std::numbers::pi / 4, 2, 2, {2.3, 0}, 0, 2, 2));
}

TEST(Pdms, SceneValidation) {
  auto expect_bad_scene = [](const SceneSpec& s) {
    try {
      rollout_checks(straight_plan(1.0), s);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kBadScene);
    }
  };
  SceneSpec bowtie = straight_road();
  bowtie.drivable_area = {{0, 0}, {10, 10}, {10, 0}, {0, 10}};
  expect_bad_scene(bowtie);
  SceneSpec flat = straight_road();
  flat.drivable_area = {{0, 0}, {1, 0}, {2, 0}};
  expect_bad_scene(flat);
  SceneSpec no_route = straight_road();
  no_route.route = {{1, 1}, {1, 1}};
  expect_bad_scene(no_route);
  SceneSpec bad_bound = straight_road();
  bad_bound.safe_progress_upper_bound = 0.0;
  expect_bad_scene(bad_bound);
}

SceneSpec transformed(const SceneSpec& s, double angle, const Eigen::Vector2d& t) {
  const Eigen::Rotation2Dd r(angle);
  SceneSpec out = s;
  for (auto& v : out.drivable_area) v = r * v + t;
  for (auto& v : out.route) v = r * v + t;
  for (auto& a : out.agents) {
    a.center = r * a.center + t;
    a.velocity = r * a.velocity;
    a.heading += angle;
  }
  return out;
}

TEST(Pdms, RigidEquivariance) {
  Random rng(63);
  for (int i = 0; i < 50; ++i) {
    SceneSpec scene = straight_road();
    scene.safe_progress_upper_bound = rng.uniform(10, 40);
    Agent a;
    a.center = {rng.uniform(5, 40), rng.uniform(-3, 3)};
    a.velocity = {rng.uniform(-2, 2), 0.0};
    scene.agents.push_back(a);
    PlanTrajectory plan = straight_plan(rng.uniform(1, 8), rng.uniform(-1, 1));
    const double angle = rng.uniform(-3, 3);
    const Eigen::Vector2d t(rng.uniform(-100, 100), rng.uniform(-100, 100));
    PlanTrajectory moved = plan;
    for (auto& w : moved.waypoints) w = Eigen::Rotation2Dd(angle) * w + t;
    const PdmsBreakdown b0 = rollout_checks(plan, scene);
    const PdmsBreakdown b1 = rollout_checks(moved, transformed(scene, angle, t));
    EXPECT_NEAR(b0.pdms, b1.pdms, 1e-9);
    EXPECT_NEAR(b0.ep, b1.ep, 1e-9);
    EXPECT_EQ(b0.nc, b1.nc);
    EXPECT_EQ(b0.ttc, b1.ttc);
  }
}

}  // namespace
}  // namespace lfg
