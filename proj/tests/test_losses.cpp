#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "lfg/error.hpp"
#include "lfg/gradcheck.hpp"
#include "lfg/losses.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace lfg {
namespace {

using testing::make_pose;
using testing::Random;

const double kLn2 = std::log(2.0);

SemanticMap onehot(const LabelMap& l) {
  SemanticMap m(l.height(), l.width(), kNumClasses);
  for (int y = 0; y < l.height(); ++y)
    for (int x = 0; x < l.width(); ++x) m(y, x, l(y, x)) = 1.0;
  return m;
}

TEST(SegLoss, PerfectPredictionUpToClamp) {
  Random rng(30);
  const LabelMap l = rng.labels(5, 5);
  EXPECT_LE(seg_loss(onehot(l), l).value, 7 * -std::log(1 - kProbEpsilon));
}

TEST(SegLoss, SinglePixelUniformHalf) {
  LabelMap l(1, 1, static_cast<std::uint8_t>(SegClass::kRoad));
  const SemanticMap p(1, 1, kNumClasses, 0.5);
  const ClassWeightTable w;
  double others = 0.0;
  for (int c = 1; c < kNumClasses; ++c) others += w.weights[c];
  EXPECT_NEAR(seg_loss(p, l).value, (0.5 * kLn2 + others * kLn2) / 7.0, 1e-15);
}

TEST(SegLoss, DefaultClassWeights) {
  const ClassWeightTable w;
  const std::array<double, kNumClasses> expected = {0.5, 1.2, 1.6, 1.8, 1.8, 0.3, 0.2};
  EXPECT_EQ(w.weights, expected);
}

TEST(SegLoss, MatchesLoopOracle) {
  Random rng(31);
  const ClassWeightTable w;
  for (int i = 0; i < 20; ++i) {
    const LabelMap l = rng.labels(6, 4);
    SemanticMap p(6, 4, kNumClasses);
    for (double& v : p.data()) v = rng.uniform(0.0, 1.0);
    EXPECT_NEAR(seg_loss(p, l).value, oracle::seg_loss_loop(p, l, w.weights), 1e-12);
  }
}

TEST(SegLoss, ClampZeroesGradient) {
  LabelMap l(1, 1, 0);
  SemanticMap p(1, 1, kNumClasses, 0.5);
  p(0, 0, 0) = 0.0;
  p(0, 0, 1) = 1.0;
  const GridLoss g = seg_loss(p, l);
  EXPECT_EQ(g.gradient(0, 0, 0), 0.0);
  EXPECT_EQ(g.gradient(0, 0, 1), 0.0);
  EXPECT_NE(g.gradient(0, 0, 2), 0.0);
  EXPECT_TRUE(std::isfinite(g.value));
}

TEST(SegLoss, Errors) {
  LabelMap l(2, 2);
  EXPECT_THROW(seg_loss(SemanticMap(2, 2, 3), l), Error);
  EXPECT_THROW(seg_loss(SemanticMap(2, 3, kNumClasses), l), Error);
  SemanticMap nan(2, 2, kNumClasses, 0.5);
  nan(1, 1, 3) = std::numeric_limits<double>::quiet_NaN();
  try {
    seg_loss(nan, l);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
}

TEST(Huber, Branches) {
  EXPECT_DOUBLE_EQ(huber(0.5, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(huber(2.0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(huber(-2.0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(huber(1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(huber_derivative(3.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(huber_derivative(-0.25, 1.0), -0.25);
}

TEST(PoseLoss, ZeroAtTarget) {
  Random rng(32);
  std::vector<Pose> poses;
  for (int i = 0; i < 5; ++i) poses.push_back(rng.pose());
  for (PairSet ps : {PairSet::kConsecutive, PairSet::kAllPairs}) {
    const PoseLoss l = pose_loss(poses, poses, ps);
    EXPECT_LT(l.value, 1e-7);
    EXPECT_GE(l.value, 0.0);
  }
}

TEST(PoseLoss, SingleComponentResiduals) {
  const std::vector<Pose> target = {Pose::identity(), make_pose(Eigen::Matrix3d::Identity(), {1, 0, 0})};
  std::vector<Pose> pred = target;
  pred[1].translation.x() += 0.5;
  // Element-wise mean over the three components of one pair.
  PoseLoss l = pose_loss(pred, target, PairSet::kConsecutive, 1.0, 1.0);
  EXPECT_NEAR(l.trans_term * 3.0, 0.125, 1e-15);
  EXPECT_NEAR(l.rot_term, 0.0, 1e-15);
  EXPECT_NEAR(l.value, 0.125 / 3.0, 1e-15);

  pred[1].translation.x() = 3.0;
  l = pose_loss(pred, target, PairSet::kConsecutive, 1.0, 1.0);
  EXPECT_NEAR(l.trans_term * 3.0, 1.5, 1e-15);
}

TEST(PoseLoss, GlobalPoseCancels) {
  Random rng(33);
  std::vector<Pose> pred, target;
  for (int i = 0; i < 4; ++i) {
    pred.push_back(rng.pose());
    target.push_back(rng.pose());
  }
  const double base = pose_loss(pred, target, PairSet::kAllPairs).value;
  const Pose g1 = rng.pose();
  std::vector<Pose> pred_g, target_g;
  for (int i = 0; i < 4; ++i) {
    pred_g.push_back(compose(g1, pred[i]));
    target_g.push_back(compose(g1, target[i]));
  }
  EXPECT_NEAR(pose_loss(pred_g, target_g, PairSet::kAllPairs).value, base, 1e-6);
}

TEST(PoseLoss, PairSets) {
  EXPECT_EQ(make_pairs(4, PairSet::kConsecutive).size(), 3u);
  EXPECT_EQ(make_pairs(4, PairSet::kAllPairs).size(), 6u);
  EXPECT_THROW(pose_loss(std::vector<Pose>(1), std::vector<Pose>(1)), Error);
  EXPECT_THROW(pose_loss(std::vector<Pose>(2), std::vector<Pose>(3)), Error);
}

TEST(PointLoss, OneValidPixelOffsetInX) {
  PointMap t(2, 2), p(2, 2);
  t.set_valid(0, 1, true);
  p.set_valid(0, 1, true);
  p.set_point(0, 1, {1, 0, 0});
  p.set_point(1, 1, {50, 50, 50});  // invalid, ignored
  EXPECT_DOUBLE_EQ(point_loss(p, t, 1.0).value, 1.0 / 3.0);
  EXPECT_EQ(point_loss(t, t).value, 0.0);
}

TEST(PointLoss, MatchesLoopOracleAndScalesWithAlpha) {
  Random rng(34);
  for (int i = 0; i < 20; ++i) {
    const PointMap p = rng.point_map(5, 6, 0.7);
    PointMap t = rng.point_map(5, 6, 0.7);
    t.set_valid(0, 0, true);
    PointMap pp = p;
    pp.set_valid(0, 0, true);
    EXPECT_NEAR(point_loss(pp, t, 1.0).value, oracle::point_loss_loop(pp, t, 1.0), 1e-12);
    EXPECT_NEAR(point_loss(pp, t, 2.5).value, 2.5 * point_loss(pp, t, 1.0).value, 1e-12);
  }
}

TEST(PointLoss, NoJointlyValidPixels) {
  try {
    point_loss(PointMap(2, 2), PointMap(2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateInput);
  }
}

TEST(ConfidenceTarget, EqualMapsAllPositive) {
  Random rng(35);
  const PointMap p = rng.point_map(4, 4, 0.75);
  const ConfidenceTarget ct = confidence_target(p, p, 0.1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      EXPECT_EQ(ct.mask(y, x), p.valid(y, x) ? 1 : 0);
      EXPECT_EQ(ct.labels(y, x), p.valid(y, x) ? 1 : 0);
    }
}

TEST(ConfidenceTarget, ThresholdIsStrict) {
  PointMap p(1, 2), t(1, 2);
  for (int x = 0; x < 2; ++x) {
    p.set_valid(0, x, true);
    t.set_valid(0, x, true);
  }
  p.set_point(0, 0, {0.25, 0, 0});
  p.set_point(0, 1, {0.2499, 0, 0});
  const ConfidenceTarget ct = confidence_target(p, t, 0.25);
  EXPECT_EQ(ct.labels(0, 0), 0);
  EXPECT_EQ(ct.labels(0, 1), 1);
}

TEST(ConfidenceTarget, MatchesLoopOracle) {
  Random rng(36);
  const PointMap p = rng.point_map(6, 6, 0.8);
  PointMap t = p;
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) t.set_point(y, x, p.point(y, x) + rng.vec3(-0.1, 0.1));
  const ConfidenceTarget ct = confidence_target(p, t, 0.1);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      if (!p.valid(y, x)) continue;
      double e = 0.0;
      for (int k = 0; k < 3; ++k) e += std::pow(p.point(y, x)[k] - t.point(y, x)[k], 2);
      EXPECT_EQ(ct.labels(y, x), std::sqrt(e) < 0.1 ? 1 : 0);
    }
}

TEST(BinaryCE, HalfEverywhereIsLn2) {
  const ScalarMap p(3, 3, 1, 0.5);
  Random rng(37);
  Mask t(3, 3);
  for (auto& v : t.data()) v = rng.coin() ? 1 : 0;
  EXPECT_NEAR(binary_ce(p, t, Mask(3, 3, 1, 1)).value, kLn2, 1e-15);
}

TEST(BinaryCE, ExactPredictionNearZero) {
  Mask t(2, 2);
  t(0, 0) = 1;
  t(1, 1) = 1;
  ScalarMap p(2, 2);
  for (std::size_t i = 0; i < 4; ++i) p.data()[i] = t.data()[i];
  const double v = binary_ce(p, t, Mask(2, 2, 1, 1)).value;
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 1e-6);
}

TEST(BinaryCE, MatchesLoopOracle) {
  Random rng(38);
  ScalarMap p(5, 5);
  Mask t(5, 5), m(5, 5);
  for (std::size_t i = 0; i < 25; ++i) {
    p.data()[i] = rng.uniform();
    t.data()[i] = rng.coin() ? 1 : 0;
    m.data()[i] = rng.coin(0.7) ? 1 : 0;
  }
  m(0, 0) = 1;
  EXPECT_NEAR(binary_ce(p, t, m).value, oracle::bce_loop(p, t, m), 1e-12);
}

TEST(BinaryCE, EmptyMaskIsDegenerate) {
  EXPECT_THROW(binary_ce(ScalarMap(2, 2), Mask(2, 2), Mask(2, 2)), Error);
}

TEST(TotalLoss, AllZero) {
  const LossReport r = total_loss({}, {});
  EXPECT_EQ(r.total, 0.0);
}

TEST(TotalLoss, AllOnesWithDefaultConstants) {
  const LossTerms ones{1, 1, 1, 1, 1};
  const LossReport r = total_loss(ones, ones);
  // current = 1 + 1 + 1 + 1 + 0.05; future = 10 * current; lambda_future = 1.
  const double current = 1.0 + 1.0 + 1.0 + 1.0 + 0.05;
  EXPECT_NEAR(r.current, current, 1e-12);
  EXPECT_NEAR(r.future, 10.0 * current, 1e-12);
  EXPECT_NEAR(r.total, 44.55, 1e-12);
  EXPECT_EQ(r.terms.size(), 5u);
}

TEST(TotalLoss, DoublingOmegaDoublesFuture) {
  const LossTerms cur{0.3, 0.2, 0.7, 0.1, 0.4};
  const LossTerms fut{0.5, 0.6, 0.2, 0.9, 0.3};
  LossWeights w;
  const LossReport a = total_loss(cur, fut, w);
  w.omega *= 2.0;
  const LossReport b = total_loss(cur, fut, w);
  EXPECT_NEAR(b.future, 2.0 * a.future, 1e-12);
  EXPECT_NEAR(b.total - a.total, a.future, 1e-12);
}

TEST(TotalLoss, LinearInEachTerm) {
  const LossTerms base{0.3, 0.2, 0.7, 0.1, 0.4};
  const LossWeights w;
  const LossReport r0 = total_loss(base, base, w);
  const double lambdas[] = {w.lambda_seg, w.lambda_pose, w.lambda_point, w.lambda_motion, w.lambda_conf};
  for (int k = 0; k < 5; ++k) {
    LossTerms scaled = base;
    double* fields[] = {&scaled.seg, &scaled.pose, &scaled.point, &scaled.motion, &scaled.conf};
    const double before = *fields[k];
    *fields[k] *= 3.0;
    const LossReport r = total_loss(scaled, base, w);
    EXPECT_NEAR(r.total - r0.total, lambdas[k] * 2.0 * before, 1e-12);
  }
}

TEST(TotalLoss, RejectsNonFiniteAndBadWeights) {
  LossTerms bad;
  bad.motion = std::numeric_limits<double>::infinity();
  try {
    total_loss(bad, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
    EXPECT_NE(std::string(e.what()).find("current.motion"), std::string::npos);
  }
  LossWeights w;
  w.omega = 1.0;
  EXPECT_THROW(total_loss({}, {}, w), Error);
}

TEST(GradCheck, CentralDifferencesOfQuadratic) {
  const auto g = central_differences(
      [](const std::vector<double>& x) { return x[0] * x[0] + 3.0 * x[1]; }, {2.0, -1.0}, 1e-5);
  EXPECT_NEAR(g[0], 4.0, 1e-8);
  EXPECT_NEAR(g[1], 3.0, 1e-8);
}

TEST(GradCheck, RelativeErrorMasking) {
  EXPECT_EQ(relative_error({0, 0}, {0, 0}, {true, true}), 0.0);
  EXPECT_NEAR(relative_error({1, 100}, {1.1, 0}, {true, false}), 0.1 / 1.1, 1e-15);
}

TEST(GradCheck, AllLossesPass) {
  GradCheckOptions opt;
  opt.points = 20;
  const auto results = run_gradient_checks(3, opt);
  EXPECT_EQ(results.size(), 7u);
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed) << r.loss << " rel err " << r.max_rel_error;
    EXPECT_EQ(r.points, 20);
    EXPECT_GT(r.checked_components, 0);
  }
}

}  // namespace
}  // namespace lfg
