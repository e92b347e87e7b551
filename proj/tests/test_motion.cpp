#include <algorithm>
#include <gtest/gtest.h>

#include "lfg/error.hpp"
#include "lfg/motion.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "test_support.hpp"

namespace lfg {
namespace {

using testing::Random;

PointMap constant_map(int h, int w, const Eigen::Vector3d& p) {
  PointMap pm(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      pm.set_point(y, x, p);
      pm.set_valid(y, x, true);
    }
  return pm;
}

InstanceTrack single_track(int id, int frames, int h, int w, std::vector<Keypoint> kps) {
  InstanceTrack t;
  t.instance_id = id;
  for (int i = 0; i < frames; ++i) {
    t.masks.emplace_back(h, w);
    t.keypoints.push_back(kps);
  }
  return t;
}

std::vector<Centroid> centroids_along_x(const std::vector<double>& xs) {
  std::vector<Centroid> c;
  for (double x : xs) c.push_back({{x, 0, 0}, true});
  return c;
}

TEST(Centroids, KeypointAtGridNode) {
  Random rng(40);
  std::vector<PointMap> maps = {rng.point_map(5, 5), rng.point_map(5, 5)};
  for (auto& m : maps) m.set_valid(2, 3, true);
  const InstanceTrack tr = single_track(1, 2, 5, 5, {{{3, 2}, true}});
  const auto c = instance_centroids(tr, maps);
  for (int t = 0; t < 2; ++t) {
    ASSERT_TRUE(c[t].valid);
    EXPECT_EQ(c[t].position, maps[t].point(2, 3));
  }
}

TEST(Centroids, MeanOfKeypoints) {
  PointMap pm(1, 2);
  pm.set_point(0, 0, {0, 0, 1});
  pm.set_point(0, 1, {0, 0, 3});
  pm.set_valid(0, 0, true);
  pm.set_valid(0, 1, true);
  const InstanceTrack tr = single_track(1, 1, 1, 2, {{{0, 0}, true}, {{1, 0}, true}, {{0.5, 0}, false}});
  const auto c = instance_centroids(tr, std::vector<PointMap>{pm});
  EXPECT_EQ(c[0].position, Eigen::Vector3d(0, 0, 2));
}

TEST(Centroids, OutOfBoundsAndInvalidSkipped) {
  PointMap pm = constant_map(3, 3, {1, 2, 3});
  pm.set_valid(0, 0, false);
  const InstanceTrack tr =
      single_track(4, 1, 3, 3, {{{-1, 0}, true}, {{0, 0}, true}, {{2, 2}, true}, {{9, 9}, true}});
  const auto c = instance_centroids(tr, std::vector<PointMap>{pm});
  EXPECT_TRUE(c[0].valid);
  EXPECT_EQ(c[0].position, Eigen::Vector3d(1, 2, 3));
}

TEST(Centroids, NoUsableFrameIsUnusableTrack) {
  PointMap pm(3, 3);
  const InstanceTrack tr = single_track(4, 1, 3, 3, {{{1, 1}, true}});
  try {
    instance_centroids(tr, std::vector<PointMap>{pm});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnusableTrack);
    EXPECT_EQ(e.category(), ErrorCategory::kComputation);
  }
}

TEST(Centroids, MatchLoopOracle) {
  Random rng(41);
  for (int i = 0; i < 20; ++i) {
    const auto scene = testing::random_motion_scene(rng, 4, 8, 10, false);
    for (const auto& tr : scene.tracks) {
      const auto c = instance_centroids(tr, scene.point_maps);
      for (int t = 0; t < 4; ++t) {
        Eigen::Vector3d sum = Eigen::Vector3d::Zero();
        int n = 0;
        for (const auto& kp : tr.keypoints[t]) {
          if (!kp.visible || kp.pixel.x() < 0 || kp.pixel.y() < 0 || kp.pixel.x() > 9 ||
              kp.pixel.y() > 7)
            continue;
          const auto s = oracle::dense_bilinear(scene.point_maps[t], kp.pixel.x(), kp.pixel.y());
          if (!s.valid) continue;
          sum += s.point;
          ++n;
        }
        ASSERT_EQ(c[t].valid, n > 0);
        if (n > 0) ASSERT_LT((c[t].position - sum / n).norm(), 1e-12);
      }
    }
  }
}

TEST(Displacements, StaticAndConstantVelocity) {
  for (double d : displacement_series(centroids_along_x({1, 1, 1, 1}))) EXPECT_EQ(d, 0.0);
  for (double d : displacement_series(centroids_along_x({0, 0.2, 0.4, 0.6})))
    EXPECT_NEAR(d, 0.2, 1e-15);
}

TEST(Displacements, GapsProduceNoEntry) {
  auto c = centroids_along_x({0, 1, 5, 6, 8});
  c[2].valid = false;
  const auto d = displacement_series(c);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0], 1.0);
  EXPECT_EQ(d[1], 2.0);
}

TEST(Displacements, TooFewFrames) {
  auto c = centroids_along_x({0, 1, 2});
  c[0].valid = c[2].valid = false;
  EXPECT_THROW(displacement_series(c), Error);
  c = centroids_along_x({0, 1, 2});
  c[1].valid = false;
  EXPECT_THROW(displacement_series(c), Error);
}

TEST(Displacements, RandomWalkMatchesNormLoop) {
  Random rng(42);
  std::vector<Centroid> c;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int t = 0; t < 30; ++t) {
    p += rng.vec3(-0.5, 0.5);
    c.push_back({p, true});
  }
  const auto d = displacement_series(c);
  for (int t = 0; t + 1 < 30; ++t) {
    const Eigen::Vector3d diff = c[t + 1].position - c[t].position;
    EXPECT_NEAR(d[t], std::sqrt(diff.x() * diff.x() + diff.y() * diff.y() + diff.z() * diff.z()), 1e-15);
  }
}

TEST(Classify, Examples) {
  const MotionConfig cfg;
  EXPECT_EQ(cfg.tau_motion, 0.1);
  EXPECT_EQ(cfg.grid_size, 80);
  EXPECT_EQ(cfg.rule, MotionRule::kMajority);
  EXPECT_FALSE(classify_dynamic(std::vector<double>{0, 0, 0}, cfg));
  EXPECT_TRUE(classify_dynamic(std::vector<double>{0.2, 0.2, 0.2}, cfg));
  EXPECT_FALSE(classify_dynamic(std::vector<double>{0.2, 0.05, 0.05}, cfg));
  EXPECT_EQ(count_moving(std::vector<double>{0.2, 0.05, 0.05}, 0.1), 1);
}

TEST(Classify, StrictThresholdAndMinFramesRule) {
  MotionConfig cfg;
  EXPECT_EQ(count_moving(std::vector<double>{0.1, 0.1}, 0.1), 0);
  cfg.rule = MotionRule::kMinFrames;
  cfg.k_min = 2;
  EXPECT_TRUE(classify_dynamic(std::vector<double>{0.2, 0.0, 0.3, 0.0, 0.0}, cfg));
  EXPECT_FALSE(classify_dynamic(std::vector<double>{0.2, 0.0, 0.0}, cfg));
  // Exactly half is not a majority.
  cfg.rule = MotionRule::kMajority;
  EXPECT_FALSE(classify_dynamic(std::vector<double>{0.2, 0.0}, cfg));
}

TEST(Classify, MonotoneInTau) {
  Random rng(43);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> d;
    for (int k = 0; k < 6; ++k) d.push_back(rng.uniform(0.0, 0.3));
    MotionConfig hi;
    hi.tau_motion = rng.uniform(0.01, 0.3);
    MotionConfig lo = hi;
    lo.tau_motion = hi.tau_motion * rng.uniform(0.1, 1.0);
    if (classify_dynamic(d, hi)) ASSERT_TRUE(classify_dynamic(d, lo));
  }
}

TEST(Rasterize, NoDynamicInstancesGivesZeros) {
  InstanceTrack t = single_track(1, 2, 3, 3, {{{1, 1}, true}});
  t.masks[0](1, 1) = 1;
  const auto masks = rasterize_motion_masks(std::vector<InstanceTrack>{t}, {false}, 2, 3, 3);
  for (const auto& m : masks)
    for (double v : m.data()) EXPECT_EQ(v, 0.0);
}

TEST(Rasterize, OverlapIsUnion) {
  InstanceTrack a = single_track(1, 1, 2, 2, {{{0, 0}, true}});
  InstanceTrack b = single_track(2, 1, 2, 2, {{{0, 0}, true}});
  a.masks[0](0, 0) = a.masks[0](0, 1) = 1;
  b.masks[0](0, 1) = b.masks[0](1, 1) = 1;
  const auto m = rasterize_motion_masks(std::vector<InstanceTrack>{a, b}, {true, true}, 1, 2, 2);
  EXPECT_EQ(m[0].data(), std::vector<double>({1, 1, 0, 1}));
}

TEST(PseudoGt, MovingAndParkedCar) {
  const int h = 6, w = 8, frames = 4;
  std::vector<PointMap> maps;
  for (int t = 0; t < frames; ++t) {
    PointMap pm = constant_map(h, w, {0, 0, 30});
    for (int y = 1; y < 3; ++y)
      for (int x = 0; x < 2; ++x) pm.set_point(y, x, {0.5 * t, 0, 10});  // mover
    for (int y = 3; y < 5; ++y)
      for (int x = 5; x < 7; ++x) pm.set_point(y, x, {3, 0, 12});  // parked
    maps.push_back(pm);
  }
  InstanceTrack mover = single_track(7, frames, h, w, {{{0.5, 1.5}, true}});
  InstanceTrack parked = single_track(3, frames, h, w, {{{5.5, 3.5}, true}});
  for (int t = 0; t < frames; ++t) {
    for (int y = 1; y < 3; ++y)
      for (int x = 0; x < 2; ++x) mover.masks[t](y, x) = 1;
    for (int y = 3; y < 5; ++y)
      for (int x = 5; x < 7; ++x) parked.masks[t](y, x) = 1;
  }
  const auto r = generate_pseudo_gt(std::vector<InstanceTrack>{mover, parked}, maps, {}, MotionConfig{});
  ASSERT_EQ(r.instances.size(), 2u);
  EXPECT_EQ(r.instances[0].instance_id, 3);
  EXPECT_FALSE(r.instances[0].dynamic);
  EXPECT_TRUE(r.instances[1].dynamic);
  for (int t = 0; t < frames; ++t) {
    EXPECT_EQ(r.masks[t](1, 0), 1.0);
    EXPECT_EQ(r.masks[t](3, 5), 0.0);
  }
}

TEST(PseudoGt, EmptyTrackList) {
  Random rng(44);
  const std::vector<PointMap> maps = {rng.point_map(3, 4), rng.point_map(3, 4)};
  const auto r = generate_pseudo_gt({}, maps, {}, MotionConfig{});
  ASSERT_EQ(r.masks.size(), 2u);
  for (const auto& m : r.masks)
    for (double v : m.data()) EXPECT_EQ(v, 0.0);
}

TEST(PseudoGt, MatchesBruteForce) {
  Random rng(45);
  for (int i = 0; i < 20; ++i) {
    const auto s = testing::random_motion_scene(rng);
    const auto r = generate_pseudo_gt(s.tracks, s.point_maps, s.poses, MotionConfig{});
    auto sorted = s.tracks;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });
    const auto o = oracle::motion_brute_force(sorted, s.point_maps, s.poses, 0.1, true, 2);
    ASSERT_EQ(r.instances.size(), sorted.size());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      EXPECT_EQ(r.instances[k].dynamic, o.dynamic[k]);
      ASSERT_EQ(r.instances[k].displacements.size(), o.displacements[k].size());
      for (std::size_t j = 0; j < o.displacements[k].size(); ++j)
        EXPECT_NEAR(r.instances[k].displacements[j], o.displacements[k][j], 1e-9);
    }
    for (std::size_t t = 0; t < r.masks.size(); ++t)
      for (std::size_t p = 0; p < r.masks[t].data().size(); ++p)
        ASSERT_EQ(r.masks[t].data()[p], static_cast<double>(o.masks[t][p]));
  }
}

TEST(PseudoGt, CameraFrameIgnoresPoses) {
  Random rng(46);
  const auto s = testing::random_motion_scene(rng);
  MotionConfig cam;
  cam.frame = DisplacementFrame::kCamera;
  const auto a = generate_pseudo_gt(s.tracks, s.point_maps, s.poses, cam);
  const auto b = generate_pseudo_gt(s.tracks, s.point_maps, {}, MotionConfig{});
  for (std::size_t k = 0; k < a.instances.size(); ++k)
    EXPECT_EQ(a.instances[k].displacements, b.instances[k].displacements);
}

TEST(PseudoGt, Errors) {
  Random rng(47);
  const auto s = testing::random_motion_scene(rng);
  auto dup = s.tracks;
  dup.push_back(dup.front());
  EXPECT_THROW(generate_pseudo_gt(dup, s.point_maps, s.poses, MotionConfig{}), Error);

  std::vector<Pose> short_poses(s.poses.begin(), s.poses.end() - 1);
  EXPECT_THROW(generate_pseudo_gt(s.tracks, s.point_maps, short_poses, MotionConfig{}), Error);

  MotionConfig bad;
  bad.tau_motion = 0.0;
  try {
    generate_pseudo_gt(s.tracks, s.point_maps, s.poses, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadConfig);
  }

  auto hidden = s.tracks;
  for (auto& k : hidden.front().keypoints.front()) k.visible = false;
  try {
    generate_pseudo_gt(hidden, s.point_maps, s.poses, MotionConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("instance"), std::string::npos);
  }
}

}  // namespace
}  // namespace lfg
