#include "lfg/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lfg {

void InstanceTrack::validate() const {
  const std::string who = "instance " + std::to_string(instance_id);
  require(!keypoints.empty(), ErrorCode::kInvalidArgument, who + ": track has no frames");
  require(masks.size() == keypoints.size(), ErrorCode::kShapeMismatch,
          who + ": " + std::to_string(masks.size()) + " masks for " +
              std::to_string(keypoints.size()) + " keypoint frames");
  const bool any_visible = std::any_of(keypoints.front().begin(), keypoints.front().end(),
                                       [](const Keypoint& k) { return k.visible; });
  require(any_visible, ErrorCode::kInvalidArgument,
          who + ": no visible keypoint in the first frame");
  for (const auto& m : masks) {
    require(m.same_extent(masks.front()) && m.channels() == 1, ErrorCode::kShapeMismatch,
            who + ": instance masks differ in shape");
  }
}

void MotionConfig::validate() const {
  require(std::isfinite(tau_motion) && tau_motion > 0.0, ErrorCode::kBadConfig,
          "tau_motion must be positive");
  require(k_min >= 1, ErrorCode::kBadConfig, "k_min must be at least 1");
  require(grid_size >= 1, ErrorCode::kBadConfig, "grid_size must be at least 1");
}

std::vector<Centroid> instance_centroids(const InstanceTrack& track,
                                         std::span<const PointMap> point_maps) {
  require(static_cast<int>(point_maps.size()) == track.frame_count(), ErrorCode::kShapeMismatch,
          "instance " + std::to_string(track.instance_id) + ": track spans " +
              std::to_string(track.frame_count()) + " frames but " +
              std::to_string(point_maps.size()) + " point maps were given");
  std::vector<Centroid> out(point_maps.size());
  for (std::size_t t = 0; t < point_maps.size(); ++t) {
    const PointMap& pm = point_maps[t];
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    int n = 0;
    for (const Keypoint& kp : track.keypoints[t]) {
      if (!kp.visible) continue;
      const double x = kp.pixel.x();
      const double y = kp.pixel.y();
      if (!(x >= 0.0 && y >= 0.0 && x <= pm.width() - 1 && y <= pm.height() - 1)) continue;
      const SampledPoint s = sample_point_map(pm, kp.pixel);
      if (!s.valid) continue;
      sum += s.point;
      ++n;
    }
    if (n > 0) out[t] = {sum / static_cast<double>(n), true};
  }
  const bool any = std::any_of(out.begin(), out.end(), [](const Centroid& c) { return c.valid; });
  require(any, ErrorCode::kUnusableTrack,
          "instance " + std::to_string(track.instance_id) + ": no frame has a valid centroid");
  return out;
}

std::vector<Centroid> centroids_to_world(std::span<const Centroid> centroids,
                                         std::span<const Pose> poses) {
  require(centroids.size() == poses.size(), ErrorCode::kShapeMismatch,
          "centroid and pose counts differ");
  std::vector<Centroid> out(centroids.begin(), centroids.end());
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (out[t].valid) out[t].position = poses[t].apply(out[t].position);
  }
  return out;
}

std::vector<double> displacement_series(std::span<const Centroid> centroids) {
  const auto valid = std::count_if(centroids.begin(), centroids.end(),
                                   [](const Centroid& c) { return c.valid; });
  require(valid >= 2, ErrorCode::kUnusableTrack,
          "displacements need at least 2 valid frames, got " + std::to_string(valid));
  std::vector<double> d;
  for (std::size_t t = 0; t + 1 < centroids.size(); ++t) {
    if (centroids[t].valid && centroids[t + 1].valid) {
      d.push_back((centroids[t + 1].position - centroids[t].position).norm());
    }
  }
  require(!d.empty(), ErrorCode::kUnusableTrack, "no two consecutive frames have valid centroids");
  return d;
}

int count_moving(std::span<const double> displacements, double tau) {
  return static_cast<int>(std::count_if(displacements.begin(), displacements.end(),
                                        [tau](double d) { return d > tau; }));
}

bool classify_dynamic(std::span<const double> displacements, const MotionConfig& cfg) {
  const int moving = count_moving(displacements, cfg.tau_motion);
  if (cfg.rule == MotionRule::kMinFrames) return moving >= cfg.k_min;
  return 2 * static_cast<std::size_t>(moving) > displacements.size();
}

std::vector<MotionMask> rasterize_motion_masks(std::span<const InstanceTrack> tracks,
                                               const std::vector<bool>& dynamic, int frames,
                                               int height, int width) {
  require(tracks.size() == dynamic.size(), ErrorCode::kShapeMismatch,
          "one dynamic label per track is required");
  std::vector<MotionMask> out(static_cast<std::size_t>(frames), MotionMask(height, width));
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const InstanceTrack& track = tracks[i];
    require(static_cast<int>(track.masks.size()) == frames, ErrorCode::kShapeMismatch,
            "instance " + std::to_string(track.instance_id) + ": mask count differs from frames");
    if (!dynamic[i]) continue;
    for (int t = 0; t < frames; ++t) {
      const Mask& m = track.masks[static_cast<std::size_t>(t)];
      require(m.height() == height && m.width() == width, ErrorCode::kShapeMismatch,
              "instance " + std::to_string(track.instance_id) + ": mask shape differs from frame");
      auto& dst = out[static_cast<std::size_t>(t)].data();
      for (std::size_t p = 0; p < dst.size(); ++p) {
        if (m.data()[p]) dst[p] = 1.0;
      }
    }
  }
  return out;
}

PseudoLabelResult generate_pseudo_gt(std::span<const InstanceTrack> tracks,
                                     std::span<const PointMap> point_maps,
                                     std::span<const Pose> poses, const MotionConfig& cfg) {
  cfg.validate();
  const int frames = static_cast<int>(point_maps.size());
  require(frames > 0, ErrorCode::kInvalidArgument, "motion pseudo-labels need point maps");
  require(poses.empty() || static_cast<int>(poses.size()) == frames, ErrorCode::kShapeMismatch,
          "pose count differs from point map count");
  const int height = point_maps.front().height();
  const int width = point_maps.front().width();
  for (const auto& pm : point_maps) {
    require_same_extent(pm.height(), pm.width(), height, width, "point maps");
  }

  std::vector<InstanceTrack> ordered(tracks.begin(), tracks.end());
  std::sort(ordered.begin(), ordered.end(),
            [](const InstanceTrack& a, const InstanceTrack& b) {
              return a.instance_id < b.instance_id;
            });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    require(ordered[i].instance_id != ordered[i - 1].instance_id, ErrorCode::kInvalidArgument,
            "duplicate instance id " + std::to_string(ordered[i].instance_id));
  }

  const bool use_poses = cfg.frame == DisplacementFrame::kWorld && !poses.empty();
  PseudoLabelResult result;
  std::vector<bool> dynamic;
  for (const InstanceTrack& track : ordered) {
    try {
      track.validate();
      require(track.frame_count() == frames, ErrorCode::kShapeMismatch,
              "track spans " + std::to_string(track.frame_count()) + " frames, sequence has " +
                  std::to_string(frames));
      std::vector<Centroid> centroids = instance_centroids(track, point_maps);
      if (use_poses) centroids = centroids_to_world(centroids, poses);
      InstanceMotion info;
      info.instance_id = track.instance_id;
      info.displacements = displacement_series(centroids);
      info.moving_count = count_moving(info.displacements, cfg.tau_motion);
      info.dynamic = classify_dynamic(info.displacements, cfg);
      dynamic.push_back(info.dynamic);
      result.instances.push_back(std::move(info));
    } catch (const Error& e) {
      const std::string prefix = "instance " + std::to_string(track.instance_id);
      const std::string what = e.what();
      throw Error(e.code(), what.rfind(prefix, 0) == 0 ? what : prefix + ": " + what);
    }
  }
  result.masks = rasterize_motion_masks(ordered, dynamic, frames, height, width);
  return result;
}

}  // namespace lfg
