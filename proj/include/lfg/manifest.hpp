#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfg/eval_metrics.hpp"
#include "lfg/geometry.hpp"
#include "lfg/motion.hpp"

namespace lfg {

/// Per-frame tensor paths, relative to the manifest's directory.
struct FramePaths {
  std::optional<std::filesystem::path> points;
  std::optional<std::filesystem::path> pose;
  std::optional<std::filesystem::path> semantic;
  std::optional<std::filesystem::path> confidence;
  std::optional<std::filesystem::path> motion;
  std::optional<std::filesystem::path> depth;
  std::optional<std::filesystem::path> labels;
};

/// JSON sequence description:
///
///   {"sequence_id": "seq-0", "num_observed": 3, "num_future": 3,
///    "frame_rate_hz": 10, "tracks": "tracks.json",
///    "frames": [{"points": "p0.lfgt", "pose": "T0.lfgt", ...}, ...]}
struct SequenceManifest {
  std::string sequence_id;
  int num_observed = 0;
  int num_future = 0;
  int frame_rate_hz = 10;
  std::vector<FramePaths> frames;
  std::optional<std::filesystem::path> tracks;
  std::filesystem::path base_dir;

  int frame_count() const noexcept { return static_cast<int>(frames.size()); }
  std::filesystem::path resolve(const std::filesystem::path& rel) const;

  /// Shape invariants; with `check_files`, every referenced file must exist.
  void validate(bool check_files) const;

  static SequenceManifest from_json(const nlohmann::json& j, std::filesystem::path base_dir);
  static SequenceManifest load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

FrameSequence load_frame_sequence(const SequenceManifest& m);
std::vector<Pose> load_poses(const SequenceManifest& m);
std::vector<PointMap> load_point_maps(const SequenceManifest& m);
/// Depth maps per frame; frames without a depth entry yield nullopt.
std::vector<std::optional<DepthMap>> load_depths(const SequenceManifest& m);
std::vector<std::optional<LabelMap>> load_label_maps(const SequenceManifest& m);

/// Track records:
///
///   {"tracks": [{"id": 3, "masks": "inst3_masks.lfgt",
///                "keypoints": [[[x, y, visible], ...], ...]}]}
///
/// `masks` is a uint8 tensor of shape [T, H, W].
std::vector<InstanceTrack> load_tracks(const std::filesystem::path& path);
nlohmann::json tracks_to_json(const std::vector<InstanceTrack>& tracks,
                              const std::vector<std::string>& mask_files);

}  // namespace lfg
