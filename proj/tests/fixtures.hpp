#pragma once

// On-disk sequence fixtures for driving the CLI end to end.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "lfg/cli.hpp"
#include "lfg/json_io.hpp"
#include "lfg/manifest.hpp"
#include "lfg/tensor_io.hpp"
#include "synthetic.hpp"
#include "test_support.hpp"

namespace lfg::testing {

struct SequenceData {
  std::string id = "seq";
  int num_observed = 0;
  std::vector<LabelMap> labels;
  std::vector<DepthMap> depths;
  std::vector<Pose> poses;
  std::vector<PointMap> points;
  std::vector<InstanceTrack> tracks;
};

inline std::string frame_file(const std::string& stem, std::size_t t) {
  char name[48];
  std::snprintf(name, sizeof name, "%s_%03zu.lfgt", stem.c_str(), t);
  return name;
}

/// Writes every modality present under `root/<id>/` and returns the manifest path.
inline std::filesystem::path write_sequence(const std::filesystem::path& root, const SequenceData& s) {
  const auto dir = root / s.id;
  std::filesystem::create_directories(dir);
  const std::size_t n = std::max({s.labels.size(), s.depths.size(), s.poses.size(), s.points.size()});
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t t = 0; t < n; ++t) {
    nlohmann::json f = nlohmann::json::object();
    auto put = [&](const char* key, const std::string& stem, const Tensor& tensor) {
      f[key] = frame_file(stem, t);
      write_tensor(tensor, dir / frame_file(stem, t));
    };
    if (t < s.labels.size()) put("labels", "labels", to_tensor(s.labels[t]));
    if (t < s.depths.size()) put("depth", "depth", to_tensor(s.depths[t]));
    if (t < s.poses.size()) put("pose", "pose", to_tensor(s.poses[t]));
    if (t < s.points.size()) put("points", "points", to_tensor(s.points[t]));
    frames.push_back(f);
  }
  nlohmann::json m = {{"sequence_id", s.id},
                      {"num_observed", s.num_observed},
                      {"num_future", static_cast<int>(n) - s.num_observed},
                      {"frame_rate_hz", 10},
                      {"frames", frames}};
  if (!s.tracks.empty()) {
    std::vector<std::string> files;
    for (const auto& tr : s.tracks) {
      const std::string name = "inst" + std::to_string(tr.instance_id) + "_masks.lfgt";
      std::vector<std::uint8_t> v;
      for (const auto& mask : tr.masks) v.insert(v.end(), mask.data().begin(), mask.data().end());
      const auto& first = tr.masks.front();
      write_tensor(Tensor({tr.masks.size(), static_cast<std::uint64_t>(first.height()),
                           static_cast<std::uint64_t>(first.width())},
                          v),
                   dir / name);
      files.push_back(name);
    }
    write_text_atomic(dir / "tracks.json", dump_json(tracks_to_json(s.tracks, files)));
    m["tracks"] = "tracks.json";
  }
  write_text_atomic(dir / "manifest.json", dump_json(m));
  return dir / "manifest.json";
}

inline DepthMap random_depth(Random& rng, int h, int w) {
  DepthMap d(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      d.depth(y, x) = rng.uniform(1.0, 50.0);
      d.valid(y, x) = 1;
    }
  return d;
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;

  nlohmann::json result() const { return nlohmann::json::parse(out); }
  /// The "code" field of the trailing error object on stderr.
  std::string error_code() const {
    const auto pos = err.rfind("{\"error\"");
    if (pos == std::string::npos) return "";
    return nlohmann::json::parse(err.substr(pos)).at("error").at("code").get<std::string>();
  }
};

inline CliRun run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = cli_dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace lfg::testing
