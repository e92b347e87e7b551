#include "lfg/manifest.hpp"

#include <fstream>

#include "lfg/tensor_io.hpp"

namespace lfg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModalities[] = {"points", "pose",  "semantic", "confidence",
                                       "motion", "depth", "labels"};

std::optional<fs::path>& slot(FramePaths& f, std::string_view name) {
  if (name == "points") return f.points;
  if (name == "pose") return f.pose;
  if (name == "semantic") return f.semantic;
  if (name == "confidence") return f.confidence;
  if (name == "motion") return f.motion;
  if (name == "depth") return f.depth;
  return f.labels;
}

const std::optional<fs::path>& slot(const FramePaths& f, std::string_view name) {
  return slot(const_cast<FramePaths&>(f), name);
}

json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kBadManifest, path.string() + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  require(j.contains(key), ErrorCode::kBadManifest, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kBadManifest, where + ": field '" + key + "' has the wrong type");
  }
}

template <typename Fn>
auto per_frame(const SequenceManifest& m, const char* modality, Fn&& load) {
  using R = decltype(load(fs::path{}));
  std::vector<std::optional<R>> out(m.frames.size());
  for (std::size_t t = 0; t < m.frames.size(); ++t) {
    const auto& p = slot(m.frames[t], modality);
    if (p) out[t] = load(m.resolve(*p));
  }
  return out;
}

template <typename T>
std::vector<T> require_all(std::vector<std::optional<T>> items, const SequenceManifest& m,
                           const char* modality) {
  std::vector<T> out;
  out.reserve(items.size());
  for (std::size_t t = 0; t < items.size(); ++t) {
    require(items[t].has_value(), ErrorCode::kBadManifest,
            "sequence " + m.sequence_id + ": frame " + std::to_string(t) + " has no " + modality);
    out.push_back(std::move(*items[t]));
  }
  return out;
}

}  // namespace

fs::path SequenceManifest::resolve(const fs::path& rel) const {
  return rel.is_absolute() ? rel : base_dir / rel;
}

void SequenceManifest::validate(bool check_files) const {
  const std::string who = "manifest " + sequence_id;
  require(!sequence_id.empty(), ErrorCode::kBadManifest, "manifest sequence_id is empty");
  require(num_observed >= 0 && num_future >= 0, ErrorCode::kBadManifest,
          who + ": frame counts must be non-negative");
  require(frame_count() == num_observed + num_future, ErrorCode::kBadManifest,
          who + ": " + std::to_string(frame_count()) + " frames listed, N+M=" +
              std::to_string(num_observed + num_future));
  require(frame_rate_hz == 2 || frame_rate_hz == 5 || frame_rate_hz == 10,
          ErrorCode::kBadManifest, who + ": frame_rate_hz must be 2, 5 or 10");
  if (!check_files) return;
  for (const auto& f : frames) {
    for (const char* m : kModalities) {
      const auto& p = slot(f, m);
      if (p) {
        require(fs::exists(resolve(*p)), ErrorCode::kBadManifest,
                who + ": missing file " + resolve(*p).string());
      }
    }
  }
  if (tracks) {
    require(fs::exists(resolve(*tracks)), ErrorCode::kBadManifest,
            who + ": missing track file " + resolve(*tracks).string());
  }
}

SequenceManifest SequenceManifest::from_json(const json& j, fs::path base_dir) {
  require(j.is_object(), ErrorCode::kBadManifest, "manifest must be a JSON object");
  SequenceManifest m;
  m.base_dir = std::move(base_dir);
  m.sequence_id = field<std::string>(j, "sequence_id", "manifest");
  const std::string where = "manifest " + m.sequence_id;
  m.num_observed = field<int>(j, "num_observed", where);
  m.num_future = field<int>(j, "num_future", where);
  m.frame_rate_hz = field<int>(j, "frame_rate_hz", where);
  if (j.contains("tracks")) m.tracks = field<std::string>(j, "tracks", where);
  const json frames = field<json>(j, "frames", where);
  require(frames.is_array(), ErrorCode::kBadManifest, where + ": 'frames' must be an array");
  for (const auto& fj : frames) {
    require(fj.is_object(), ErrorCode::kBadManifest, where + ": frame entries must be objects");
    FramePaths f;
    for (auto it = fj.begin(); it != fj.end(); ++it) {
      const bool known = std::any_of(std::begin(kModalities), std::end(kModalities),
                                     [&](const char* m) { return it.key() == m; });
      require(known, ErrorCode::kBadManifest, where + ": unknown modality '" + it.key() + "'");
      require(it.value().is_string(), ErrorCode::kBadManifest,
              where + ": path for '" + it.key() + "' must be a string");
      slot(f, it.key()) = fs::path(it.value().get<std::string>());
    }
    m.frames.push_back(std::move(f));
  }
  m.validate(false);
  return m;
}

SequenceManifest SequenceManifest::load(const fs::path& path) {
  SequenceManifest m = from_json(parse_json_file(path), path.parent_path());
  m.validate(true);
  return m;
}

json SequenceManifest::to_json() const {
  json j;
  j["sequence_id"] = sequence_id;
  j["num_observed"] = num_observed;
  j["num_future"] = num_future;
  j["frame_rate_hz"] = frame_rate_hz;
  if (tracks) j["tracks"] = tracks->generic_string();
  j["frames"] = json::array();
  for (const auto& f : frames) {
    json fj = json::object();
    for (const char* m : kModalities) {
      const auto& p = slot(f, m);
      if (p) fj[m] = p->generic_string();
    }
    j["frames"].push_back(std::move(fj));
  }
  return j;
}

FrameSequence load_frame_sequence(const SequenceManifest& m) {
  FrameSequence seq;
  seq.num_observed = m.num_observed;
  seq.num_future = m.num_future;
  seq.frames.resize(m.frames.size());
  for (std::size_t t = 0; t < m.frames.size(); ++t) {
    const FramePaths& f = m.frames[t];
    Frame& out = seq.frames[t];
    if (f.points) out.points = point_map_from_tensor(read_tensor(m.resolve(*f.points), DType::kFloat32));
    if (f.pose) out.pose = pose_from_tensor(read_tensor(m.resolve(*f.pose), DType::kFloat32));
    if (f.semantic) {
      out.semantics = semantic_map_from_tensor(read_tensor(m.resolve(*f.semantic), DType::kFloat32));
    }
    if (f.confidence) {
      out.confidence = scalar_map_from_tensor(read_tensor(m.resolve(*f.confidence), DType::kFloat32));
    }
    if (f.motion) {
      out.motion = scalar_map_from_tensor(read_tensor(m.resolve(*f.motion), DType::kFloat32));
    }
  }
  seq.validate();
  return seq;
}

std::vector<Pose> load_poses(const SequenceManifest& m) {
  return require_all(per_frame(m, "pose",
                               [](const fs::path& p) {
                                 return pose_from_tensor(read_tensor(p, DType::kFloat32));
                               }),
                     m, "pose");
}

std::vector<PointMap> load_point_maps(const SequenceManifest& m) {
  return require_all(per_frame(m, "points",
                               [](const fs::path& p) {
                                 return point_map_from_tensor(read_tensor(p, DType::kFloat32));
                               }),
                     m, "points");
}

std::vector<std::optional<DepthMap>> load_depths(const SequenceManifest& m) {
  return per_frame(m, "depth", [](const fs::path& p) {
    return depth_map_from_tensor(read_tensor(p, DType::kFloat32));
  });
}

std::vector<std::optional<LabelMap>> load_label_maps(const SequenceManifest& m) {
  return per_frame(m, "labels",
                   [](const fs::path& p) { return label_map_from_tensor(read_tensor(p)); });
}

std::vector<InstanceTrack> load_tracks(const fs::path& path) {
  const json j = parse_json_file(path);
  const std::string where = path.string();
  const json list = field<json>(j, "tracks", where);
  require(list.is_array(), ErrorCode::kBadManifest, where + ": 'tracks' must be an array");
  std::vector<InstanceTrack> tracks;
  for (const auto& tj : list) {
    InstanceTrack track;
    track.instance_id = field<int>(tj, "id", where);
    const std::string who = where + " instance " + std::to_string(track.instance_id);
    const fs::path mask_path = path.parent_path() / field<std::string>(tj, "masks", who);
    const Tensor masks = read_tensor(mask_path, DType::kUInt8, 3);
    const auto& v = masks.values<std::uint8_t>();
    const int frames = static_cast<int>(masks.shape()[0]);
    const int h = static_cast<int>(masks.shape()[1]);
    const int w = static_cast<int>(masks.shape()[2]);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int t = 0; t < frames; ++t) {
      Mask m(h, w);
      for (std::size_t p = 0; p < plane; ++p) {
        const std::uint8_t b = v[t * plane + p];
        require(b <= 1, ErrorCode::kOutOfDomain, who + ": mask values must be 0 or 1");
        m.data()[p] = b;
      }
      track.masks.push_back(std::move(m));
    }
    const json kps = field<json>(tj, "keypoints", who);
    require(kps.is_array(), ErrorCode::kBadManifest, who + ": 'keypoints' must be an array");
    for (const auto& frame : kps) {
      std::vector<Keypoint> pts;
      for (const auto& k : frame) {
        require(k.is_array() && k.size() == 3, ErrorCode::kBadManifest,
                who + ": keypoints are [x, y, visible] triples");
        pts.push_back({Eigen::Vector2d(k[0].get<double>(), k[1].get<double>()),
                       k[2].get<double>() != 0.0});
      }
      track.keypoints.push_back(std::move(pts));
    }
    track.validate();
    tracks.push_back(std::move(track));
  }
  return tracks;
}

json tracks_to_json(const std::vector<InstanceTrack>& tracks,
                    const std::vector<std::string>& mask_files) {
  require(tracks.size() == mask_files.size(), ErrorCode::kShapeMismatch,
          "one mask file per track is required");
  json j;
  j["tracks"] = json::array();
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    json tj;
    tj["id"] = tracks[i].instance_id;
    tj["masks"] = mask_files[i];
    tj["keypoints"] = json::array();
    for (const auto& frame : tracks[i].keypoints) {
      json fj = json::array();
      for (const auto& k : frame) fj.push_back({k.pixel.x(), k.pixel.y(), k.visible ? 1 : 0});
      tj["keypoints"].push_back(std::move(fj));
    }
    j["tracks"].push_back(std::move(tj));
  }
  return j;
}

}  // namespace lfg
