#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lfg/eval_metrics.hpp"
#include "lfg/losses.hpp"
#include "lfg/motion.hpp"
#include "lfg/pdms.hpp"
#include "lfg/planning.hpp"

namespace lfg {

using nlohmann::json;

/// Deterministic serialization: sorted keys, two-space indent, trailing
/// newline. Doubles use the shortest representation that round-trips.
std::string dump_json(const json& j);
json load_json_file(const std::filesystem::path& path);

// Planning objects. Waypoints are [[x, y] x 8].
json to_json(const PlanTrajectory& plan);
PlanTrajectory plan_from_json(const json& j);
json to_json(const AnchorSet& anchors);
AnchorSet anchors_from_json(const json& j);
json to_json(const ModePrediction& pred);
ModePrediction mode_prediction_from_json(const json& j);

/// {"drivable_area": [[x, y], ...], "route": [[x, y], ...],
///  "ego": {"length": l, "width": w}, "safe_progress_upper_bound": b,
///  "agents": [{"kind": "vehicle" | "static_object", "center": [x, y],
///              "heading": h, "length": l, "width": w, "velocity": [vx, vy]}]}
json to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const json& j);
json to_json(const PdmsBreakdown& b);

// Score reports with the fixed key names.
json to_json(const SegScores& s);
json to_json(const TrajScores& s);
json to_json(const DepthScores& s);
json to_json(const LossReport& r);
json to_json(const InstanceMotion& m);

}  // namespace lfg
