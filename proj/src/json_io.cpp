#include "lfg/json_io.hpp"

#include <cmath>
#include <fstream>

namespace lfg {

namespace {

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    fail(ErrorCode::kBadManifest, std::string(what) + ": " + e.what());
  }
}

Eigen::Vector2d vec2(const json& j) {
  require(j.is_array() && j.size() == 2, ErrorCode::kBadManifest, "expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json vec2_json(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

std::array<Eigen::Vector2d, kNumWaypoints> waypoints_from(const json& j) {
  require(j.is_array() && j.size() == kNumWaypoints, ErrorCode::kBadManifest,
          "a trajectory needs exactly 8 waypoints");
  std::array<Eigen::Vector2d, kNumWaypoints> w{};
  for (int i = 0; i < kNumWaypoints; ++i) w[i] = vec2(j[i]);
  return w;
}

json waypoints_json(const std::array<Eigen::Vector2d, kNumWaypoints>& w) {
  json j = json::array();
  for (const auto& p : w) j.push_back(vec2_json(p));
  return j;
}

std::vector<Eigen::Vector2d> polyline_from(const json& j) {
  require(j.is_array(), ErrorCode::kBadManifest, "expected a list of [x, y] points");
  std::vector<Eigen::Vector2d> out;
  for (const auto& p : j) out.push_back(vec2(p));
  return out;
}

json polyline_json(const std::vector<Eigen::Vector2d>& pts) {
  json j = json::array();
  for (const auto& p : pts) j.push_back(vec2_json(p));
  return j;
}

}  // namespace

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  return guarded(path.string().c_str(), [&] { return json::parse(in); });
}

json to_json(const PlanTrajectory& plan) { return {{"waypoints", waypoints_json(plan.waypoints)}}; }

PlanTrajectory plan_from_json(const json& j) {
  return guarded("plan", [&] {
    PlanTrajectory p;
    p.waypoints = waypoints_from(j.is_object() ? j.at("waypoints") : j);
    return p;
  });
}

json to_json(const AnchorSet& anchors) {
  json list = json::array();
  for (const auto& a : anchors.anchors) list.push_back(waypoints_json(a.waypoints));
  return {{"seed", anchors.seed}, {"k", anchors.size()}, {"anchors", list}};
}

AnchorSet anchors_from_json(const json& j) {
  return guarded("anchor set", [&] {
    AnchorSet a;
    a.seed = j.value("seed", std::uint64_t{0});
    for (const auto& w : j.at("anchors")) {
      PlanTrajectory p;
      p.waypoints = waypoints_from(w);
      a.anchors.push_back(p);
    }
    require(a.size() > 0, ErrorCode::kBadManifest, "anchor set is empty");
    return a;
  });
}

json to_json(const ModePrediction& pred) {
  json offsets = json::array();
  for (const auto& o : pred.offsets) offsets.push_back(waypoints_json(o));
  return {{"confidences", pred.confidences}, {"offsets", offsets}};
}

ModePrediction mode_prediction_from_json(const json& j) {
  return guarded("mode prediction", [&] {
    ModePrediction p;
    p.confidences = j.at("confidences").get<std::vector<double>>();
    for (const auto& o : j.at("offsets")) p.offsets.push_back(waypoints_from(o));
    require(p.offsets.size() == p.confidences.size(), ErrorCode::kShapeMismatch,
            "offsets must be shaped K x 8 x 2 with K confidences");
    return p;
  });
}

json to_json(const SceneSpec& scene) {
  json agents = json::array();
  for (const auto& a : scene.agents) {
    agents.push_back({{"kind", a.kind == AgentKind::kVehicle ? "vehicle" : "static_object"},
                      {"center", vec2_json(a.center)},
                      {"heading", a.heading},
                      {"length", a.length},
                      {"width", a.width},
                      {"velocity", vec2_json(a.velocity)}});
  }
  return {{"drivable_area", polyline_json(scene.drivable_area)},
          {"route", polyline_json(scene.route)},
          {"ego", {{"length", scene.ego.length}, {"width", scene.ego.width}}},
          {"safe_progress_upper_bound", scene.safe_progress_upper_bound},
          {"agents", agents}};
}

SceneSpec scene_from_json(const json& j) {
  return guarded("scene", [&] {
    SceneSpec s;
    s.drivable_area = polyline_from(j.at("drivable_area"));
    s.route = polyline_from(j.at("route"));
    s.ego.length = j.at("ego").at("length").get<double>();
    s.ego.width = j.at("ego").at("width").get<double>();
    s.safe_progress_upper_bound = j.at("safe_progress_upper_bound").get<double>();
    for (const auto& aj : j.value("agents", json::array())) {
      Agent a;
      const std::string kind = aj.at("kind").get<std::string>();
      require(kind == "vehicle" || kind == "static_object", ErrorCode::kBadScene,
              "agent kind must be 'vehicle' or 'static_object'");
      a.kind = kind == "vehicle" ? AgentKind::kVehicle : AgentKind::kStaticObject;
      a.center = vec2(aj.at("center"));
      a.heading = aj.value("heading", 0.0);
      a.length = aj.at("length").get<double>();
      a.width = aj.at("width").get<double>();
      a.velocity = aj.contains("velocity") ? vec2(aj.at("velocity")) : Eigen::Vector2d::Zero();
      s.agents.push_back(a);
    }
    s.validate();
    return s;
  });
}

json to_json(const PdmsBreakdown& b) {
  return {{"nc", b.nc}, {"dac", b.dac}, {"ep", b.ep},
          {"ttc", b.ttc}, {"comfort", b.comfort}, {"pdms", b.pdms}};
}

json to_json(const SegScores& s) {
  return {{"pa", s.pixel_accuracy}, {"miou", s.mean_iou}, {"mdice", s.mean_dice},
          {"fwiou", s.fw_iou}};
}

json to_json(const TrajScores& s) {
  return {{"ate_m", s.ate}, {"rot_deg", s.rot}, {"trans_m", s.trans}};
}

json to_json(const DepthScores& s) { return {{"absrel", s.abs_rel}, {"rmse_m", s.rmse}}; }

json to_json(const LossReport& r) {
  json terms = json::object();
  for (const auto& [name, pair] : r.terms) {
    terms[name] = {{"current", pair.current}, {"future", pair.future}};
  }
  return {{"total", r.total}, {"current", r.current}, {"future", r.future}, {"terms", terms}};
}

json to_json(const InstanceMotion& m) {
  double max_d = 0.0;
  double sum = 0.0;
  for (double d : m.displacements) {
    max_d = std::max(max_d, d);
    sum += d;
  }
  return {{"id", m.instance_id},
          {"displacements", m.displacements},
          {"mean_displacement", m.displacements.empty() ? 0.0 : sum / m.displacements.size()},
          {"max_displacement", max_d},
          {"moving_frames", m.moving_count},
          {"dynamic", m.dynamic}};
}

}  // namespace lfg
