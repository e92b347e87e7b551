#include "lfg/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lfg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      require(line.back() == ']' && line.size() > 2, ErrorCode::kBadConfig,
              where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kBadConfig, where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorCode::kBadConfig, where + ": empty key");
    cfg.set(section.empty() ? key : section + "." + key, unquote(trim(line.substr(eq + 1))));
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, ErrorCode::kBadConfig,
          "override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), unquote(trim(assignment.substr(eq + 1))));
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v),
          ErrorCode::kBadConfig, key + ": '" + s + "' is not a finite number");
  return v;
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorCode::kBadConfig,
          key + ": '" + s + "' is not an integer");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string s = it->second;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(ErrorCode::kBadConfig, key + ": '" + it->second + "' is not a boolean");
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

void Config::check_known(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    require(known.count(key) != 0, ErrorCode::kBadConfig, "unknown config key '" + key + "'");
  }
}

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "loss.lambda_seg",        "loss.lambda_pose",      "loss.lambda_point",
      "loss.lambda_motion",     "loss.lambda_conf",      "loss.lambda_trans",
      "loss.lambda_future",     "loss.omega",            "loss.alpha",
      "loss.huber_delta",       "loss.conf_threshold",   "loss.pair_set",
      "class_weights.road",     "class_weights.vehicle", "class_weights.person",
      "class_weights.traffic_light", "class_weights.traffic_sign", "class_weights.sky",
      "class_weights.background",
      "motion.tau_motion",      "motion.k_min",          "motion.rule",
      "motion.grid_size",       "motion.frame",
      "pdms.ttc_threshold_s",   "pdms.max_accel",        "pdms.max_jerk",
      "pdms.substep_s",         "pdms.ttc_step_s",
      "planning.k",             "planning.focal_gamma",
      "traj.with_scale",
      "seg.absent_classes",     "seg.split_index",
      "loss_check.points",      "loss_check.fd_step",    "loss_check.tolerance",
  };
  return keys;
}

LossWeights loss_weights_from(const Config& cfg) {
  LossWeights w;
  w.lambda_seg = cfg.get_double("loss.lambda_seg", w.lambda_seg);
  w.lambda_pose = cfg.get_double("loss.lambda_pose", w.lambda_pose);
  w.lambda_point = cfg.get_double("loss.lambda_point", w.lambda_point);
  w.lambda_motion = cfg.get_double("loss.lambda_motion", w.lambda_motion);
  w.lambda_conf = cfg.get_double("loss.lambda_conf", w.lambda_conf);
  w.lambda_trans = cfg.get_double("loss.lambda_trans", w.lambda_trans);
  w.lambda_future = cfg.get_double("loss.lambda_future", w.lambda_future);
  w.omega = cfg.get_double("loss.omega", w.omega);
  w.alpha = cfg.get_double("loss.alpha", w.alpha);
  w.huber_delta = cfg.get_double("loss.huber_delta", w.huber_delta);
  w.conf_threshold = cfg.get_double("loss.conf_threshold", w.conf_threshold);
  w.validate();
  return w;
}

ClassWeightTable class_weights_from(const Config& cfg) {
  static const char* names[kNumClasses] = {"road", "vehicle",   "person",    "traffic_light",
                                           "traffic_sign", "sky", "background"};
  ClassWeightTable table;
  for (int c = 0; c < kNumClasses; ++c) {
    table.weights[c] = cfg.get_double(std::string("class_weights.") + names[c], table.weights[c]);
  }
  table.validate();
  return table;
}

PairSet pair_set_from(const Config& cfg) {
  const std::string s = cfg.get_string("loss.pair_set", "consecutive");
  if (s == "consecutive") return PairSet::kConsecutive;
  if (s == "all") return PairSet::kAllPairs;
  fail(ErrorCode::kBadConfig, "loss.pair_set must be 'consecutive' or 'all'");
}

MotionConfig motion_config_from(const Config& cfg) {
  MotionConfig m;
  m.tau_motion = cfg.get_double("motion.tau_motion", m.tau_motion);
  m.k_min = cfg.get_int("motion.k_min", m.k_min);
  m.grid_size = cfg.get_int("motion.grid_size", m.grid_size);
  const std::string rule = cfg.get_string("motion.rule", "majority");
  if (rule == "majority") {
    m.rule = MotionRule::kMajority;
  } else if (rule == "k_min") {
    m.rule = MotionRule::kMinFrames;
  } else {
    fail(ErrorCode::kBadConfig, "motion.rule must be 'majority' or 'k_min'");
  }
  const std::string frame = cfg.get_string("motion.frame", "world");
  if (frame == "world") {
    m.frame = DisplacementFrame::kWorld;
  } else if (frame == "camera") {
    m.frame = DisplacementFrame::kCamera;
  } else {
    fail(ErrorCode::kBadConfig, "motion.frame must be 'world' or 'camera'");
  }
  m.validate();
  return m;
}

PdmsConfig pdms_config_from(const Config& cfg) {
  PdmsConfig p;
  p.ttc_threshold_s = cfg.get_double("pdms.ttc_threshold_s", p.ttc_threshold_s);
  p.max_accel = cfg.get_double("pdms.max_accel", p.max_accel);
  p.max_jerk = cfg.get_double("pdms.max_jerk", p.max_jerk);
  p.substep_s = cfg.get_double("pdms.substep_s", p.substep_s);
  p.ttc_step_s = cfg.get_double("pdms.ttc_step_s", p.ttc_step_s);
  p.validate();
  return p;
}

AbsentClassPolicy absent_policy_from(const Config& cfg) {
  const std::string s = cfg.get_string("seg.absent_classes", "exclude");
  if (s == "exclude") return AbsentClassPolicy::kExclude;
  if (s == "zero") return AbsentClassPolicy::kCountAsZero;
  if (s == "one") return AbsentClassPolicy::kCountAsOne;
  fail(ErrorCode::kBadConfig, "seg.absent_classes must be 'exclude', 'zero' or 'one'");
}

}  // namespace lfg
