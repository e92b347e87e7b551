#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "lfg/eval_metrics.hpp"
#include "lfg/losses.hpp"
#include "lfg/motion.hpp"
#include "lfg/pdms.hpp"

namespace lfg {

/// Flat key=value settings. `[section]` headers prefix the keys that follow
/// with "section.", `#` starts a comment.
///
///   [loss]
///   omega = 10
///   [motion]
///   rule = majority
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  /// Applies a "key=value" override; later values win.
  void set(const std::string& key, const std::string& value);
  void set_assignment(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  /// Throws kBadConfig naming the first key not in `known`.
  void check_known(const std::set<std::string>& known) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

const std::set<std::string>& known_config_keys();

LossWeights loss_weights_from(const Config& cfg);
ClassWeightTable class_weights_from(const Config& cfg);
PairSet pair_set_from(const Config& cfg);
MotionConfig motion_config_from(const Config& cfg);
PdmsConfig pdms_config_from(const Config& cfg);
AbsentClassPolicy absent_policy_from(const Config& cfg);

}  // namespace lfg
