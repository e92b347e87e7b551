#include "lfg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "lfg/config.hpp"
#include "lfg/error.hpp"
#include "lfg/gradcheck.hpp"
#include "lfg/json_io.hpp"
#include "lfg/manifest.hpp"
#include "lfg/tensor_io.hpp"

namespace lfg {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::vector<std::string> manifests;
  std::vector<std::string> preds;
  std::vector<std::string> gts;
  std::vector<std::string> sets;
  std::string out;
  std::string out_dir;
  std::string config;
  std::string anchors;
  std::uint64_t seed = 0;
  bool json_only = false;
};

struct Outcome {
  json result;
  std::string summary;
  int exit_code = kExitOk;
};

Config build_config(const Options& o) {
  Config cfg = o.config.empty() ? Config{} : Config::load(o.config);
  for (const auto& s : o.sets) cfg.set_assignment(s);
  cfg.check_known(known_config_keys());
  return cfg;
}

/// Applies fn to 0..n-1 on up to worker_count() threads. Results keep input
/// order; the lowest-index failure is rethrown so errors are deterministic too.
template <typename R, typename Fn>
std::vector<R> parallel_map(std::size_t n, Fn&& fn) {
  std::vector<std::optional<R>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

json spread(const std::vector<double>& values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {{"mean", mean}, {"std", std::sqrt(var)}};
}

/// Sorts per-sequence records by id and adds mean/std over sequences for the
/// listed keys.
json sequence_report(std::vector<json> records, const std::vector<std::string>& keys) {
  std::stable_sort(records.begin(), records.end(), [](const json& a, const json& b) {
    return a.at("sequence_id").get<std::string>() < b.at("sequence_id").get<std::string>();
  });
  json summary = json::object();
  for (const auto& k : keys) {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.at(k).get<double>());
    summary[k] = spread(v);
  }
  return {{"sequences", records},
          {"summary", summary},
          {"spread", "mean and population std over sequences"}};
}

std::vector<std::pair<std::string, std::string>> paired(const Options& o) {
  require(!o.preds.empty(), ErrorCode::kInvalidArgument, "at least one --pred/--gt pair is required");
  require(o.preds.size() == o.gts.size(), ErrorCode::kInvalidArgument,
          "--pred and --gt must be given the same number of times");
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < o.preds.size(); ++i) out.emplace_back(o.preds[i], o.gts[i]);
  return out;
}

std::vector<std::string> manifest_list(const Options& o) {
  std::vector<std::string> all = o.manifests;
  all.insert(all.end(), o.gts.begin(), o.gts.end());
  require(!all.empty(), ErrorCode::kInvalidArgument, "at least one --manifest is required");
  return all;
}

void require_same_frames(const SequenceManifest& p, const SequenceManifest& g) {
  require(p.frame_count() == g.frame_count(), ErrorCode::kShapeMismatch,
          "sequence " + g.sequence_id + ": prediction has " + std::to_string(p.frame_count()) +
              " frames, ground truth " + std::to_string(g.frame_count()));
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::string summary_line(const json& report, const std::vector<std::string>& keys) {
  std::string line = std::to_string(report.at("sequences").size()) + " sequence(s):";
  for (const auto& k : keys) {
    line += " " + k + "=" + fmt(report.at("summary").at(k).at("mean").get<double>());
  }
  return line;
}

// ---------------------------------------------------------------- evaluation

Outcome eval_depth(const Options& o, const Config&) {
  const auto pairs = paired(o);
  auto records = parallel_map<json>(pairs.size(), [&](std::size_t i) {
    const auto pm = SequenceManifest::load(pairs[i].first);
    const auto gm = SequenceManifest::load(pairs[i].second);
    require_same_frames(pm, gm);
    const auto pred = load_depths(pm);
    const auto gt = load_depths(gm);
    double abs_rel = 0.0, rmse = 0.0;
    int n = 0;
    for (std::size_t t = 0; t < gt.size(); ++t) {
      if (!pred[t] || !gt[t]) continue;
      const DepthAlignment a = align_depth_scale_shift(*pred[t], *gt[t]);
      const DepthScores s = depth_metrics(a.aligned, *gt[t]);
      abs_rel += s.abs_rel;
      rmse += s.rmse;
      ++n;
    }
    require(n > 0, ErrorCode::kBadManifest,
            "sequence " + gm.sequence_id + ": no frame has depth in both manifests");
    return json{{"sequence_id", gm.sequence_id}, {"frames", n},
                {"absrel", abs_rel / n}, {"rmse_m", rmse / n}};
  });
  const std::vector<std::string> keys = {"absrel", "rmse_m"};
  json report = sequence_report(std::move(records), keys);
  return {report, summary_line(report, keys)};
}

Outcome eval_traj(const Options& o, const Config& cfg) {
  const auto pairs = paired(o);
  const bool with_scale = cfg.get_bool("traj.with_scale", true);
  auto records = parallel_map<json>(pairs.size(), [&](std::size_t i) {
    const auto pm = SequenceManifest::load(pairs[i].first);
    const auto gm = SequenceManifest::load(pairs[i].second);
    require_same_frames(pm, gm);
    const auto pred = load_poses(pm);
    const auto gt = load_poses(gm);
    json r = to_json(trajectory_scores(pred, gt, with_scale));
    r["sequence_id"] = gm.sequence_id;
    r["frames"] = gm.frame_count();
    return r;
  });
  const std::vector<std::string> keys = {"ate_m", "rot_deg", "trans_m"};
  json report = sequence_report(std::move(records), keys);
  report["with_scale"] = with_scale;
  return {report, summary_line(report, keys)};
}

Outcome eval_seg(const Options& o, const Config& cfg) {
  const auto pairs = paired(o);
  const AbsentClassPolicy policy = absent_policy_from(cfg);
  auto records = parallel_map<json>(pairs.size(), [&](std::size_t i) {
    const auto pm = SequenceManifest::load(pairs[i].first);
    const auto gm = SequenceManifest::load(pairs[i].second);
    require_same_frames(pm, gm);
    const auto pred = load_label_maps(pm);
    const auto gt = load_label_maps(gm);
    ConfusionMatrix cm;
    int n = 0;
    for (std::size_t t = 0; t < gt.size(); ++t) {
      if (!pred[t] || !gt[t]) continue;
      cm.add(*pred[t], *gt[t]);
      ++n;
    }
    require(n > 0, ErrorCode::kBadManifest,
            "sequence " + gm.sequence_id + ": no frame has labels in both manifests");
    json r = to_json(scores_from_confusion(cm, policy));
    r["sequence_id"] = gm.sequence_id;
    r["frames"] = n;
    return r;
  });
  const std::vector<std::string> keys = {"pa", "miou", "mdice", "fwiou"};
  json report = sequence_report(std::move(records), keys);
  return {report, summary_line(report, keys)};
}

Outcome static_baseline_cmd(const Options& o, const Config& cfg) {
  const auto paths = manifest_list(o);
  const AbsentClassPolicy policy = absent_policy_from(cfg);
  auto records = parallel_map<json>(paths.size(), [&](std::size_t i) {
    const auto m = SequenceManifest::load(paths[i]);
    const int split = cfg.get_int("seg.split_index", m.num_observed);
    std::vector<LabelMap> labels;
    const auto loaded = load_label_maps(m);
    for (std::size_t t = 0; t < loaded.size(); ++t) {
      require(loaded[t].has_value(), ErrorCode::kBadManifest,
              "sequence " + m.sequence_id + ": frame " + std::to_string(t) + " has no labels");
      labels.push_back(*loaded[t]);
    }
    json r = to_json(static_baseline(labels, split, policy));
    r["sequence_id"] = m.sequence_id;
    r["split_index"] = split;
    return r;
  });
  const std::vector<std::string> keys = {"pa", "miou", "mdice", "fwiou"};
  json report = sequence_report(std::move(records), keys);
  return {report, summary_line(report, keys)};
}

// ---------------------------------------------------------------- pipelines

struct MotionOutput {
  std::string sequence_id;
  std::vector<MotionMask> masks;
  json record;
};

Outcome gen_motion_masks(const Options& o, const Config& cfg) {
  const auto paths = manifest_list(o);
  require(!o.out_dir.empty(), ErrorCode::kInvalidArgument, "gen-motion-masks needs --out-dir");
  const MotionConfig mcfg = motion_config_from(cfg);
  auto outputs = parallel_map<MotionOutput>(paths.size(), [&](std::size_t i) {
    const auto m = SequenceManifest::load(paths[i]);
    require(m.tracks.has_value(), ErrorCode::kBadManifest,
            "sequence " + m.sequence_id + ": manifest has no 'tracks' entry");
    const auto tracks = load_tracks(m.resolve(*m.tracks));
    const auto points = load_point_maps(m);
    const bool all_posed = std::all_of(m.frames.begin(), m.frames.end(),
                                       [](const FramePaths& f) { return f.pose.has_value(); });
    const std::vector<Pose> poses = all_posed ? load_poses(m) : std::vector<Pose>{};
    PseudoLabelResult r = generate_pseudo_gt(tracks, points, poses, mcfg);
    MotionOutput out;
    out.sequence_id = m.sequence_id;
    json instances = json::array();
    int dynamic = 0;
    for (const auto& inst : r.instances) {
      instances.push_back(to_json(inst));
      dynamic += inst.dynamic ? 1 : 0;
    }
    json files = json::array();
    for (std::size_t t = 0; t < r.masks.size(); ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "motion_%03zu.lfgt", t);
      files.push_back((fs::path(m.sequence_id) / name).generic_string());
    }
    out.masks = std::move(r.masks);
    out.record = {{"sequence_id", m.sequence_id},
                  {"instances", instances},
                  {"dynamic_instances", dynamic},
                  {"mask_files", files},
                  {"posed", all_posed}};
    return out;
  });
  std::sort(outputs.begin(), outputs.end(),
            [](const MotionOutput& a, const MotionOutput& b) { return a.sequence_id < b.sequence_id; });
  // Files are written only after every sequence succeeded.
  json records = json::array();
  int total_dynamic = 0;
  for (const auto& out : outputs) {
    const auto& files = out.record.at("mask_files");
    for (std::size_t t = 0; t < out.masks.size(); ++t) {
      Mask binary(out.masks[t].height(), out.masks[t].width());
      for (std::size_t p = 0; p < binary.data().size(); ++p) {
        binary.data()[p] = out.masks[t].data()[p] > 0.5 ? 1 : 0;
      }
      const fs::path dest = fs::path(o.out_dir) / files[t].get<std::string>();
      fs::create_directories(dest.parent_path());
      write_tensor(mask_to_tensor(binary), dest);
    }
    total_dynamic += out.record.at("dynamic_instances").get<int>();
    records.push_back(out.record);
  }
  json report = {{"sequences", records},
                 {"config",
                  {{"tau_motion", mcfg.tau_motion},
                   {"k_min", mcfg.k_min},
                   {"rule", mcfg.rule == MotionRule::kMajority ? "majority" : "k_min"},
                   {"frame", mcfg.frame == DisplacementFrame::kWorld ? "world" : "camera"}}}};
  return {report, std::to_string(outputs.size()) + " sequence(s), " + std::to_string(total_dynamic) +
                      " dynamic instance(s)"};
}

Outcome normalize_cmd(const Options& o, const Config&) {
  const auto paths = manifest_list(o);
  require(!o.out_dir.empty(), ErrorCode::kInvalidArgument, "normalize needs --out-dir");
  struct Normalized {
    SequenceManifest manifest;
    NormalizedSequence result;
  };
  auto items = parallel_map<Normalized>(paths.size(), [&](std::size_t i) {
    Normalized n;
    n.manifest = SequenceManifest::load(paths[i]);
    n.result = normalize_geometry(load_frame_sequence(n.manifest));
    return n;
  });
  std::sort(items.begin(), items.end(), [](const Normalized& a, const Normalized& b) {
    return a.manifest.sequence_id < b.manifest.sequence_id;
  });
  json records = json::array();
  for (const auto& item : items) {
    const SequenceManifest& src = item.manifest;
    const fs::path dir = fs::path(o.out_dir) / src.sequence_id;
    fs::create_directories(dir);
    SequenceManifest dst = src;
    dst.base_dir = dir;
    for (std::size_t t = 0; t < src.frames.size(); ++t) {
      FramePaths& f = dst.frames[t];
      const Frame& frame = item.result.sequence.frames[t];
      // Untouched modalities keep pointing at the source files.
      for (auto* slot : {&f.semantic, &f.confidence, &f.motion, &f.depth, &f.labels}) {
        if (*slot) *slot = fs::absolute(src.resolve(**slot));
      }
      char name[32];
      if (frame.points) {
        std::snprintf(name, sizeof name, "points_%03zu.lfgt", t);
        write_tensor(to_tensor(*frame.points), dir / name);
        f.points = name;
      }
      if (frame.pose) {
        std::snprintf(name, sizeof name, "pose_%03zu.lfgt", t);
        write_tensor(to_tensor(*frame.pose), dir / name);
        f.pose = name;
      }
    }
    if (dst.tracks) dst.tracks = fs::absolute(src.resolve(*dst.tracks));
    json mj = dst.to_json();
    mj["scale"] = item.result.scale;
    write_text_atomic(dir / "manifest.json", dump_json(mj));
    records.push_back({{"sequence_id", src.sequence_id},
                       {"scale", item.result.scale},
                       {"manifest", (fs::path(src.sequence_id) / "manifest.json").generic_string()}});
  }
  return {{{"sequences", records}}, std::to_string(items.size()) + " sequence(s) normalized"};
}

// ---------------------------------------------------------------- losses

/// Ground-truth motion masks may be stored as uint8 {0,1} or float32 {0,1}.
Mask load_motion_target(const fs::path& path) {
  const Tensor t = read_tensor(path);
  if (t.dtype() == DType::kUInt8) return mask_from_tensor(t);
  const ScalarMap m = scalar_map_from_tensor(t);
  Mask out(m.height(), m.width());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    const double v = m.data()[i];
    require(v == 0.0 || v == 1.0, ErrorCode::kOutOfDomain, path.string() + ": motion target must be 0 or 1");
    out.data()[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

/// Averages each term over frames [begin, end) where both sides carry the
/// needed modality; terms with no such frame stay 0.
LossTerms side_terms(const FrameSequence& pred, const SequenceManifest& gm, const FrameSequence& gt,
                     const std::vector<std::optional<LabelMap>>& labels, int begin, int end,
                     const LossWeights& w, const ClassWeightTable& cw, PairSet pairs) {
  LossTerms terms;
  int n_seg = 0, n_point = 0, n_motion = 0, n_conf = 0;
  std::vector<Pose> pp, gp;
  for (int t = begin; t < end; ++t) {
    const Frame& p = pred.frames[t];
    const Frame& g = gt.frames[t];
    if (p.semantics && labels[t]) {
      terms.seg += seg_loss(*p.semantics, *labels[t], cw).value;
      ++n_seg;
    }
    if (p.points && g.points) {
      terms.point += point_loss(*p.points, *g.points, w.alpha).value;
      ++n_point;
      if (p.confidence) {
        const ConfidenceTarget ct = confidence_target(*p.points, *g.points, w.conf_threshold);
        terms.conf += binary_ce(*p.confidence, ct.labels, ct.mask).value;
        ++n_conf;
      }
    }
    if (p.motion && gm.frames[t].motion) {
      const Mask target = load_motion_target(gm.resolve(*gm.frames[t].motion));
      terms.motion += binary_ce(*p.motion, target, Mask(target.height(), target.width(), 1, 1)).value;
      ++n_motion;
    }
    if (p.pose && g.pose) {
      pp.push_back(*p.pose);
      gp.push_back(*g.pose);
    }
  }
  if (n_seg) terms.seg /= n_seg;
  if (n_point) terms.point /= n_point;
  if (n_motion) terms.motion /= n_motion;
  if (n_conf) terms.conf /= n_conf;
  if (pp.size() >= 2) terms.pose = pose_loss(pp, gp, pairs, w.huber_delta, w.lambda_trans).value;
  return terms;
}

Outcome loss_check(const Options& o, const Config& cfg) {
  GradCheckOptions opt;
  opt.points = cfg.get_int("loss_check.points", opt.points);
  opt.step = cfg.get_double("loss_check.fd_step", opt.step);
  opt.tolerance = cfg.get_double("loss_check.tolerance", opt.tolerance);
  require(opt.points > 0 && opt.step > 0.0 && opt.tolerance > 0.0, ErrorCode::kBadConfig,
          "loss_check.points, fd_step and tolerance must be positive");
  const auto checks = run_gradient_checks(o.seed, opt);
  json list = json::array();
  bool passed = true;
  std::string summary;
  for (const auto& c : checks) {
    passed = passed && c.passed;
    list.push_back({{"loss", c.loss},
                    {"points", c.points},
                    {"checked_components", c.checked_components},
                    {"max_rel_error", c.max_rel_error},
                    {"max_value_at_target", c.max_value_at_target},
                    {"passed", c.passed}});
    summary += c.loss + ": max rel err " + fmt(c.max_rel_error) + (c.passed ? " ok\n" : " FAILED\n");
  }
  json report = {{"seed", o.seed},
                 {"fd_step", opt.step},
                 {"tolerance", opt.tolerance},
                 {"gradient_checks", list},
                 {"passed", passed}};

  if (!o.preds.empty() || !o.gts.empty()) {
    const auto pairs = paired(o);
    const LossWeights w = loss_weights_from(cfg);
    const ClassWeightTable cw = class_weights_from(cfg);
    const PairSet ps = pair_set_from(cfg);
    auto records = parallel_map<json>(pairs.size(), [&](std::size_t i) {
      const auto pm = SequenceManifest::load(pairs[i].first);
      const auto gm = SequenceManifest::load(pairs[i].second);
      require_same_frames(pm, gm);
      const FrameSequence pred = load_frame_sequence(pm);
      // Ground-truth motion is a binary mask, loaded separately.
      SequenceManifest g_geom = gm;
      for (auto& f : g_geom.frames) f.motion.reset();
      const FrameSequence gt = load_frame_sequence(g_geom);
      const auto labels = load_label_maps(gm);
      const int n = gm.num_observed;
      const LossTerms cur = side_terms(pred, gm, gt, labels, 0, n, w, cw, ps);
      const LossTerms fut = side_terms(pred, gm, gt, labels, n, gm.frame_count(), w, cw, ps);
      json r = to_json(total_loss(cur, fut, w));
      r["sequence_id"] = gm.sequence_id;
      return r;
    });
    std::sort(records.begin(), records.end(), [](const json& a, const json& b) {
      return a.at("sequence_id").get<std::string>() < b.at("sequence_id").get<std::string>();
    });
    report["reports"] = records;
  }
  return {report, summary, passed ? kExitOk : kExitComputation};
}

// ---------------------------------------------------------------- planning

std::vector<PlanTrajectory> load_trajectories(const std::string& path) {
  const json j = load_json_file(path);
  const json& list = j.is_object() ? j.at("trajectories") : j;
  require(list.is_array(), ErrorCode::kBadManifest, path + ": expected a list of trajectories");
  std::vector<PlanTrajectory> out;
  for (const auto& t : list) out.push_back(plan_from_json(t));
  return out;
}

Outcome cluster_anchors(const Options& o, const Config& cfg) {
  std::vector<std::string> files = o.gts;
  files.insert(files.end(), o.manifests.begin(), o.manifests.end());
  require(!files.empty(), ErrorCode::kInvalidArgument,
          "cluster-anchors needs ground-truth futures via --gt");
  std::vector<PlanTrajectory> futures;
  for (const auto& f : files) {
    const auto part = load_trajectories(f);
    futures.insert(futures.end(), part.begin(), part.end());
  }
  const int k = cfg.get_int("planning.k", 20);
  const KMeansResult r = kmeans_anchors(futures, k, o.seed);
  json report = to_json(r.anchors);
  report["iterations"] = r.iterations;
  report["objective_history"] = r.objective_history;
  report["assignment"] = r.assignment;
  return {report, std::to_string(futures.size()) + " trajectories -> " + std::to_string(k) +
                      " anchors in " + std::to_string(r.iterations) + " iteration(s)"};
}

Outcome decode_plan_cmd(const Options& o, const Config& cfg) {
  require(!o.anchors.empty(), ErrorCode::kInvalidArgument, "decode-plan needs --anchors");
  require(!o.preds.empty(), ErrorCode::kInvalidArgument, "decode-plan needs at least one --pred");
  require(o.gts.empty() || o.gts.size() == o.preds.size(), ErrorCode::kInvalidArgument,
          "--gt, when given, must pair with every --pred");
  const AnchorSet anchors = anchors_from_json(load_json_file(o.anchors));
  const double gamma = cfg.get_double("planning.focal_gamma", 2.0);
  json list = json::array();
  for (std::size_t i = 0; i < o.preds.size(); ++i) {
    const ModePrediction pred = mode_prediction_from_json(load_json_file(o.preds[i]));
    const DecodedPlan d = decode_plan(anchors, pred);
    json r = {{"mode", d.mode}, {"plan", to_json(d.plan)}};
    if (!o.gts.empty()) {
      const PlanTrajectory gt = plan_from_json(load_json_file(o.gts[i]));
      const PlanningLoss l = planning_losses(anchors, pred, gt, gamma);
      r["focal"] = l.focal;
      r["l1"] = l.l1;
      r["target_mode"] = l.target_mode;
    }
    list.push_back(r);
  }
  return {{{"decoded", list}}, std::to_string(list.size()) + " plan(s) decoded"};
}

struct Scenario {
  std::string id;
  SceneSpec scene;
  PlanTrajectory plan;
};

std::vector<Scenario> load_scenarios(const std::string& path) {
  const json j = load_json_file(path);
  json list = json::array();
  if (j.is_object() && j.contains("scenarios")) {
    list = j.at("scenarios");
  } else {
    list.push_back(j);
  }
  std::vector<Scenario> out;
  for (const auto& s : list) {
    require(s.is_object() && s.contains("id") && s.contains("scene") && s.contains("plan"),
            ErrorCode::kBadScene, path + ": each scenario needs 'id', 'scene' and 'plan'");
    out.push_back({s.at("id").get<std::string>(), scene_from_json(s.at("scene")),
                   plan_from_json(s.at("plan"))});
  }
  return out;
}

Outcome score_pdms(const Options& o, const Config& cfg) {
  const auto paths = manifest_list(o);
  const PdmsConfig pcfg = pdms_config_from(cfg);
  std::vector<Scenario> scenarios;
  for (const auto& p : paths) {
    auto part = load_scenarios(p);
    scenarios.insert(scenarios.end(), part.begin(), part.end());
  }
  auto scores = parallel_map<PdmsBreakdown>(scenarios.size(), [&](std::size_t i) {
    return rollout_checks(scenarios[i].plan, scenarios[i].scene, pcfg);
  });
  std::vector<std::size_t> order(scenarios.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scenarios[a].id < scenarios[b].id; });
  json list = json::array();
  PdmsBreakdown mean{0, 0, 0, 0, 0, 0};
  for (std::size_t i : order) {
    json r = to_json(scores[i]);
    r["id"] = scenarios[i].id;
    list.push_back(r);
    mean.nc += scores[i].nc;
    mean.dac += scores[i].dac;
    mean.ep += scores[i].ep;
    mean.ttc += scores[i].ttc;
    mean.comfort += scores[i].comfort;
    mean.pdms += scores[i].pdms;
  }
  const double n = static_cast<double>(scenarios.size());
  for (double* v : {&mean.nc, &mean.dac, &mean.ep, &mean.ttc, &mean.comfort, &mean.pdms}) *v /= n;
  return {{{"scenarios", list}, {"mean", to_json(mean)}},
          std::to_string(scenarios.size()) + " scenario(s), mean pdms " + fmt(mean.pdms)};
}

// ---------------------------------------------------------------- dispatch

using Handler = Outcome (*)(const Options&, const Config&);

struct Command {
  const char* name;
  const char* help;
  Handler handler;
};

constexpr Command kCommands[] = {
    {"eval-depth", "AbsRel/RMSE after scale-shift alignment per --pred/--gt manifest pair", eval_depth},
    {"eval-traj", "ATE and relative rotation/translation errors per manifest pair", eval_traj},
    {"eval-seg", "PA, mIoU, mDice and FW-IoU per manifest pair", eval_seg},
    {"static-baseline", "score the repeat-last-observed-frame baseline", static_baseline_cmd},
    {"gen-motion-masks", "pseudo ground-truth motion masks from tracks and point maps", gen_motion_masks},
    {"loss-check", "finite-difference check of every loss gradient", loss_check},
    {"cluster-anchors", "k-means anchor trajectories from ground-truth futures", cluster_anchors},
    {"decode-plan", "select the highest-confidence mode of a prediction", decode_plan_cmd},
    {"score-pdms", "rule-based driving score of plans in scenes", score_pdms},
    {"normalize", "rescale point maps and translations to unit mean point norm", normalize_cmd},
};

void write_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int worker_count() {
  if (const char* env = std::getenv("LFG_NUM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometry, loss, evaluation and planning tools for 4D scene forecasts", "lfg"};
  app.require_subcommand(1, 1);
  Options opt;
  const Command* selected = nullptr;
  for (const auto& cmd : kCommands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--manifest", opt.manifests, "input manifest / scenario / trajectory file");
    sub->add_option("--pred", opt.preds, "prediction input (repeatable, pairs with --gt)");
    sub->add_option("--gt", opt.gts, "ground-truth input (repeatable)");
    sub->add_option("--out", opt.out, "write the JSON report here instead of stdout");
    sub->add_option("--out-dir", opt.out_dir, "directory for generated tensors");
    sub->add_option("--config", opt.config, "key=value config file");
    sub->add_option("--set", opt.sets, "config override key=value (repeatable)");
    sub->add_option("--seed", opt.seed, "random seed");
    sub->add_option("--anchors", opt.anchors, "anchor set JSON");
    sub->add_flag("--json", opt.json_only, "suppress the human-readable summary on stderr");
    sub->callback([&selected, &cmd] { selected = &cmd; });
  }

  if (!args.empty() && !args[0].starts_with("-") &&
      std::none_of(std::begin(kCommands), std::end(kCommands),
                   [&](const Command& c) { return args[0] == c.name; })) {
    err << app.help();
    write_error(err, "usage", "unknown subcommand '" + args[0] + "'");
    return kExitUsage;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    write_error(err, "usage", e.what());
    return kExitUsage;
  }
  if (selected == nullptr) {
    err << app.help();
    write_error(err, "usage", "no subcommand given");
    return kExitUsage;
  }

  try {
    const Config cfg = build_config(opt);
    const Outcome r = selected->handler(opt, cfg);
    const std::string text = dump_json(r.result);
    if (opt.out.empty()) {
      out << text;
    } else {
      write_text_atomic(opt.out, text);
    }
    if (!opt.json_only && !r.summary.empty()) err << r.summary << (r.summary.back() == '\n' ? "" : "\n");
    if (r.exit_code != kExitOk) {
      write_error(err, std::string(code_name(ErrorCode::kGradientCheckFailed)),
                  "one or more gradient checks exceeded the tolerance");
    }
    return r.exit_code;
  } catch (const Error& e) {
    write_error(err, std::string(code_name(e.code())), e.what());
    return e.category() == ErrorCategory::kValidation ? kExitValidation : kExitComputation;
  } catch (const fs::filesystem_error& e) {
    write_error(err, std::string(code_name(ErrorCode::kIo)), e.what());
    return kExitValidation;
  } catch (const json::exception& e) {
    write_error(err, std::string(code_name(ErrorCode::kBadManifest)), e.what());
    return kExitValidation;
  }
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace lfg
