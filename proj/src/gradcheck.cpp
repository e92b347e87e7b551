#include "lfg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lfg/losses.hpp"
#include "lfg/planning.hpp"

namespace lfg {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53);
  }
  int index(int n) { return static_cast<int>(engine_() % static_cast<std::uint64_t>(n)); }
  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }
  Eigen::Vector3d vec3(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
  Eigen::Matrix3d rotation() {
    Eigen::Vector3d axis;
    do {
      axis = vec3(-1.0, 1.0);
    } while (axis.norm() < 1e-3);
    return axis_angle(axis, uniform(0.0, std::numbers::pi));
  }

 private:
  std::mt19937_64 engine_;
};

using Fn = std::function<double(const std::vector<double>&)>;

struct Accumulator {
  GradCheckResult result;
  void add(const std::vector<double>& analytic, const std::vector<double>& numeric,
           const std::vector<bool>& compare) {
    result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic, numeric, compare));
    result.checked_components += std::count(compare.begin(), compare.end(), true);
    ++result.points;
  }
  void at_target(double v) { result.max_value_at_target = std::max(result.max_value_at_target, std::abs(v)); }
};

GradCheckResult check_seg(Rng& rng, const GradCheckOptions& opt) {
  Accumulator acc;
  acc.result.loss = "seg";
  const int h = 3, w = 3;
  for (int pt = 0; pt < opt.points; ++pt) {
    LabelMap labels(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) labels(y, x) = static_cast<std::uint8_t>(rng.index(kNumClasses));
    std::vector<double> x0(static_cast<std::size_t>(h * w * kNumClasses));
    for (double& v : x0) v = rng.uniform(0.05, 0.95);
    auto build = [&](const std::vector<double>& x) {
      SemanticMap m(h, w, kNumClasses);
      m.data() = x;
      return m;
    };
    const Fn f = [&](const std::vector<double>& x) { return seg_loss(build(x), labels).value; };
    const GridLoss g = seg_loss(build(x0), labels);
    acc.add(g.gradient.data(), central_differences(f, x0, opt.step),
            std::vector<bool>(x0.size(), true));

    SemanticMap onehot(h, w, kNumClasses);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) onehot(y, x, labels(y, x)) = 1.0;
    acc.at_target(seg_loss(onehot, labels).value);
  }
  return acc.result;
}

GridLoss bce_from(const std::vector<double>& x, int h, int w, const Mask& target, const Mask& mask) {
  ScalarMap p(h, w);
  p.data() = x;
  return binary_ce(p, target, mask);
}

GradCheckResult check_bce(Rng& rng, const GradCheckOptions& opt, bool confidence) {
  Accumulator acc;
  acc.result.loss = confidence ? "confidence_bce" : "motion_bce";
  const int h = 4, w = 4;
  for (int pt = 0; pt < opt.points; ++pt) {
    Mask target(h, w);
    Mask mask(h, w, 1, 1);
    if (confidence) {
      // Target derived from a point-error threshold, as in training.
      PointMap pred(h, w), ref(h, w);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          ref.set_point(y, x, rng.vec3(-1.0, 1.0));
          pred.set_point(y, x, ref.point(y, x) + rng.vec3(-0.1, 0.1));
          ref.set_valid(y, x, true);
          pred.set_valid(y, x, rng.bernoulli(0.85) || (x == 0 && y == 0));
        }
      }
      const ConfidenceTarget ct = confidence_target(pred, ref, 0.1);
      target = ct.labels;
      mask = ct.mask;
    } else {
      for (auto& b : target.data()) b = rng.bernoulli(0.5) ? 1 : 0;
    }
    std::vector<double> x0(static_cast<std::size_t>(h * w));
    for (double& v : x0) v = rng.uniform(0.05, 0.95);
    const Fn f = [&](const std::vector<double>& x) {
      return bce_from(x, h, w, target, mask).value;
    };
    const GridLoss g = bce_from(x0, h, w, target, mask);
    acc.add(g.gradient.data(), central_differences(f, x0, opt.step),
            std::vector<bool>(x0.size(), true));

    std::vector<double> exact(x0.size());
    for (std::size_t i = 0; i < exact.size(); ++i) exact[i] = target.data()[i];
    acc.at_target(bce_from(exact, h, w, target, mask).value);
  }
  return acc.result;
}

GradCheckResult check_point(Rng& rng, const GradCheckOptions& opt, double alpha) {
  Accumulator acc;
  acc.result.loss = "point";
  const int h = 3, w = 3;
  for (int pt = 0; pt < opt.points; ++pt) {
    PointMap target(h, w);
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(h * w));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        target.set_point(y, x, rng.vec3(-1.0, 1.0));
        target.set_valid(y, x, rng.bernoulli(0.9) || (x == 0 && y == 0));
      }
    }
    std::vector<double> x0(static_cast<std::size_t>(h * w * 3));
    for (std::size_t i = 0; i < x0.size(); ++i) {
      double r = 0.0;
      do {
        r = rng.uniform(-0.5, 0.5);
      } while (std::abs(r) < opt.kink_margin);
      x0[i] = target.points().data()[i] + r;
    }
    auto build = [&](const std::vector<double>& x) {
      PointMap p = target;
      p.points().data() = x;
      return p;
    };
    const Fn f = [&](const std::vector<double>& x) { return point_loss(build(x), target, alpha).value; };
    const GridLoss g = point_loss(build(x0), target, alpha);
    acc.add(g.gradient.data(), central_differences(f, x0, opt.step),
            std::vector<bool>(x0.size(), true));
    acc.at_target(point_loss(target, target, alpha).value);
  }
  return acc.result;
}

GradCheckResult check_pose(Rng& rng, const GradCheckOptions& opt, double delta,
                           double lambda_trans) {
  Accumulator acc;
  acc.result.loss = "pose";
  const int n = 4;
  for (int pt = 0; pt < opt.points; ++pt) {
    const PairSet pairs = (pt % 2 == 0) ? PairSet::kConsecutive : PairSet::kAllPairs;
    std::vector<Pose> pred(n), target(n);
    bool near_kink = true;
    while (near_kink) {
      for (int i = 0; i < n; ++i) {
        target[i].rotation = rng.rotation();
        target[i].translation = rng.vec3(-2.0, 2.0);
        pred[i].rotation = target[i].rotation * axis_angle(rng.vec3(-1.0, 1.0), rng.uniform(0.05, 0.6));
        pred[i].translation = target[i].translation + rng.vec3(-1.5, 1.5);
      }
      near_kink = false;
      for (const auto& [i, j] : make_pairs(n, pairs)) {
        const Pose rp = relative_pose(pred[i], pred[j]);
        const Pose rt = relative_pose(target[i], target[j]);
        const double theta = geodesic_rotation_distance(rp.rotation, rt.rotation);
        if (theta < opt.kink_margin || theta > std::numbers::pi - opt.kink_margin) near_kink = true;
        const Eigen::Vector3d r = rp.translation - rt.translation;
        for (int k = 0; k < 3; ++k) {
          if (std::abs(std::abs(r[k]) - delta) < opt.kink_margin) near_kink = true;
        }
      }
    }
    // Parameters: per pose [dt (3), phi (3)] around the base poses.
    auto build = [&](const std::vector<double>& x) {
      std::vector<Pose> p = pred;
      for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d dt(x[6 * i], x[6 * i + 1], x[6 * i + 2]);
        const Eigen::Vector3d phi(x[6 * i + 3], x[6 * i + 4], x[6 * i + 5]);
        p[i].translation += dt;
        if (phi.norm() > 0.0) p[i].rotation = p[i].rotation * axis_angle(phi, phi.norm());
      }
      return p;
    };
    const std::vector<double> x0(static_cast<std::size_t>(6 * n), 0.0);
    const Fn f = [&](const std::vector<double>& x) {
      return pose_loss(build(x), target, pairs, delta, lambda_trans).value;
    };
    const PoseLoss g = pose_loss(pred, target, pairs, delta, lambda_trans);
    std::vector<double> analytic(x0.size());
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) {
        analytic[6 * i + k] = g.d_translation[i][k];
        analytic[6 * i + 3 + k] = g.d_rotation[i][k];
      }
    }
    acc.add(analytic, central_differences(f, x0, opt.step), std::vector<bool>(x0.size(), true));
    acc.at_target(pose_loss(target, target, pairs, delta, lambda_trans).value);
  }
  return acc.result;
}

struct PlanningCase {
  AnchorSet anchors;
  ModePrediction pred;
  PlanTrajectory gt;
  double gamma = 2.0;
};

PlanningCase random_planning_case(Rng& rng) {
  PlanningCase c;
  const int k = 5;
  for (int m = 0; m < k; ++m) {
    PlanTrajectory a;
    for (int i = 0; i < kNumWaypoints; ++i) a.waypoints[i] = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
    c.anchors.anchors.push_back(a);
    c.pred.confidences.push_back(rng.uniform(-2.0, 2.0));
    std::array<Eigen::Vector2d, kNumWaypoints> off{};
    for (auto& o : off) o = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    c.pred.offsets.push_back(off);
  }
  for (int i = 0; i < kNumWaypoints; ++i) c.gt.waypoints[i] = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
  c.gamma = rng.uniform(0.0, 3.0);
  return c;
}

GradCheckResult check_focal(Rng& rng, const GradCheckOptions& opt) {
  Accumulator acc;
  acc.result.loss = "planning_focal";
  for (int pt = 0; pt < opt.points; ++pt) {
    PlanningCase c = random_planning_case(rng);
    const std::vector<double> x0 = c.pred.confidences;
    const Fn f = [&](const std::vector<double>& x) {
      ModePrediction p = c.pred;
      p.confidences = x;
      return planning_losses(c.anchors, p, c.gt, c.gamma).focal;
    };
    const PlanningLoss g = planning_losses(c.anchors, c.pred, c.gt, c.gamma);
    acc.add(g.d_confidences, central_differences(f, x0, opt.step),
            std::vector<bool>(x0.size(), true));

    ModePrediction sure = c.pred;
    std::fill(sure.confidences.begin(), sure.confidences.end(), 0.0);
    sure.confidences[g.target_mode] = 60.0;
    acc.at_target(planning_losses(c.anchors, sure, c.gt, c.gamma).focal);
  }
  return acc.result;
}

GradCheckResult check_plan_l1(Rng& rng, const GradCheckOptions& opt) {
  Accumulator acc;
  acc.result.loss = "planning_l1";
  for (int pt = 0; pt < opt.points; ++pt) {
    PlanningCase c = random_planning_case(rng);
    const int t = nearest_anchor(c.anchors, c.gt);
    for (int i = 0; i < kNumWaypoints; ++i) {
      for (int a = 0; a < 2; ++a) {
        const double r = c.anchors.anchors[t].waypoints[i][a] + c.pred.offsets[t][i][a] -
                         c.gt.waypoints[i][a];
        if (std::abs(r) < opt.kink_margin) c.pred.offsets[t][i][a] += 10 * opt.kink_margin;
      }
    }
    const int k = c.pred.modes();
    std::vector<double> x0;
    for (const auto& mode : c.pred.offsets)
      for (const auto& v : mode) x0.insert(x0.end(), {v.x(), v.y()});
    auto build = [&](const std::vector<double>& x) {
      ModePrediction p = c.pred;
      for (int m = 0; m < k; ++m)
        for (int i = 0; i < kNumWaypoints; ++i)
          p.offsets[m][i] = {x[(m * kNumWaypoints + i) * 2], x[(m * kNumWaypoints + i) * 2 + 1]};
      return p;
    };
    const Fn f = [&](const std::vector<double>& x) {
      return planning_losses(c.anchors, build(x), c.gt, c.gamma).l1;
    };
    const PlanningLoss g = planning_losses(c.anchors, c.pred, c.gt, c.gamma);
    std::vector<double> analytic;
    for (const auto& mode : g.d_offsets)
      for (const auto& v : mode) analytic.insert(analytic.end(), {v.x(), v.y()});
    acc.add(analytic, central_differences(f, x0, opt.step), std::vector<bool>(x0.size(), true));

    ModePrediction exact = c.pred;
    for (int i = 0; i < kNumWaypoints; ++i) {
      exact.offsets[t][i] = c.gt.waypoints[i] - c.anchors.anchors[t].waypoints[i];
    }
    acc.at_target(planning_losses(c.anchors, exact, c.gt, c.gamma).l1);
  }
  return acc.result;
}

}  // namespace

std::vector<double> central_differences(const Fn& f, const std::vector<double>& x, double step) {
  std::vector<double> out(x.size());
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                      const std::vector<bool>& compare) {
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (!compare[i]) continue;
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
  return std::sqrt(diff) / denom;
}

std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const LossWeights w;
  std::vector<GradCheckResult> results;
  results.push_back(check_seg(rng, opt));
  results.push_back(check_pose(rng, opt, w.huber_delta, w.lambda_trans));
  results.push_back(check_point(rng, opt, w.alpha));
  results.push_back(check_bce(rng, opt, true));
  results.push_back(check_bce(rng, opt, false));
  results.push_back(check_focal(rng, opt));
  results.push_back(check_plan_l1(rng, opt));
  for (auto& r : results) {
    r.passed = r.max_rel_error < opt.tolerance && r.max_value_at_target <= 1e-6;
  }
  return results;
}

}  // namespace lfg
