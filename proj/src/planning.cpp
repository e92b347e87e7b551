#include "lfg/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lfg/error.hpp"

namespace lfg {

std::array<double, kNumWaypoints> PlanTrajectory::headings() const {
  std::array<double, kNumWaypoints> h{};
  double previous = 0.0;
  for (int i = 0; i + 1 < kNumWaypoints; ++i) {
    const Eigen::Vector2d d = waypoints[i + 1] - waypoints[i];
    h[i] = d.squaredNorm() > 0.0 ? std::atan2(d.y(), d.x()) : previous;
    previous = h[i];
  }
  h[kNumWaypoints - 1] = h[kNumWaypoints - 2];
  return h;
}

Eigen::Matrix<double, kPlanDims, 1> PlanTrajectory::flatten() const {
  Eigen::Matrix<double, kPlanDims, 1> v;
  for (int i = 0; i < kNumWaypoints; ++i) v.segment<2>(2 * i) = waypoints[i];
  return v;
}

PlanTrajectory PlanTrajectory::unflatten(const Eigen::Matrix<double, kPlanDims, 1>& v) {
  PlanTrajectory p;
  for (int i = 0; i < kNumWaypoints; ++i) p.waypoints[i] = v.segment<2>(2 * i);
  return p;
}

namespace {

using Flat = Eigen::Matrix<double, kPlanDims, 1>;

// Portable draws so identical seeds give identical anchors on every platform.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

int nearest(const Flat& p, const std::vector<Flat>& centroids, double* dist2) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = (p - centroids[c]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

double assign_all(const std::vector<Flat>& points, const std::vector<Flat>& centroids,
                  std::vector<int>& assignment) {
  double objective = 0.0;
  assignment.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d = 0.0;
    assignment[i] = nearest(points[i], centroids, &d);
    objective += d;
  }
  return objective;
}

std::vector<Flat> kmeans_pp_init(const std::vector<Flat>& points, int k, std::mt19937_64& rng) {
  std::vector<Flat> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  centroids.push_back(points[uniform_index(rng, points.size())]);
  std::vector<double> d2(points.size());
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest(points[i], centroids, &d2[i]);
      total += d2[i];
    }
    if (total <= 0.0) {
      centroids.push_back(points[uniform_index(rng, points.size())]);
      continue;
    }
    const double target = uniform01(rng) * total;
    double cum = 0.0;
    std::size_t chosen = points.size();
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      last_positive = i;
      cum += d2[i];
      if (cum > target) {
        chosen = i;
        break;
      }
    }
    if (chosen == points.size()) chosen = last_positive;
    centroids.push_back(points[chosen]);
  }
  return centroids;
}

void check_prediction(const AnchorSet& anchors, const ModePrediction& pred) {
  require(anchors.size() > 0, ErrorCode::kInvalidArgument, "empty anchor set");
  require(pred.modes() == anchors.size(), ErrorCode::kShapeMismatch,
          "prediction has " + std::to_string(pred.modes()) + " modes, anchor set has " +
              std::to_string(anchors.size()));
  require(pred.offsets.size() == pred.confidences.size(), ErrorCode::kShapeMismatch,
          "offset and confidence mode counts differ");
  for (double c : pred.confidences) {
    require(std::isfinite(c), ErrorCode::kNonFinite, "non-finite mode confidence");
  }
}

}  // namespace

double kmeans_objective(std::span<const PlanTrajectory> futures,
                        std::span<const PlanTrajectory> centroids, std::vector<int>* assignment) {
  std::vector<Flat> pts;
  std::vector<Flat> cs;
  for (const auto& f : futures) pts.push_back(f.flatten());
  for (const auto& c : centroids) cs.push_back(c.flatten());
  std::vector<int> a;
  const double obj = assign_all(pts, cs, a);
  if (assignment) *assignment = std::move(a);
  return obj;
}

KMeansResult kmeans_anchors(std::span<const PlanTrajectory> futures, int k, std::uint64_t seed) {
  require(k >= 1, ErrorCode::kInvalidArgument, "k must be at least 1");
  require(static_cast<int>(futures.size()) >= k, ErrorCode::kInvalidArgument,
          "k-means needs at least k=" + std::to_string(k) + " futures, got " +
              std::to_string(futures.size()));
  std::vector<Flat> points;
  points.reserve(futures.size());
  for (const auto& f : futures) {
    points.push_back(f.flatten());
    require(points.back().allFinite(), ErrorCode::kNonFinite, "non-finite future waypoint");
  }

  std::mt19937_64 rng(seed);
  std::vector<Flat> centroids = kmeans_pp_init(points, k, rng);

  KMeansResult result;
  for (const auto& c : centroids) result.initial_centroids.push_back(PlanTrajectory::unflatten(c));

  std::vector<int> assignment;
  result.objective_history.push_back(assign_all(points, centroids, assignment));

  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    std::vector<Flat> sums(static_cast<std::size_t>(k), Flat::Zero());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sums[assignment[i]] += points[i];
      ++counts[assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) centroids[c] = sums[c] / static_cast<double>(counts[c]);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      // Re-seed from the point farthest from its own (updated) centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = (points[i] - centroids[assignment[i]]).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      // Every point already sits on its centroid: duplicates, nothing to split.
      if (far_d <= 0.0) continue;
      centroids[c] = points[far];
      --counts[assignment[far]];
      assignment[far] = c;
      counts[c] = 1;
    }

    std::vector<int> next;
    result.objective_history.push_back(assign_all(points, centroids, next));
    ++result.iterations;
    const bool unchanged = next == assignment;
    assignment = std::move(next);
    if (unchanged) break;
  }

  result.assignment = assignment;
  result.anchors.seed = seed;
  for (const auto& c : centroids) result.anchors.anchors.push_back(PlanTrajectory::unflatten(c));
  return result;
}

DecodedPlan decode_plan(const AnchorSet& anchors, const ModePrediction& pred) {
  check_prediction(anchors, pred);
  int best = 0;
  for (int m = 1; m < pred.modes(); ++m) {
    if (pred.confidences[m] > pred.confidences[best]) best = m;
  }
  DecodedPlan out;
  out.mode = best;
  for (int i = 0; i < kNumWaypoints; ++i) {
    out.plan.waypoints[i] = anchors.anchors[best].waypoints[i] + pred.offsets[best][i];
  }
  return out;
}

int nearest_anchor(const AnchorSet& anchors, const PlanTrajectory& gt) {
  require(anchors.size() > 0, ErrorCode::kInvalidArgument, "empty anchor set");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int m = 0; m < anchors.size(); ++m) {
    double d = 0.0;
    for (int i = 0; i < kNumWaypoints; ++i) {
      d += (anchors.anchors[m].waypoints[i] - gt.waypoints[i]).norm();
    }
    d /= kNumWaypoints;
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return best;
}

PlanningLoss planning_losses(const AnchorSet& anchors, const ModePrediction& pred,
                             const PlanTrajectory& gt, double gamma) {
  check_prediction(anchors, pred);
  require(std::isfinite(gamma) && gamma >= 0.0, ErrorCode::kInvalidArgument,
          "focal gamma must be non-negative");

  PlanningLoss out;
  out.target_mode = nearest_anchor(anchors, gt);
  const int k = pred.modes();
  const int t = out.target_mode;

  const double zmax = *std::max_element(pred.confidences.begin(), pred.confidences.end());
  double denom = 0.0;
  for (double z : pred.confidences) denom += std::exp(z - zmax);
  const double log_denom = std::log(denom);
  std::vector<double> probs(static_cast<std::size_t>(k));
  for (int m = 0; m < k; ++m) probs[m] = std::exp(pred.confidences[m] - zmax - log_denom);
  const double log_pt = pred.confidences[t] - zmax - log_denom;
  const double pt = probs[t];
  const double q = 1.0 - pt;

  out.focal = -std::pow(q, gamma) * log_pt;
  // p * dF/dp, then chain through dp_t/dz_j = p_t (delta_tj - p_j).
  const double mod_term = (gamma > 0.0 && q > 0.0) ? gamma * std::pow(q, gamma - 1.0) * pt * log_pt
                                                   : 0.0;
  const double p_dfdp = mod_term - std::pow(q, gamma);
  out.d_confidences.resize(static_cast<std::size_t>(k));
  for (int m = 0; m < k; ++m) {
    out.d_confidences[m] = p_dfdp * ((m == t ? 1.0 : 0.0) - probs[m]);
  }

  out.d_offsets.assign(static_cast<std::size_t>(k), {});
  for (auto& mode : out.d_offsets) {
    for (auto& v : mode) v.setZero();
  }
  const double inv = 1.0 / kPlanDims;
  double l1 = 0.0;
  for (int i = 0; i < kNumWaypoints; ++i) {
    const Eigen::Vector2d r = anchors.anchors[t].waypoints[i] + pred.offsets[t][i] - gt.waypoints[i];
    for (int a = 0; a < 2; ++a) {
      l1 += std::abs(r[a]);
      out.d_offsets[t][i][a] = r[a] > 0.0 ? inv : (r[a] < 0.0 ? -inv : 0.0);
    }
  }
  out.l1 = l1 * inv;
  return out;
}

}  // namespace lfg
