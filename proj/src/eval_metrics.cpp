#include "lfg/eval_metrics.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/SVD>

namespace lfg {

namespace {

void check_depth_shapes(const DepthMap& a, const DepthMap& b) {
  require_same_extent(a.height(), a.width(), b.height(), b.width(), "depth maps");
  require(a.depth.same_extent(a.valid) && b.depth.same_extent(b.valid),
          ErrorCode::kShapeMismatch, "depth map and validity mask differ in shape");
}

bool jointly_valid(const DepthMap& a, const DepthMap& b, int y, int x) {
  return a.valid(y, x) && b.valid(y, x);
}

}  // namespace

DepthAlignment align_depth_scale_shift(const DepthMap& pred, const DepthMap& gt) {
  check_depth_shapes(pred, gt);
  std::size_t n = 0;
  double sum_p = 0.0;
  double sum_g = 0.0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!jointly_valid(pred, gt, y, x)) continue;
      const double p = pred.depth(y, x);
      const double g = gt.depth(y, x);
      require(std::isfinite(p) && std::isfinite(g), ErrorCode::kNonFinite,
              "non-finite depth on a valid pixel");
      sum_p += p;
      sum_g += g;
      ++n;
    }
  }
  require(n >= 2, ErrorCode::kDegenerateInput,
          "scale-shift alignment needs at least two jointly valid pixels");
  const double mean_p = sum_p / static_cast<double>(n);
  const double mean_g = sum_g / static_cast<double>(n);

  // Centered normal equations: s = cov(p, g) / var(p), t = mean_g - s mean_p.
  double sxx = 0.0;
  double sxy = 0.0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!jointly_valid(pred, gt, y, x)) continue;
      const double dp = pred.depth(y, x) - mean_p;
      sxx += dp * dp;
      sxy += dp * (gt.depth(y, x) - mean_g);
    }
  }
  const double scale_ref = std::max(1.0, mean_p * mean_p) * static_cast<double>(n);
  require(sxx > 1e-24 * scale_ref, ErrorCode::kSingularSystem,
          "predicted depth is constant over the valid set; scale is unidentifiable");

  DepthAlignment out;
  out.scale = sxy / sxx;
  out.shift = mean_g - out.scale * mean_p;
  out.aligned = pred;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (pred.valid(y, x)) out.aligned.depth(y, x) = out.scale * pred.depth(y, x) + out.shift;
    }
  }
  return out;
}

DepthScores depth_metrics(const DepthMap& aligned, const DepthMap& gt) {
  check_depth_shapes(aligned, gt);
  std::size_t n = 0;
  double abs_rel = 0.0;
  double sq = 0.0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!jointly_valid(aligned, gt, y, x)) continue;
      const double g = gt.depth(y, x);
      const double p = aligned.depth(y, x);
      require(std::isfinite(g) && g > 0.0, ErrorCode::kOutOfDomain,
              "ground-truth depth must be positive and finite on valid pixels");
      require(std::isfinite(p), ErrorCode::kNonFinite, "non-finite predicted depth");
      const double diff = p - g;
      abs_rel += std::abs(diff) / g;
      sq += diff * diff;
      ++n;
    }
  }
  require(n > 0, ErrorCode::kDegenerateInput, "no jointly valid depth pixels");
  const double count = static_cast<double>(n);
  return {abs_rel / count, std::sqrt(sq / count)};
}

Similarity umeyama_align(std::span<const Eigen::Vector3d> pred,
                         std::span<const Eigen::Vector3d> gt, bool with_scale) {
  require(pred.size() == gt.size(), ErrorCode::kShapeMismatch,
          "trajectory lengths differ: " + std::to_string(pred.size()) + " vs " +
              std::to_string(gt.size()));
  require(pred.size() >= 3, ErrorCode::kInvalidArgument,
          "alignment needs at least 3 positions");
  const double n = static_cast<double>(pred.size());

  Eigen::Vector3d mu_p = Eigen::Vector3d::Zero();
  Eigen::Vector3d mu_g = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(pred[i].allFinite() && gt[i].allFinite(), ErrorCode::kNonFinite,
            "non-finite trajectory position");
    mu_p += pred[i];
    mu_g += gt[i];
  }
  mu_p /= n;
  mu_g /= n;

  double var_p = 0.0;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Eigen::Vector3d dp = pred[i] - mu_p;
    const Eigen::Vector3d dg = gt[i] - mu_g;
    var_p += dp.squaredNorm();
    cov += dg * dp.transpose();
  }
  var_p /= n;
  cov /= n;
  require(var_p > 0.0, ErrorCode::kDegenerateInput,
          "predicted positions are all identical; alignment is undefined");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d sign = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sign.z() = -1.0;

  Similarity out;
  out.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  out.scale = with_scale ? svd.singularValues().dot(sign) / var_p : 1.0;
  out.translation = mu_g - out.scale * out.rotation * mu_p;
  return out;
}

TrajScores trajectory_scores(std::span<const Pose> pred, std::span<const Pose> gt,
                             bool with_scale) {
  require(pred.size() == gt.size(), ErrorCode::kShapeMismatch,
          "trajectory lengths differ: " + std::to_string(pred.size()) + " vs " +
              std::to_string(gt.size()));
  require(pred.size() >= 3, ErrorCode::kInvalidArgument, "trajectory scores need >= 3 poses");

  std::vector<Eigen::Vector3d> p_pos;
  std::vector<Eigen::Vector3d> g_pos;
  p_pos.reserve(pred.size());
  g_pos.reserve(gt.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p_pos.push_back(pred[i].translation);
    g_pos.push_back(gt[i].translation);
  }
  const Similarity sim = umeyama_align(p_pos, g_pos, with_scale);

  TrajScores out;
  double sq = 0.0;
  for (std::size_t i = 0; i < p_pos.size(); ++i) {
    sq += (sim.apply(p_pos[i]) - g_pos[i]).squaredNorm();
  }
  out.ate = std::sqrt(sq / static_cast<double>(p_pos.size()));

  const std::size_t pairs = pred.size() - 1;
  double rot_sum = 0.0;
  double trans_sum = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Pose rp = relative_pose(pred[i], pred[i + 1]);
    const Pose rg = relative_pose(gt[i], gt[i + 1]);
    rot_sum += geodesic_rotation_distance(rp.rotation, rg.rotation);
    trans_sum += (sim.scale * rp.translation - rg.translation).norm();
  }
  out.rot = rot_sum / static_cast<double>(pairs) * 180.0 / std::numbers::pi;
  out.trans = trans_sum / static_cast<double>(pairs);
  return out;
}

void ConfusionMatrix::add(const LabelMap& pred, const LabelMap& gt) {
  require_same_extent(pred.height(), pred.width(), gt.height(), gt.width(), "label maps");
  pred.validate();
  gt.validate();
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) ++counts[gt(y, x)][pred(y, x)];
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (int g = 0; g < kNumClasses; ++g) {
    for (int p = 0; p < kNumClasses; ++p) counts[g][p] += other.counts[g][p];
  }
  return *this;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (const auto& row : counts) {
    for (auto v : row) sum += v;
  }
  return sum;
}

SegScores scores_from_confusion(const ConfusionMatrix& cm, AbsentClassPolicy policy) {
  const std::uint64_t total = cm.total();
  require(total > 0, ErrorCode::kDegenerateInput, "segmentation scores need at least one pixel");

  std::array<std::uint64_t, kNumClasses> gt_count{};
  std::array<std::uint64_t, kNumClasses> pred_count{};
  std::uint64_t correct = 0;
  for (int g = 0; g < kNumClasses; ++g) {
    for (int p = 0; p < kNumClasses; ++p) {
      gt_count[g] += cm.counts[g][p];
      pred_count[p] += cm.counts[g][p];
    }
    correct += cm.counts[g][g];
  }

  SegScores out;
  out.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(total);

  double iou_sum = 0.0;
  double dice_sum = 0.0;
  int counted = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const std::uint64_t tp = cm.counts[c][c];
    const std::uint64_t fn = gt_count[c] - tp;
    const std::uint64_t fp = pred_count[c] - tp;
    const std::uint64_t uni = tp + fp + fn;
    double iou = 0.0;
    double dice = 0.0;
    if (uni == 0) {
      if (policy == AbsentClassPolicy::kExclude) continue;
      iou = dice = (policy == AbsentClassPolicy::kCountAsOne) ? 1.0 : 0.0;
    } else {
      iou = static_cast<double>(tp) / static_cast<double>(uni);
      dice = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
      out.fw_iou += static_cast<double>(gt_count[c]) / static_cast<double>(total) * iou;
    }
    iou_sum += iou;
    dice_sum += dice;
    ++counted;
  }
  // counted > 0: total > 0 means at least one class is present.
  out.mean_iou = iou_sum / counted;
  out.mean_dice = dice_sum / counted;
  return out;
}

SegScores seg_scores(const LabelMap& pred, const LabelMap& gt, AbsentClassPolicy policy) {
  ConfusionMatrix cm;
  cm.add(pred, gt);
  return scores_from_confusion(cm, policy);
}

SegScores static_baseline(std::span<const LabelMap> seq_gt, int split_index,
                          AbsentClassPolicy policy) {
  const int n = static_cast<int>(seq_gt.size());
  require(split_index >= 1 && split_index < n, ErrorCode::kOutOfDomain,
          "split index " + std::to_string(split_index) + " outside [1, " + std::to_string(n) +
              ")");
  const LabelMap& held = seq_gt[split_index - 1];
  ConfusionMatrix pooled;
  for (int t = split_index; t < n; ++t) pooled.add(held, seq_gt[t]);
  return scores_from_confusion(pooled, policy);
}

}  // namespace lfg
