#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "handcloud/assignment.hpp"
#include "handcloud/geometry.hpp"
#include "handcloud/kdtree.hpp"
#include "handcloud/parallel.hpp"

namespace handcloud {

// ============================================================================
// Chamfer distance
// ============================================================================

namespace detail {

// Sum over `from` of squared distance to the nearest point of `to_index`,
// accumulated in index order.
inline double sum_nearest_squared(const std::vector<Point3>& from, const NearestNeighborIndex& to_index) {
  std::vector<double> mins(from.size());
  parallel_for(from.size(), [&](std::size_t i) { mins[i] = to_index.nearest_squared(from[i]).second; });
  double sum = 0.0;
  for (double m : mins) sum += m;
  return sum;
}

}  // namespace detail

/// Symmetric Chamfer distance with squared Euclidean terms, each side averaged
/// over its own cardinality.
inline double chamfer_distance(const PointCloud& gt, const PointCloud& pred) {
  require_non_empty(gt);
  require_non_empty(pred);
  const NearestNeighborIndex gt_index(gt.points);
  const NearestNeighborIndex pred_index(pred.points);
  const double gt_term = detail::sum_nearest_squared(gt.points, pred_index) / static_cast<double>(gt.size());
  const double pred_term = detail::sum_nearest_squared(pred.points, gt_index) / static_cast<double>(pred.size());
  return gt_term + pred_term;
}

// ============================================================================
// Earth Mover's distance
// ============================================================================

/// cost(i, j) = |pred_i - gt_j|.
inline CostMatrix pairwise_distances(const std::vector<Point3>& pred, const std::vector<Point3>& gt) {
  CostMatrix cost(pred.size(), gt.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j) cost(i, j) = distance(pred[i], gt[j]);
  return cost;
}

/// Minimum over bijections pred -> gt of the summed (unsquared) distances.
/// The assignment maps predicted point i to ground-truth point mapping[i].
inline std::pair<double, Assignment> earth_movers_distance(const PointCloud& gt, const PointCloud& pred,
                                                           AssignmentWarmStart* warm = nullptr) {
  if (gt.size() != pred.size()) fail_data("EMD requires equal cardinality");
  require_non_empty(gt);
  Assignment a = solve_assignment(pairwise_distances(pred.points, gt.points), warm);
  return {a.total_cost, std::move(a)};
}

/// Auction-based approximation; `relative_gap` certifies the distance to the optimum.
inline ApproximateAssignment earth_movers_distance_approx(const PointCloud& gt, const PointCloud& pred,
                                                          double target_relative_gap = 1e-3) {
  if (gt.size() != pred.size()) fail_data("EMD requires equal cardinality");
  require_non_empty(gt);
  return solve_assignment_auction(pairwise_distances(pred.points, gt.points), target_relative_gap);
}

// ============================================================================
// Combined local / global loss
// ============================================================================

struct LossBreakdown {
  std::array<double, kComponentCount> cd_local{};
  std::array<double, kComponentCount> emd_local{};
  double cd_global = 0.0;
  double emd_global = 0.0;
  double total = 0.0;

  /// Sums the terms in a fixed order: locals by component, then the globals.
  double sum_terms() const {
    double s = 0.0;
    for (std::size_t c = 0; c < kComponentCount; ++c) s += cd_local[c] + emd_local[c];
    return s + cd_global + emd_global;
  }
};

enum class LossMode { GlobalOnly, LocalGlobal };

/// Largest cloud for which callers should use the exact solver by default.
inline constexpr std::size_t kMaxExactEmdPoints = 2048;

enum class EmdSolver { Exact, Auction };

inline double emd_value(const PointCloud& gt, const PointCloud& pred, EmdSolver solver) {
  if (solver == EmdSolver::Exact) return earth_movers_distance(gt, pred).first;
  return earth_movers_distance_approx(gt, pred).assignment.total_cost;
}

/// Per-component and global Chamfer + EMD, all weighted equally.
/// Components absent from both clouds contribute zero.
inline LossBreakdown combined_loss(const PointCloud& gt, const PointCloud& pred,
                                   LossMode mode = LossMode::LocalGlobal, EmdSolver solver = EmdSolver::Exact) {
  LossBreakdown out;
  if (mode == LossMode::LocalGlobal) {
    if (!gt.has_labels() || !pred.has_labels()) fail_data("combined loss requires labeled clouds");
    for (ComponentId c : kAllComponents) {
      const auto gi = gt.indices_of(c);
      const auto pi = pred.indices_of(c);
      if (gi.size() != pi.size())
        fail_data("per-component cardinality mismatch for " + std::string(component_name(c)) + ": " +
                  std::to_string(gi.size()) + " vs " + std::to_string(pi.size()));
      if (gi.empty()) continue;
      const PointCloud g = gt.subset(gi);
      const PointCloud p = pred.subset(pi);
      out.cd_local[index_of(c)] = chamfer_distance(g, p);
      out.emd_local[index_of(c)] = emd_value(g, p, solver);
    }
  }
  out.cd_global = chamfer_distance(gt, pred);
  out.emd_global = emd_value(gt, pred, solver);
  out.total = out.sum_terms();
  return out;
}

// ============================================================================
// Pose metrics
// ============================================================================

inline constexpr std::size_t kJointCount = 21;

/// 21 joints: wrist, then four joints (base to tip) for thumb, index, middle, ring, pinky.
using HandPose = std::array<Point3, kJointCount>;

inline std::array<double, kJointCount> joint_errors(const HandPose& pred, const HandPose& gt) {
  std::array<double, kJointCount> e{};
  for (std::size_t j = 0; j < kJointCount; ++j) e[j] = distance(pred[j], gt[j]);
  return e;
}

/// Mean per-joint position error, in the units of the poses.
inline double mpjpe(const HandPose& pred, const HandPose& gt) {
  double sum = 0.0;
  for (double e : joint_errors(pred, gt)) sum += e;
  return sum / static_cast<double>(kJointCount);
}

struct PckCurve {
  std::vector<double> thresholds;
  std::vector<double> values;
};

/// Fraction of errors <= each threshold.
inline PckCurve pck_curve(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) fail_data("PCK requires at least one joint error");
  if (thresholds.empty()) fail_data("PCK requires at least one threshold");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1])) fail_data("PCK thresholds must be strictly ascending");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  PckCurve curve;
  curve.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double t : thresholds) {
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    curve.values.push_back(static_cast<double>(count) / static_cast<double>(sorted.size()));
  }
  return curve;
}

/// Trapezoidal area under the PCK curve divided by the threshold span.
inline double auc(const PckCurve& curve) {
  const auto& t = curve.thresholds;
  const auto& v = curve.values;
  if (t.size() < 2 || v.size() != t.size()) fail_data("AUC requires at least two thresholds");
  double area = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) area += 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
  return area / (t.back() - t.front());
}

// ============================================================================
// 2.5D surface projection
// ============================================================================

struct RasterSize {
  int width = 0;
  int height = 0;
};

/**
 * Keeps the camera-visible part of a world-frame cloud.
 *
 * Points are projected onto a raster (the camera's native grid by default).
 * Inside each occupied cell only points within `depth_tolerance` of the
 * cell's nearest depth survive. Output is in camera coordinates, in input
 * order, labels preserved.
 */
inline PointCloud surface_project(const PointCloud& cloud, const CameraModel& camera,
                                  RasterSize raster = {}, double depth_tolerance = 10.0) {
  camera.validate();
  if (raster.width <= 0 || raster.height <= 0) raster = {camera.width, camera.height};
  const double sx = static_cast<double>(raster.width) / camera.width;
  const double sy = static_cast<double>(raster.height) / camera.height;
  const RigidTransform to_camera = camera.extrinsic.inverse();

  constexpr long kOutside = -1;
  std::vector<Point3> cam(cloud.size());
  std::vector<long> cell(cloud.size(), kOutside);
  std::vector<double> zbuf(static_cast<std::size_t>(raster.width) * raster.height,
                           std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    cam[i] = to_camera.apply(cloud.points[i]);
    if (!(cam[i].z > 0.0)) continue;
    const Point3 uv = camera.project_camera_point(cam[i]);
    const double cu = std::floor(uv.x * sx);
    const double cv = std::floor(uv.y * sy);
    if (cu < 0 || cv < 0 || cu >= raster.width || cv >= raster.height) continue;
    cell[i] = static_cast<long>(cv) * raster.width + static_cast<long>(cu);
    double& z = zbuf[static_cast<std::size_t>(cell[i])];
    z = std::min(z, cam[i].z);
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cell[i] != kOutside && cam[i].z <= zbuf[static_cast<std::size_t>(cell[i])] + depth_tolerance)
      keep.push_back(i);
  if (keep.empty()) fail_data("cloud outside frustum");

  PointCloud out = cloud.subset(keep);
  for (std::size_t k = 0; k < keep.size(); ++k) out.points[k] = cam[keep[k]];
  return out;
}

}  // namespace handcloud
