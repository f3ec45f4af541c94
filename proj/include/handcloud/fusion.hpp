#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <unordered_map>
#include <vector>

#include "handcloud/geometry.hpp"
#include "handcloud/kdtree.hpp"
#include "handcloud/parallel.hpp"
#include "handcloud/random.hpp"

namespace handcloud {

inline constexpr double kMaxValidDepth = 10000.0;

/// Row-major depth image in millimeters; 0 marks an invalid pixel.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  CameraModel camera;

  DepthMap() = default;
  explicit DepthMap(const CameraModel& cam)
      : width(cam.width), height(cam.height),
        depth(static_cast<std::size_t>(cam.width) * cam.height, 0.0), camera(cam) {}

  double at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  double& at(int u, int v) { return depth[static_cast<std::size_t>(v) * width + u]; }

  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count_if(depth.begin(), depth.end(), [](double d) { return d > 0.0; }));
  }

  void validate() const {
    if (width <= 0 || height <= 0) fail_data("depth map size must be positive");
    if (depth.size() != static_cast<std::size_t>(width) * height)
      fail_data("depth buffer size does not match width x height");
    for (double d : depth)
      if (!(d == 0.0 || (d > 0.0 && d < kMaxValidDepth))) fail_data("depth value out of range");
    camera.validate();
  }
};

struct FusionConfig {
  double near = 200.0;
  double far = 800.0;
  std::size_t outlier_k = 8;
  double outlier_alpha = 2.0;
  double voxel_size = 3.0;
  std::size_t target_points = 1038;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(near > 0.0 && near < far)) fail_data("fusion thresholds need 0 < near < far");
    if (outlier_k < 1) fail_data("outlier_k must be at least 1");
    if (!(voxel_size > 0.0)) fail_data("voxel_size must be positive");
    if (target_points < 1) fail_data("target_points must be at least 1");
  }
};

/// Zeroes every pixel whose depth falls outside [near, far].
inline DepthMap segment_depth(const DepthMap& map, double near, double far) {
  if (!(near < far)) fail_data("segmentation needs near < far");
  DepthMap out = map;
  for (double& d : out.depth)
    if (d < near || d > far) d = 0.0;
  return out;
}

/// Valid pixels through the inverse pinhole model, then into the world frame.
inline PointCloud backproject(const DepthMap& map) {
  map.camera.validate();
  PointCloud out;
  for (int v = 0; v < map.height; ++v)
    for (int u = 0; u < map.width; ++u) {
      const double d = map.at(u, v);
      if (d > 0.0) out.points.push_back(map.camera.extrinsic.apply(map.camera.unproject(u, v, d)));
    }
  if (out.empty()) fail_data("depth map has no valid pixels");
  return out;
}

inline PointCloud merge_views(std::span<const PointCloud> clouds) {
  PointCloud out;
  bool labeled = !clouds.empty();
  for (const auto& c : clouds) labeled = labeled && c.has_labels();
  if (labeled) out.labels.emplace();
  for (const auto& c : clouds) {
    out.points.insert(out.points.end(), c.points.begin(), c.points.end());
    if (labeled) out.labels->insert(out.labels->end(), c.labels->begin(), c.labels->end());
  }
  if (out.empty()) fail_data("all views are empty");
  return out;
}

/// Mean distance to the k nearest other points, per point.
inline std::vector<double> mean_neighbor_distance(const PointCloud& cloud, std::size_t k) {
  const NearestNeighborIndex index(cloud.points);
  std::vector<double> mean(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    const auto nn = index.k_nearest(cloud.points[i], k + 1);
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& n : nn) {
      if (n.index == i || used == k) continue;
      sum += n.distance;
      ++used;
    }
    mean[i] = sum / static_cast<double>(used);
  });
  return mean;
}

/// Statistical filter: drops points whose mean k-NN distance exceeds mu + alpha * sigma.
inline PointCloud remove_outliers(const PointCloud& cloud, std::size_t k, double alpha) {
  if (k < 1) fail_usage("k must be at least 1");
  if (cloud.size() < k + 1) fail_data("outlier removal needs more than k points");
  const auto mean = mean_neighbor_distance(cloud, k);
  double mu = 0.0;
  for (double m : mean) mu += m;
  mu /= static_cast<double>(mean.size());
  double var = 0.0;
  for (double m : mean) var += (m - mu) * (m - mu);
  const double sigma = std::sqrt(var / static_cast<double>(mean.size()));
  const double limit = mu + alpha * sigma;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (mean[i] <= limit) keep.push_back(i);
  return cloud.subset(keep);
}

/**
 * Voxel-centroid pass, then a uniform random subsample if more than `target`
 * points remain. Voxels are emitted in order of first occupancy; a voxel's
 * label is the majority of its points (ties to the lower component).
 */
inline PointCloud balance_density(const PointCloud& cloud, double voxel_size, std::size_t target,
                                  std::uint64_t seed) {
  if (!(voxel_size > 0.0)) fail_usage("voxel size must be positive");
  struct Key {
    std::int64_t x, y, z;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9e3779b97f4a7c15ULL;
      h ^= static_cast<std::uint64_t>(k.y) * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2);
      h ^= static_cast<std::uint64_t>(k.z) * 0x165667b19e3779f9ULL + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };
  struct Cell {
    Point3 sum;
    std::size_t count = 0;
    std::array<std::size_t, kComponentCount> votes{};
  };
  std::unordered_map<Key, std::size_t, KeyHash> slot;
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    const Key key{static_cast<std::int64_t>(std::floor(p.x / voxel_size)),
                  static_cast<std::int64_t>(std::floor(p.y / voxel_size)),
                  static_cast<std::int64_t>(std::floor(p.z / voxel_size))};
    auto [it, inserted] = slot.try_emplace(key, cells.size());
    if (inserted) cells.emplace_back();
    Cell& cell = cells[it->second];
    cell.sum += p;
    ++cell.count;
    if (cloud.has_labels()) ++cell.votes[index_of(cloud.label(i))];
  }
  PointCloud out;
  if (cloud.has_labels()) out.labels.emplace();
  for (const Cell& cell : cells) {
    out.points.push_back(cell.sum / static_cast<double>(cell.count));
    if (cloud.has_labels()) {
      const auto best = std::max_element(cell.votes.begin(), cell.votes.end()) - cell.votes.begin();
      out.labels->push_back(static_cast<ComponentId>(best));
    }
  }
  if (out.size() > target) {
    Rng rng(seed);
    auto keep = choose_without_replacement(out.size(), target, rng);
    std::sort(keep.begin(), keep.end());
    out = out.subset(keep);
  }
  return out;
}

/// segment -> backproject -> merge -> remove_outliers -> balance_density.
inline PointCloud fuse(std::span<const DepthMap> maps, const FusionConfig& config) {
  config.validate();
  if (maps.empty()) fail_data("fusion needs at least one view");
  std::vector<PointCloud> views(maps.size());
  for (std::size_t v = 0; v < maps.size(); ++v) {
    const DepthMap seg = segment_depth(maps[v], config.near, config.far);
    if (seg.valid_count() > 0) views[v] = backproject(seg);
  }
  const PointCloud merged = merge_views(views);
  const PointCloud filtered = remove_outliers(merged, config.outlier_k, config.outlier_alpha);
  return balance_density(filtered, config.voxel_size, config.target_points, config.seed);
}

/// Point-splat z-buffer: each world point lands on its nearest pixel and the
/// closest depth wins. Test and fixture plumbing for the fusion pipeline.
inline DepthMap render_depth(const std::vector<Point3>& world_points, const CameraModel& camera) {
  camera.validate();
  DepthMap map(camera);
  const RigidTransform to_camera = camera.extrinsic.inverse();
  for (const auto& p : world_points) {
    const Point3 pc = to_camera.apply(p);
    if (!(pc.z > 0.0) || pc.z >= kMaxValidDepth) continue;
    const Point3 uv = camera.project_camera_point(pc);
    const long u = std::lround(uv.x);
    const long v = std::lround(uv.y);
    if (u < 0 || v < 0 || u >= camera.width || v >= camera.height) continue;
    double& d = map.at(static_cast<int>(u), static_cast<int>(v));
    if (d == 0.0 || pc.z < d) d = pc.z;
  }
  return map;
}

/// `count` cameras on a ring around the x axis through `center`, each tilted
/// slightly toward +x and looking at `center`. Principal point at the image center.
inline std::vector<CameraModel> ring_rig(const Point3& center, double distance, std::size_t count = 4,
                                         int width = 640, int height = 480, double focal = 600.0) {
  if (count == 0) fail_usage("rig needs at least one camera");
  std::vector<CameraModel> rig;
  for (std::size_t k = 0; k < count; ++k) {
    const double a = std::numbers::pi / 4 + 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
    const Point3 dir = normalized(Point3{0.25, std::cos(a), std::sin(a)});
    CameraModel cam;
    cam.fx = cam.fy = focal;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    cam.width = width;
    cam.height = height;
    cam.extrinsic = RigidTransform::look_at(center + dir * distance, center, {1, 0, 0});
    rig.push_back(cam);
  }
  return rig;
}

}  // namespace handcloud
