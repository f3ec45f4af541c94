#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "handcloud/geometry.hpp"

namespace handcloud {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/**
 * Exact k-d tree over a fixed set of points.
 *
 * Splits on the axis of largest extent at the median point; leaves hold at
 * most kLeafSize points. Results are exact, and equal distances are ordered
 * by ascending point index.
 */
class NearestNeighborIndex {
 public:
  static constexpr std::size_t kLeafSize = 16;

  explicit NearestNeighborIndex(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty()) fail_data("empty point cloud");
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (!is_finite(points_[i])) fail_data("non-finite coordinate at point " + std::to_string(i));
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::uint32_t>(i);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, order_.size());
  }

  explicit NearestNeighborIndex(const PointCloud& cloud) : NearestNeighborIndex(cloud.points) {}

  std::size_t size() const { return points_.size(); }
  const std::vector<Point3>& points() const { return points_; }

  /// Closest point; equal distances resolve to the lowest index.
  Neighbor nearest(const Point3& query) const {
    Best best;
    search_one(0, query, best);
    return {best.index, std::sqrt(best.sq)};
  }

  /// Squared distance to the closest point, plus its index.
  std::pair<std::size_t, double> nearest_squared(const Point3& query) const {
    Best best;
    search_one(0, query, best);
    return {best.index, best.sq};
  }

  /// min(k, N) neighbors by ascending (distance, index).
  std::vector<Neighbor> k_nearest(const Point3& query, std::size_t k) const {
    if (k == 0) fail_usage("k must be at least 1");
    k = std::min(k, points_.size());
    Heap heap;
    search_k(0, query, k, heap);
    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
      out[i] = {heap.top().second, std::sqrt(heap.top().first)};
      heap.pop();
    }
    return out;
  }

 private:
  struct Node {
    // leaf: [begin, end) into order_; inner: split axis/value and children
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = 0;
    double split = 0.0;
    bool leaf() const { return left < 0; }
  };

  struct Best {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    double sq = std::numeric_limits<double>::infinity();
    void offer(std::size_t i, double d) {
      if (d < sq || (d == sq && i < index)) {
        sq = d;
        index = i;
      }
    }
  };

  // max-heap on (squared distance, index): the top is the current worst
  using Entry = std::pair<double, std::size_t>;
  using Heap = std::priority_queue<Entry>;

  std::int32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({static_cast<std::uint32_t>(begin), static_cast<std::uint32_t>(end)});
    if (end - begin <= kLeafSize) return id;

    Point3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      const Point3& p = points_[order_[i]];
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], p[a]);
        hi[a] = std::max(hi[a], p[a]);
      }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double pa = points_[a][axis], pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const double split = points_[order_[mid]][axis];
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  // Left subtree holds coordinates <= split, right holds >= split. A subtree
  // is skipped only when its slab is strictly farther than the current bound,
  // so equal-distance points with lower indices are never missed.
  void search_one(std::int32_t id, const Point3& q, Best& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i)
        best.offer(order_[i], squared_distance(q, points_[order_[i]]));
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::int32_t near_child = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far_child = diff <= 0.0 ? node.right : node.left;
    search_one(near_child, q, best);
    if (diff * diff <= best.sq) search_one(far_child, q, best);
  }

  void search_k(std::int32_t id, const Point3& q, std::size_t k, Heap& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const Entry e{squared_distance(q, points_[order_[i]]), order_[i]};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::int32_t near_child = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far_child = diff <= 0.0 ? node.right : node.left;
    search_k(near_child, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.top().first) search_k(far_child, q, k, heap);
  }

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

inline NearestNeighborIndex build_index(const PointCloud& cloud) { return NearestNeighborIndex(cloud); }

inline std::vector<Neighbor> k_nearest(const NearestNeighborIndex& index, const Point3& query,
                                       std::size_t k) {
  return index.k_nearest(query, k);
}

}  // namespace handcloud
