#pragma once

#include <array>
#include <vector>

#include "handcloud/geometry.hpp"
#include "handcloud/kdtree.hpp"
#include "handcloud/parallel.hpp"
#include "handcloud/random.hpp"

namespace handcloud {

/// Labeled cloud plus its search index. Every component must occur at least once.
class LabeledReference {
 public:
  explicit LabeledReference(PointCloud cloud) : cloud_(std::move(cloud)), index_(checked(cloud_).points) {}

  const PointCloud& cloud() const { return cloud_; }
  const NearestNeighborIndex& index() const { return index_; }

 private:
  static const PointCloud& checked(const PointCloud& c) {
    if (c.empty()) fail_data("empty reference cloud");
    if (!c.has_labels()) fail_data("reference cloud must be labeled");
    const auto counts = c.component_counts();
    for (ComponentId id : kAllComponents)
      if (counts[index_of(id)] == 0)
        fail_data("reference cloud has no " + std::string(component_name(id)) + " points");
    return c;
  }

  PointCloud cloud_;
  NearestNeighborIndex index_;
};

/// Majority vote over the k nearest labels. Among tied labels the one held
/// by the nearest neighbor wins; a reference point at distance zero decides
/// outright.
inline ComponentId vote(const std::vector<Neighbor>& neighbors, const std::vector<ComponentId>& labels) {
  if (neighbors.front().distance == 0.0) return labels[neighbors.front().index];
  std::array<std::size_t, kComponentCount> votes{};
  std::size_t best = 0;
  for (const auto& n : neighbors) best = std::max(best, ++votes[index_of(labels[n.index])]);
  // neighbors are sorted by distance, so the first tied label met is the nearest one
  for (const auto& n : neighbors)
    if (votes[index_of(labels[n.index])] == best) return labels[n.index];
  return labels[neighbors.front().index];
}

/// Labels every query point from its k nearest reference points.
inline PointCloud knn_transfer(const PointCloud& query, const LabeledReference& ref, std::size_t k = 3) {
  if (query.empty()) fail_data("empty query cloud");
  if (k == 0) fail_usage("k must be at least 1");
  std::vector<ComponentId> labels(query.size());
  const auto& ref_labels = *ref.cloud().labels;
  parallel_for(query.size(), [&](std::size_t i) {
    labels[i] = vote(ref.index().k_nearest(query.points[i], k), ref_labels);
  });
  return PointCloud(query.points, std::move(labels));
}

/**
 * Brings every budgeted component to its exact count. Components with a zero
 * budget are dropped. Subsampling is uniform without replacement; when the
 * budget exceeds what is available, every source point is kept once and the
 * remainder is drawn uniformly with replacement.
 */
inline PointCloud resample_components(const PointCloud& cloud, const ComponentBudget& budget,
                                      std::uint64_t seed) {
  if (!cloud.has_labels()) fail_data("resampling requires a labeled cloud");
  std::vector<std::size_t> chosen;
  for (ComponentId c : kAllComponents) {
    const std::size_t want = budget[index_of(c)];
    if (want == 0) continue;
    const auto source = cloud.indices_of(c);
    if (source.empty())
      fail_data("budgeted component " + std::string(component_name(c)) + " has no source points");
    Rng rng(derive_seed(seed, index_of(c)));
    if (want <= source.size()) {
      for (std::size_t k : choose_without_replacement(source.size(), want, rng)) chosen.push_back(source[k]);
    } else {
      for (std::size_t k : choose_without_replacement(source.size(), source.size(), rng))
        chosen.push_back(source[k]);
      for (std::size_t extra = source.size(); extra < want; ++extra) chosen.push_back(source[rng.below(source.size())]);
    }
  }
  return cloud.subset(chosen);
}

}  // namespace handcloud
