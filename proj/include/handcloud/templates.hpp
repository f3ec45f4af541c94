#pragma once

#include <cmath>
#include <optional>
#include <string_view>

#include "handcloud/hand.hpp"
#include "handcloud/mesh.hpp"
#include "handcloud/random.hpp"

namespace handcloud {

enum class TemplateKind : std::uint8_t { Grid2D = 0, Hand3D = 1, LocalHand3D = 2 };

constexpr std::string_view template_kind_name(TemplateKind k) {
  switch (k) {
    case TemplateKind::Grid2D: return "grid";
    case TemplateKind::Hand3D: return "hand";
    case TemplateKind::LocalHand3D: return "local";
  }
  return "?";
}

inline std::optional<TemplateKind> template_kind_from_name(std::string_view name) {
  if (name == "grid") return TemplateKind::Grid2D;
  if (name == "hand") return TemplateKind::Hand3D;
  if (name == "local") return TemplateKind::LocalHand3D;
  return std::nullopt;
}

struct Template {
  PointCloud points;  ///< always labeled
  TemplateKind kind = TemplateKind::Grid2D;
  std::optional<ComponentBudget> budget;  ///< LocalHand3D only
};

/// Similarity normalization p -> (p - center) * scale.
struct Normalization {
  Point3 center;
  double scale = 1.0;

  Point3 apply(const Point3& p) const { return (p - center) * scale; }

  PointCloud apply(const PointCloud& cloud) const {
    PointCloud out = cloud;
    for (auto& p : out.points) p = apply(p);
    return out;
  }

  /// Zero centroid and unit maximum radius for `pts`.
  static Normalization fit(const std::vector<Point3>& pts) {
    Normalization n;
    n.center = centroid(pts);
    double max_r = 0.0;
    for (const auto& p : pts) max_r = std::max(max_r, norm(p - n.center));
    n.scale = max_r > 0.0 ? 1.0 / max_r : 1.0;
    return n;
  }
};

/// rows x cols lattice on [-1, 1]^2 at z = 0, x-major, all labeled Palm.
inline Template lattice_template(std::size_t rows, std::size_t cols) {
  if (rows < 2 || cols < 2) fail_usage("lattice needs at least 2 rows and 2 columns");
  Template t;
  t.kind = TemplateKind::Grid2D;
  std::vector<Point3> pts;
  pts.reserve(rows * cols);
  const double sx = 2.0 / static_cast<double>(rows - 1);
  const double sy = 2.0 / static_cast<double>(cols - 1);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      pts.push_back({-1.0 + sx * static_cast<double>(i), -1.0 + sy * static_cast<double>(j), 0.0});
  const std::size_t n = pts.size();
  t.points = PointCloud(std::move(pts), std::vector<ComponentId>(n, ComponentId::Palm));
  return t;
}

/// m x m lattice on [-1, 1]^2 at z = 0; n must be m*m with m >= 2.
inline Template grid_template(std::size_t n) {
  const auto m = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (m < 2 || m * m != n) fail_usage("grid template size must be a perfect square m*m with m >= 2");
  return lattice_template(m, m);
}

/// Most nearly square lattice with exactly n points (rows <= cols).
inline Template near_square_lattice(std::size_t n) {
  auto rows = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (rows >= 2 && n % rows != 0) --rows;
  if (rows < 2) fail_usage("no lattice with at least 2 rows has exactly " + std::to_string(n) + " points");
  return lattice_template(rows, n / rows);
}

/// Outer skin of the hand described by `spec`.
inline TriangleMesh hand_surface_mesh(const SyntheticHandSpec& spec = {}) {
  return visible_shell(build_synthetic_hand(spec));
}

inline Template hand_template(std::size_t n, std::uint64_t seed, const SyntheticHandSpec& spec = {}) {
  if (n < kComponentCount) fail_usage("hand template needs at least 6 points");
  Template t;
  t.kind = TemplateKind::Hand3D;
  const PointCloud raw = sample_mesh_surface(hand_surface_mesh(spec), n, seed);
  t.points = Normalization::fit(raw.points).apply(raw);
  return t;
}

/// Samples each component separately with an exact per-component count.
/// Blocks are laid out in component order.
inline PointCloud sample_components(const TriangleMesh& labeled_mesh, const ComponentBudget& budget,
                                    std::uint64_t seed) {
  PointCloud out;
  out.labels.emplace();
  for (ComponentId c : kAllComponents) {
    const std::size_t count = budget[index_of(c)];
    if (count == 0) continue;
    const TriangleMesh part = labeled_mesh.faces_with_label(c);
    if (part.faces.empty())
      fail_data("component " + std::string(component_name(c)) + " absent from mesh");
    const PointCloud sub = sample_mesh_surface(part, count, derive_seed(seed, index_of(c)));
    out.points.insert(out.points.end(), sub.points.begin(), sub.points.end());
    out.labels->insert(out.labels->end(), sub.labels->begin(), sub.labels->end());
  }
  return out;
}

inline Template local_hand_template(const ComponentBudget& budget, std::uint64_t seed,
                                    const SyntheticHandSpec& spec = {}) {
  for (std::size_t c = 0; c < kComponentCount; ++c)
    if (budget[c] == 0) fail_usage("local template budgets must all be at least 1");
  Template t;
  t.kind = TemplateKind::LocalHand3D;
  t.budget = budget;
  const PointCloud raw = sample_components(hand_surface_mesh(spec), budget, seed);
  t.points = Normalization::fit(raw.points).apply(raw);
  return t;
}

/// A third of the points to the palm, the rest split evenly over the digits;
/// the remainder goes to the palm.
inline ComponentBudget default_budget(std::size_t n) {
  if (n < kComponentCount) fail_usage("budget needs at least 6 points");
  const std::size_t per_digit = std::max<std::size_t>(1, (n - n / 3) / kDigitCount);
  ComponentBudget b{};
  for (std::size_t d = 0; d < kDigitCount; ++d) b[d + 1] = per_digit;
  b[0] = n - per_digit * kDigitCount;
  return b;
}

}  // namespace handcloud
