#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "handcloud/geometry.hpp"
#include "handcloud/random.hpp"

namespace handcloud {

using Face = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<Face> faces;
  std::optional<std::vector<ComponentId>> vertex_labels;

  bool has_labels() const { return vertex_labels.has_value(); }

  double face_area(std::size_t f) const {
    const Face& t = faces[f];
    return 0.5 * norm(cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]));
  }

  /// Majority of the three vertex labels; three-way ties go to the lowest component.
  ComponentId face_label(std::size_t f) const {
    const auto& l = *vertex_labels;
    const Face& t = faces[f];
    const ComponentId a = l[t[0]], b = l[t[1]], c = l[t[2]];
    if (a == b || a == c) return a;
    if (b == c) return b;
    return std::min({a, b, c});
  }

  /// Throws on out-of-range indices or mismatched labels; returns a copy with
  /// zero-area faces dropped.
  TriangleMesh validated() const {
    if (vertex_labels && vertex_labels->size() != vertices.size())
      fail_data("mesh label count does not match vertex count");
    for (std::size_t i = 0; i < vertices.size(); ++i)
      if (!is_finite(vertices[i])) fail_data("non-finite mesh vertex " + std::to_string(i));
    TriangleMesh out{vertices, {}, vertex_labels};
    out.faces.reserve(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
      for (std::uint32_t v : faces[f])
        if (v >= vertices.size()) fail_data("face " + std::to_string(f) + " index out of range");
      if (face_area(f) > 0.0) out.faces.push_back(faces[f]);
    }
    return out;
  }

  /// Faces whose label is `c`, sharing the full vertex array.
  TriangleMesh faces_with_label(ComponentId c) const {
    TriangleMesh out{vertices, {}, vertex_labels};
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (face_label(f) == c) out.faces.push_back(faces[f]);
    return out;
  }

  /// True when every undirected edge is shared by exactly two faces.
  bool is_watertight() const {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
    for (const Face& t : faces)
      for (int k = 0; k < 3; ++k) {
        std::uint32_t a = t[k], b = t[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        ++edges[{a, b}];
      }
    for (const auto& [edge, count] : edges)
      if (count != 2) return false;
    return !faces.empty();
  }
};

/// Surface samples together with the face each one was drawn from.
struct SurfaceSamples {
  PointCloud cloud;
  std::vector<std::uint32_t> faces;
};

inline constexpr std::size_t kSurfaceOversampling = 4;

/**
 * Area-weighted surface sampling in two phases: draw 4n candidates by
 * choosing faces proportionally to area and uniform barycentric points,
 * then keep n of them uniformly at random without replacement.
 */
inline SurfaceSamples sample_mesh_surface_with_faces(const TriangleMesh& input, std::size_t n,
                                                     std::uint64_t seed) {
  if (n == 0) fail_usage("sample count must be at least 1");
  const TriangleMesh mesh = input.validated();
  if (mesh.faces.empty()) fail_data("empty mesh");

  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cumulative[f] = total;
  }

  Rng rng(seed);
  const std::size_t candidates = kSurfaceOversampling * n;
  std::vector<Point3> points(candidates);
  std::vector<std::uint32_t> source(candidates);
  for (std::size_t i = 0; i < candidates; ++i) {
    const double r = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    if (it == cumulative.end()) --it;
    const auto f = static_cast<std::size_t>(it - cumulative.begin());
    // uniform point in the triangle via the square-root warp
    const double s = std::sqrt(rng.uniform());
    const double t = rng.uniform();
    const Face& tri = mesh.faces[f];
    const Point3& a = mesh.vertices[tri[0]];
    const Point3& b = mesh.vertices[tri[1]];
    const Point3& c = mesh.vertices[tri[2]];
    points[i] = a * (1.0 - s) + b * (s * (1.0 - t)) + c * (s * t);
    source[i] = static_cast<std::uint32_t>(f);
  }

  auto keep = choose_without_replacement(candidates, n, rng);
  std::sort(keep.begin(), keep.end());

  SurfaceSamples out;
  out.cloud.points.reserve(n);
  out.faces.reserve(n);
  std::vector<ComponentId> labels;
  for (std::size_t k : keep) {
    out.cloud.points.push_back(points[k]);
    out.faces.push_back(source[k]);
    if (mesh.has_labels()) labels.push_back(mesh.face_label(source[k]));
  }
  if (mesh.has_labels()) out.cloud.labels = std::move(labels);
  // face ids refer to the validated mesh; map them back to the caller's faces
  if (mesh.faces.size() != input.faces.size()) {
    std::vector<std::uint32_t> original;
    for (std::size_t f = 0; f < input.faces.size(); ++f)
      if (input.face_area(f) > 0.0) original.push_back(static_cast<std::uint32_t>(f));
    for (auto& f : out.faces) f = original[f];
  }
  return out;
}

inline PointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  return sample_mesh_surface_with_faces(mesh, n, seed).cloud;
}

}  // namespace handcloud
