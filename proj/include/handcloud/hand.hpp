#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "handcloud/geometry.hpp"
#include "handcloud/mesh.hpp"
#include "handcloud/metrics.hpp"

namespace handcloud {

/// Digits in joint order: thumb, index, middle, ring, pinky.
inline constexpr std::size_t kDigitCount = 5;
inline constexpr std::size_t kPhalanxCount = 3;

using DigitArray = std::array<std::array<double, kPhalanxCount>, kDigitCount>;

/**
 * Procedural hand. Hand frame: +x from wrist toward the fingertips, +y from
 * the thumb side across to the pinky, +z out of the back of the hand.
 * Positive flexion curls a phalanx toward the palm side (-z).
 */
struct SyntheticHandSpec {
  DigitArray bone_lengths = {{{40, 32, 26}, {42, 26, 20}, {46, 29, 22}, {43, 27, 21}, {34, 21, 18}}};
  Point3 palm_radii{45, 42, 14};
  std::array<double, kDigitCount> digit_radii = {10, 8.5, 8.5, 8, 7};
  DigitArray flexion{};

  void validate() const {
    for (const auto& digit : bone_lengths)
      for (double l : digit)
        if (!(l > 0.0) || !std::isfinite(l)) fail_data("bone lengths must be positive");
    if (!(palm_radii.x > 0.0 && palm_radii.y > 0.0 && palm_radii.z > 0.0) || !is_finite(palm_radii))
      fail_data("palm radii must be positive");
    for (double r : digit_radii)
      if (!(r > 0.0) || !std::isfinite(r)) fail_data("digit radii must be positive");
    for (const auto& digit : flexion)
      for (double a : digit)
        if (!(a >= -std::numbers::pi / 2 && a <= std::numbers::pi))
          fail_data("flexion angles must lie in [-pi/2, pi]");
  }
};

inline constexpr ComponentId digit_component(std::size_t digit) {
  return static_cast<ComponentId>(digit + 1);
}

/// Analytic solid: a capsule (segment a-b swept by radius) or an axis-aligned ellipsoid.
struct HandPrimitive {
  enum class Kind { Ellipsoid, Capsule } kind = Kind::Capsule;
  Point3 a;       ///< capsule start, or ellipsoid center
  Point3 b;       ///< capsule end
  Point3 radii;   ///< ellipsoid semi-axes
  double radius = 0.0;
  ComponentId component = ComponentId::Palm;

  /// True when p lies inside the solid by more than `margin`.
  bool contains(const Point3& p, double margin) const {
    if (kind == Kind::Ellipsoid) {
      const Point3 q{(p.x - a.x) / radii.x, (p.y - a.y) / radii.y, (p.z - a.z) / radii.z};
      const double min_r = std::min({radii.x, radii.y, radii.z});
      return (norm(q) - 1.0) * min_r < -margin;
    }
    const Point3 ab = b - a;
    const double t = std::clamp(dot(p - a, ab) / squared_norm(ab), 0.0, 1.0);
    return distance(p, a + ab * t) - radius < -margin;
  }
};

struct SyntheticHand {
  TriangleMesh mesh;
  std::vector<HandPrimitive> primitives;
  std::vector<std::uint32_t> face_primitive;
  HandPose joints{};
};

namespace detail {

inline constexpr int kAngularResolution = 16;

struct DigitLayout {
  Point3 base;
  Point3 direction;
};

inline std::array<DigitLayout, kDigitCount> digit_layout(const SyntheticHandSpec& spec) {
  const Point3& r = spec.palm_radii;
  const double thumb_angle = 50.0 * std::numbers::pi / 180.0;
  std::array<DigitLayout, kDigitCount> out;
  out[0] = {{-0.1 * r.x, -0.75 * r.y, -0.2 * r.z}, {std::cos(thumb_angle), -std::sin(thumb_angle), 0.0}};
  constexpr std::array<double, 4> lateral = {-0.66, -0.22, 0.22, 0.66};
  constexpr std::array<double, 4> splay_deg = {-6.0, -2.0, 2.0, 6.0};
  for (std::size_t f = 0; f < 4; ++f) {
    const double s = splay_deg[f] * std::numbers::pi / 180.0;
    out[f + 1] = {{0.8 * r.x, lateral[f] * r.y, 0.0}, {std::cos(s), std::sin(s), 0.0}};
  }
  return out;
}

// Orthonormal frame (u, v) perpendicular to unit axis e.
inline std::pair<Point3, Point3> perpendicular_frame(const Point3& e) {
  const Point3 helper = std::abs(e.z) < 0.9 ? Point3{0, 0, 1} : Point3{1, 0, 0};
  const Point3 u = normalized(cross(e, helper));
  return {u, cross(e, u)};
}

inline void append_capsule(TriangleMesh& mesh, std::vector<ComponentId>& labels,
                           const Point3& a, const Point3& b, double radius, ComponentId label) {
  constexpr int seg = kAngularResolution;
  constexpr int quarter = kAngularResolution / 4;
  const Point3 e = normalized(b - a);
  const auto [u, v] = perpendicular_frame(e);
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());

  // rings from the pole at a to the pole at b
  std::vector<std::pair<Point3, double>> rings;  // (center offset, ring radius)
  for (int k = 1; k <= quarter; ++k) {
    const double phi = (std::numbers::pi / 2) * k / quarter;
    rings.push_back({a - e * (radius * std::cos(phi)), radius * std::sin(phi)});
  }
  for (int k = quarter; k >= 1; --k) {
    const double phi = (std::numbers::pi / 2) * k / quarter;
    rings.push_back({b + e * (radius * std::cos(phi)), radius * std::sin(phi)});
  }
  mesh.vertices.push_back(a - e * radius);
  for (const auto& [center, r] : rings)
    for (int s = 0; s < seg; ++s) {
      const double theta = 2.0 * std::numbers::pi * s / seg;
      mesh.vertices.push_back(center + u * (r * std::cos(theta)) + v * (r * std::sin(theta)));
    }
  mesh.vertices.push_back(b + e * radius);
  const auto ring_count = static_cast<std::uint32_t>(rings.size());
  const std::uint32_t south = base;
  const std::uint32_t north = base + 1 + ring_count * seg;
  auto at = [&](std::uint32_t ring, int s) { return base + 1 + ring * seg + static_cast<std::uint32_t>(s % seg); };

  for (int s = 0; s < seg; ++s) mesh.faces.push_back({south, at(0, s + 1), at(0, s)});
  for (std::uint32_t r = 0; r + 1 < ring_count; ++r)
    for (int s = 0; s < seg; ++s) {
      mesh.faces.push_back({at(r, s), at(r, s + 1), at(r + 1, s + 1)});
      mesh.faces.push_back({at(r, s), at(r + 1, s + 1), at(r + 1, s)});
    }
  for (int s = 0; s < seg; ++s) mesh.faces.push_back({north, at(ring_count - 1, s), at(ring_count - 1, s + 1)});
  labels.resize(mesh.vertices.size(), label);
}

inline void append_ellipsoid(TriangleMesh& mesh, std::vector<ComponentId>& labels,
                             const Point3& center, const Point3& radii, ComponentId label) {
  constexpr int seg = kAngularResolution;
  constexpr int bands = kAngularResolution / 2;
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(center + Point3{0, 0, -radii.z});
  for (int k = 1; k < bands; ++k) {
    const double polar = std::numbers::pi * k / bands;
    for (int s = 0; s < seg; ++s) {
      const double theta = 2.0 * std::numbers::pi * s / seg;
      mesh.vertices.push_back(center + Point3{radii.x * std::sin(polar) * std::cos(theta),
                                              radii.y * std::sin(polar) * std::sin(theta),
                                              -radii.z * std::cos(polar)});
    }
  }
  mesh.vertices.push_back(center + Point3{0, 0, radii.z});
  const std::uint32_t rings = bands - 1;
  const std::uint32_t south = base;
  const std::uint32_t north = base + 1 + rings * seg;
  auto at = [&](std::uint32_t ring, int s) { return base + 1 + ring * seg + static_cast<std::uint32_t>(s % seg); };
  for (int s = 0; s < seg; ++s) mesh.faces.push_back({south, at(0, s + 1), at(0, s)});
  for (std::uint32_t r = 0; r + 1 < rings; ++r)
    for (int s = 0; s < seg; ++s) {
      mesh.faces.push_back({at(r, s), at(r, s + 1), at(r + 1, s + 1)});
      mesh.faces.push_back({at(r, s), at(r + 1, s + 1), at(r + 1, s)});
    }
  for (int s = 0; s < seg; ++s) mesh.faces.push_back({north, at(rings - 1, s), at(rings - 1, s + 1)});
  labels.resize(mesh.vertices.size(), label);
}

}  // namespace detail

/// Palm ellipsoid plus a capsule per phalanx, with joint positions from the
/// same forward kinematics. Every primitive is a closed mesh of its own.
inline SyntheticHand build_synthetic_hand(const SyntheticHandSpec& spec) {
  spec.validate();
  SyntheticHand hand;
  std::vector<ComponentId> labels;
  const auto layout = detail::digit_layout(spec);

  auto add = [&](const HandPrimitive& prim) {
    if (prim.kind == HandPrimitive::Kind::Ellipsoid)
      detail::append_ellipsoid(hand.mesh, labels, prim.a, prim.radii, prim.component);
    else
      detail::append_capsule(hand.mesh, labels, prim.a, prim.b, prim.radius, prim.component);
    hand.face_primitive.resize(hand.mesh.faces.size(), static_cast<std::uint32_t>(hand.primitives.size()));
    hand.primitives.push_back(prim);
  };

  HandPrimitive palm;
  palm.kind = HandPrimitive::Kind::Ellipsoid;
  palm.a = {0, 0, 0};
  palm.radii = spec.palm_radii;
  palm.component = ComponentId::Palm;
  add(palm);

  hand.joints[0] = {-spec.palm_radii.x, 0.0, 0.0};
  const Point3 palm_side{0, 0, -1};
  for (std::size_t d = 0; d < kDigitCount; ++d) {
    const Point3 dir0 = layout[d].direction;
    const Point3 axis = normalized(cross(dir0, palm_side));
    Point3 joint = layout[d].base;
    hand.joints[1 + 4 * d] = joint;
    double angle = 0.0;
    for (std::size_t p = 0; p < kPhalanxCount; ++p) {
      angle += spec.flexion[d][p];
      const Point3 dir = RigidTransform::axis_angle(axis, angle).rotate(dir0);
      const Point3 next = joint + dir * spec.bone_lengths[d][p];
      HandPrimitive bone;
      bone.kind = HandPrimitive::Kind::Capsule;
      bone.a = joint;
      bone.b = next;
      bone.radius = spec.digit_radii[d];
      bone.component = digit_component(d);
      add(bone);
      joint = next;
      hand.joints[1 + 4 * d + p + 1] = joint;
    }
  }
  hand.mesh.vertex_labels = std::move(labels);
  return hand;
}

inline TriangleMesh synthetic_hand_mesh(const SyntheticHandSpec& spec) {
  return build_synthetic_hand(spec).mesh;
}

/// Drops faces whose centroid is buried inside another primitive, leaving
/// the outer skin of the union (no longer watertight).
inline TriangleMesh visible_shell(const SyntheticHand& hand, double margin = 0.5) {
  TriangleMesh out{hand.mesh.vertices, {}, hand.mesh.vertex_labels};
  for (std::size_t f = 0; f < hand.mesh.faces.size(); ++f) {
    const Face& t = hand.mesh.faces[f];
    const Point3 c = (hand.mesh.vertices[t[0]] + hand.mesh.vertices[t[1]] + hand.mesh.vertices[t[2]]) / 3.0;
    bool buried = false;
    for (std::size_t p = 0; p < hand.primitives.size() && !buried; ++p)
      buried = p != hand.face_primitive[f] && hand.primitives[p].contains(c, margin);
    if (!buried) out.faces.push_back(t);
  }
  return out;
}

}  // namespace handcloud
