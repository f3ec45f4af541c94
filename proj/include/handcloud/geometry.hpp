#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "handcloud/error.hpp"

namespace handcloud {

// ============================================================================
// Points
// ============================================================================

/// A 3D point or vector, millimeters unless the call site says otherwise.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Point3() = default;
  constexpr Point3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  constexpr Point3& operator+=(const Point3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Point3& operator-=(const Point3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Point3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr Point3 operator+(Point3 a, const Point3& b) { return a += b; }
  friend constexpr Point3 operator-(Point3 a, const Point3& b) { return a -= b; }
  friend constexpr Point3 operator-(const Point3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Point3 operator*(Point3 a, double s) { return a *= s; }
  friend constexpr Point3 operator*(double s, Point3 a) { return a *= s; }
  friend constexpr Point3 operator/(const Point3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  friend constexpr bool operator==(const Point3&, const Point3&) = default;
};

constexpr double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Point3 cross(const Point3& a, const Point3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

constexpr double squared_norm(const Point3& a) { return dot(a, a); }
inline double norm(const Point3& a) { return std::sqrt(squared_norm(a)); }

constexpr double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}
inline double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

inline Point3 normalized(const Point3& a) {
  const double n = norm(a);
  return n > 0.0 ? a / n : a;
}

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

// ============================================================================
// Hand components
// ============================================================================

enum class ComponentId : std::uint8_t { Palm = 0, Thumb, Index, Middle, Ring, Pinky };

inline constexpr std::size_t kComponentCount = 6;

inline constexpr std::array<ComponentId, kComponentCount> kAllComponents = {
    ComponentId::Palm, ComponentId::Thumb, ComponentId::Index,
    ComponentId::Middle, ComponentId::Ring, ComponentId::Pinky};

constexpr std::size_t index_of(ComponentId c) { return static_cast<std::size_t>(c); }

constexpr std::string_view component_name(ComponentId c) {
  constexpr std::array<std::string_view, kComponentCount> names = {
      "palm", "thumb", "index", "middle", "ring", "pinky"};
  return names[index_of(c)];
}

inline std::optional<ComponentId> component_from_name(std::string_view name) {
  for (ComponentId c : kAllComponents)
    if (component_name(c) == name) return c;
  return std::nullopt;
}

inline ComponentId component_from_index(unsigned value) {
  if (value >= kComponentCount) fail_data("component label out of range: " + std::to_string(value));
  return static_cast<ComponentId>(value);
}

/// Point count per component, indexed by `index_of(ComponentId)`.
using ComponentBudget = std::array<std::size_t, kComponentCount>;

// ============================================================================
// Point clouds
// ============================================================================

struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::vector<ComponentId>> labels;

  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}
  PointCloud(std::vector<Point3> pts, std::vector<ComponentId> lbl)
      : points(std::move(pts)), labels(std::move(lbl)) {
    if (labels->size() != points.size()) fail_data("label count does not match point count");
  }

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return labels.has_value(); }

  ComponentId label(std::size_t i) const { return (*labels)[i]; }

  /// Indices of points carrying label `c`, ascending.
  std::vector<std::size_t> indices_of(ComponentId c) const {
    std::vector<std::size_t> out;
    if (!labels) return out;
    for (std::size_t i = 0; i < labels->size(); ++i)
      if ((*labels)[i] == c) out.push_back(i);
    return out;
  }

  PointCloud subset(const std::vector<std::size_t>& idx) const {
    PointCloud out;
    out.points.reserve(idx.size());
    for (std::size_t i : idx) out.points.push_back(points[i]);
    if (labels) {
      std::vector<ComponentId> l;
      l.reserve(idx.size());
      for (std::size_t i : idx) l.push_back((*labels)[i]);
      out.labels = std::move(l);
    }
    return out;
  }

  ComponentBudget component_counts() const {
    ComponentBudget counts{};
    if (labels)
      for (ComponentId c : *labels) ++counts[index_of(c)];
    return counts;
  }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

inline void require_finite(const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (!is_finite(cloud.points[i]))
      fail_data("non-finite coordinate at point " + std::to_string(i));
}

inline void require_non_empty(const PointCloud& cloud) {
  if (cloud.empty()) fail_data("empty point cloud");
}

inline Point3 centroid(const std::vector<Point3>& pts) {
  Point3 sum;
  for (const auto& p : pts) sum += p;
  return pts.empty() ? sum : sum / static_cast<double>(pts.size());
}

// ============================================================================
// Rigid transforms
// ============================================================================

/// p -> R p + t, with R a proper rotation stored row-major.
struct RigidTransform {
  std::array<double, 9> rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  Point3 translation;

  static RigidTransform identity() { return {}; }

  static RigidTransform from(const std::array<double, 9>& r, const Point3& t) {
    RigidTransform out{r, t};
    out.validate();
    return out;
  }

  /// Rotation of `angle` radians about unit `axis` (Rodrigues).
  static RigidTransform axis_angle(Point3 axis, double angle, const Point3& t = {}) {
    axis = normalized(axis);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double k = 1.0 - c;
    const double x = axis.x, y = axis.y, z = axis.z;
    return {{c + x * x * k, x * y * k - z * s, x * z * k + y * s,
             y * x * k + z * s, c + y * y * k, y * z * k - x * s,
             z * x * k - y * s, z * y * k + x * s, c + z * z * k},
            t};
  }

  /// Camera-style pose: positioned at `eye`, +z axis toward `target`.
  static RigidTransform look_at(const Point3& eye, const Point3& target, const Point3& up) {
    const Point3 forward = normalized(target - eye);
    Point3 right = normalized(cross(forward, up));
    const Point3 down = cross(forward, right);
    // columns are the camera axes expressed in world coordinates
    return {{right.x, down.x, forward.x, right.y, down.y, forward.y, right.z, down.z, forward.z}, eye};
  }

  Point3 rotate(const Point3& p) const {
    const auto& r = rotation;
    return {r[0] * p.x + r[1] * p.y + r[2] * p.z,
            r[3] * p.x + r[4] * p.y + r[5] * p.z,
            r[6] * p.x + r[7] * p.y + r[8] * p.z};
  }

  Point3 apply(const Point3& p) const { return rotate(p) + translation; }

  RigidTransform inverse() const {
    const auto& r = rotation;
    RigidTransform out;
    out.rotation = {r[0], r[3], r[6], r[1], r[4], r[7], r[2], r[5], r[8]};
    out.translation = -out.rotate(translation);
    return out;
  }

  /// (this * other)(p) = this(other(p)).
  RigidTransform compose(const RigidTransform& other) const {
    RigidTransform out;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += rotation[i * 3 + k] * other.rotation[k * 3 + j];
        out.rotation[i * 3 + j] = s;
      }
    out.translation = apply(other.translation);
    return out;
  }

  void validate(double tol = 1e-9) const {
    for (double v : rotation)
      if (!std::isfinite(v)) fail_data("rotation has non-finite entries");
    if (!is_finite(translation)) fail_data("translation has non-finite entries");
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += rotation[k * 3 + i] * rotation[k * 3 + j];
        if (std::abs(s - (i == j ? 1.0 : 0.0)) > tol) fail_data("rotation is not orthonormal");
      }
    const auto& r = rotation;
    const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
                       r[2] * (r[3] * r[7] - r[4] * r[6]);
    if (std::abs(det - 1.0) > tol) fail_data("rotation determinant is not +1");
  }
};

/// Maps every point through `t`; labels are carried over unchanged.
inline PointCloud transform(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = t.apply(p);
  return out;
}

// ============================================================================
// Cameras
// ============================================================================

/// Pinhole camera. `extrinsic` maps camera coordinates to world coordinates.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  RigidTransform extrinsic;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail_data("camera focal lengths must be positive");
    if (width <= 0 || height <= 0) fail_data("camera image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      fail_data("camera principal point outside the image");
    extrinsic.validate();
  }

  Point3 world_to_camera(const Point3& p) const { return extrinsic.inverse().apply(p); }

  /// Continuous pixel coordinates (u, v) and camera depth of a camera-frame point.
  Point3 project_camera_point(const Point3& pc) const {
    return {fx * pc.x / pc.z + cx, fy * pc.y / pc.z + cy, pc.z};
  }

  /// Camera-frame point for pixel (u, v) at depth d.
  Point3 unproject(double u, double v, double d) const {
    return {(u - cx) * d / fx, (v - cy) * d / fy, d};
  }
};

}  // namespace handcloud
