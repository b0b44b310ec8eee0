// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace votedet {

struct Vec3f {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;

  Vec3f operator+(const Vec3f& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3f operator-(const Vec3f& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3f operator*(float s) const { return {x * s, y * s, z * s}; }
};

/// Rotates (x, y) by `yaw` radians about the coordinate origin; z unchanged.
inline Vec3f rotate_z(const Vec3f& p, float yaw) {
  const float c = std::cos(yaw);
  const float s = std::sin(yaw);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

/// An oriented cuboid: `center` is the volumetric center, `length` runs along
/// the local x axis (rotated by `yaw` about vertical), `width` along local y,
/// `height` along z. The bottom face sits at center.z - height / 2.
struct Box3D {
  Vec3f center;
  float length = 0.0f;
  float width = 0.0f;
  float height = 0.0f;
  float yaw = 0.0f;

  float z_min() const { return center.z - 0.5f * height; }
  float z_max() const { return center.z + 0.5f * height; }

  /// Ground-plane footprint corners in counter-clockwise order.
  std::array<std::array<double, 2>, 4> footprint() const;

  /// All 8 corners, bottom face first (same ccw order), then top face.
  std::array<Vec3f, 8> corners() const;
};

/// Area of a convex polygon given in ccw order (shoelace).
double polygon_area(const std::vector<std::array<double, 2>>& poly);

/// Convex polygon intersection (Sutherland-Hodgman); both inputs convex ccw.
std::vector<std::array<double, 2>> convex_intersection(
    const std::vector<std::array<double, 2>>& subject,
    const std::vector<std::array<double, 2>>& clip);

/// Exact intersection-over-union of two yaw-aligned cuboids: convex polygon
/// overlap in the ground plane times the z-interval overlap.
double box_iou_3d(const Box3D& a, const Box3D& b);

/// Intersection-over-union of the ground-plane footprints only.
double box_iou_bev(const Box3D& a, const Box3D& b);

}  // namespace votedet
