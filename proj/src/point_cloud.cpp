// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/point_cloud.hpp"

#include <cmath>

namespace votedet {

PointCloud rotate_points(const PointCloud& cloud, double yaw) {
  return rotate_points_about(cloud, yaw, Vec3f{0.0f, 0.0f, 0.0f});
}

PointCloud rotate_points_about(const PointCloud& cloud, double yaw, const Vec3f& pivot) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Point& p : cloud.points) {
    const double dx = p.x - pivot.x;
    const double dy = p.y - pivot.y;
    out.points.push_back(
        {pivot.x + c * dx - s * dy, pivot.y + s * dx + c * dy, p.z, p.reflectance});
  }
  return out;
}

PointCloud translate_points(const PointCloud& cloud, const Vec3f& offset) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Point& p : cloud.points) {
    out.points.push_back({p.x + offset.x, p.y + offset.y, p.z + offset.z, p.reflectance});
  }
  return out;
}

}  // namespace votedet
