// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "votedet/geometry.hpp"

namespace votedet {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double reflectance = 0.0;
};

struct PointCloud {
  std::vector<Point> points;

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Rotates every point by `yaw` radians about the vertical axis through the
/// coordinate origin. Reflectance is untouched.
PointCloud rotate_points(const PointCloud& cloud, double yaw);

/// Same rotation about the vertical axis through an arbitrary pivot.
PointCloud rotate_points_about(const PointCloud& cloud, double yaw, const Vec3f& pivot);

/// Rigid translation of every point.
PointCloud translate_points(const PointCloud& cloud, const Vec3f& offset);

}  // namespace votedet
