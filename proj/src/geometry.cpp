// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/geometry.hpp"

#include <algorithm>

namespace votedet {

std::array<std::array<double, 2>, 4> Box3D::footprint() const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  // Local corners ccw: (+l,+w), (-l,+w), (-l,-w), (+l,-w).
  const double lx[4] = {hl, -hl, -hl, hl};
  const double ly[4] = {hw, hw, -hw, -hw};
  std::array<std::array<double, 2>, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {center.x + c * lx[i] - s * ly[i], center.y + s * lx[i] + c * ly[i]};
  }
  return out;
}

std::array<Vec3f, 8> Box3D::corners() const {
  const auto fp = footprint();
  std::array<Vec3f, 8> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {static_cast<float>(fp[i][0]), static_cast<float>(fp[i][1]), z_min()};
    out[i + 4] = {static_cast<float>(fp[i][0]), static_cast<float>(fp[i][1]), z_max()};
  }
  return out;
}

double polygon_area(const std::vector<std::array<double, 2>>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    acc += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * std::abs(acc);
}

std::vector<std::array<double, 2>> convex_intersection(
    const std::vector<std::array<double, 2>>& subject,
    const std::vector<std::array<double, 2>>& clip) {
  std::vector<std::array<double, 2>> output = subject;
  for (size_t i = 0; i < clip.size() && !output.empty(); ++i) {
    const auto& a = clip[i];
    const auto& b = clip[(i + 1) % clip.size()];
    // Half-plane to the left of edge a->b (ccw polygon interior).
    auto side = [&](const std::array<double, 2>& p) {
      return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    };
    std::vector<std::array<double, 2>> input;
    input.swap(output);
    for (size_t j = 0; j < input.size(); ++j) {
      const auto& cur = input[j];
      const auto& prev = input[(j + input.size() - 1) % input.size()];
      const double sc = side(cur);
      const double sp = side(prev);
      auto intersect = [&]() {
        const double t = sp / (sp - sc);
        return std::array<double, 2>{prev[0] + t * (cur[0] - prev[0]),
                                     prev[1] + t * (cur[1] - prev[1])};
      };
      if (sc >= 0.0) {
        if (sp < 0.0) output.push_back(intersect());
        output.push_back(cur);
      } else if (sp >= 0.0) {
        output.push_back(intersect());
      }
    }
  }
  return output;
}

static double footprint_overlap(const Box3D& a, const Box3D& b) {
  const auto fa = a.footprint();
  const auto fb = b.footprint();
  const std::vector<std::array<double, 2>> pa(fa.begin(), fa.end());
  const std::vector<std::array<double, 2>> pb(fb.begin(), fb.end());
  return polygon_area(convex_intersection(pa, pb));
}

double box_iou_3d(const Box3D& a, const Box3D& b) {
  const double zi =
      std::max(0.0, static_cast<double>(std::min(a.z_max(), b.z_max())) -
                        std::max(a.z_min(), b.z_min()));
  if (zi <= 0.0) return 0.0;
  const double inter = footprint_overlap(a, b) * zi;
  const double va = static_cast<double>(a.length) * a.width * a.height;
  const double vb = static_cast<double>(b.length) * b.width * b.height;
  const double uni = va + vb - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double box_iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = footprint_overlap(a, b);
  const double aa = static_cast<double>(a.length) * a.width;
  const double ab = static_cast<double>(b.length) * b.width;
  const double uni = aa + ab - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace votedet
