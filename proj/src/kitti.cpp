// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/kitti.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace votedet {

double box2d_intersection_area(const Box2D& a, const Box2D& b) {
  const double w = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double h = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double box2d_iou(const Box2D& a, const Box2D& b) {
  const double inter = box2d_intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

void Calibration::validate() const {
  auto all_finite = [](const auto& arr) {
    for (const double v : arr) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  };
  if (!all_finite(p2) || !all_finite(r0) || !all_finite(tr_velo_to_cam)) {
    throw std::invalid_argument("Calibration: matrices must be finite");
  }
  if (image_width <= 0.0 || image_height <= 0.0) {
    throw std::invalid_argument("Calibration: image bounds must be positive");
  }
}

PointCloud read_velodyne_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open velodyne file: " + path);
  const auto bytes = static_cast<size_t>(in.tellg());
  if (bytes % 16 != 0) {
    throw std::runtime_error("velodyne file length is not a multiple of 16 bytes: " + path);
  }
  in.seekg(0);
  std::vector<float> raw(bytes / 4);
  if (bytes > 0) {
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw std::runtime_error("failed reading velodyne file: " + path);
  }
  PointCloud cloud;
  cloud.points.resize(bytes / 16);
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    cloud.points[i] = {raw[4 * i], raw[4 * i + 1], raw[4 * i + 2], raw[4 * i + 3]};
  }
  return cloud;
}

void write_velodyne_bin(const PointCloud& cloud, const std::string& path) {
  std::vector<float> raw;
  raw.reserve(cloud.points.size() * 4);
  for (const Point& p : cloud.points) {
    raw.push_back(static_cast<float>(p.x));
    raw.push_back(static_cast<float>(p.y));
    raw.push_back(static_cast<float>(p.z));
    raw.push_back(static_cast<float>(p.reflectance));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open velodyne file for writing: " + path);
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!out) throw std::runtime_error("failed writing velodyne file: " + path);
}

std::vector<FrameLabel> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label file: " + path);
  std::vector<FrameLabel> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ss(line);
    FrameLabel label;
    double occl = 0.0;
    ss >> label.type >> label.truncation >> occl >> label.alpha >> label.bbox.left >>
        label.bbox.top >> label.bbox.right >> label.bbox.bottom >> label.height >>
        label.width >> label.length >> label.x >> label.y >> label.z >> label.rotation_y;
    if (ss.fail()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed label line");
    }
    label.occlusion = static_cast<int>(occl);
    double score = 0.0;
    if (ss >> score) label.score = score;
    labels.push_back(std::move(label));
  }
  return labels;
}

void write_labels(const std::vector<FrameLabel>& labels, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open label file for writing: " + path);
  char buf[512];
  for (const FrameLabel& l : labels) {
    int n = std::snprintf(buf, sizeof(buf),
                          "%s %.6f %d %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f "
                          "%.6f",
                          l.type.c_str(), l.truncation, l.occlusion, l.alpha, l.bbox.left,
                          l.bbox.top, l.bbox.right, l.bbox.bottom, l.height, l.width, l.length,
                          l.x, l.y, l.z, l.rotation_y);
    out << buf;
    if (l.score) {
      n = std::snprintf(buf, sizeof(buf), " %.6f", *l.score);
      out << buf;
    }
    out << '\n';
    (void)n;
  }
  if (!out) throw std::runtime_error("failed writing label file: " + path);
}

namespace {

std::vector<double> parse_calib_values(const std::string& text, const std::string& key,
                                       size_t expect, const std::string& path) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ":", 0) != 0) continue;
    std::istringstream ss(line.substr(key.size() + 1));
    std::vector<double> values;
    double v = 0.0;
    while (ss >> v) values.push_back(v);
    if (values.size() != expect) {
      throw std::runtime_error(path + ": calibration key " + key + " has " +
                               std::to_string(values.size()) + " values, expected " +
                               std::to_string(expect));
    }
    return values;
  }
  throw std::runtime_error(path + ": missing calibration key " + key);
}

}  // namespace

Calibration read_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open calibration file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  Calibration calib;
  const auto p2 = parse_calib_values(text, "P2", 12, path);
  std::copy(p2.begin(), p2.end(), calib.p2.begin());
  const auto r0 = parse_calib_values(text, "R0_rect", 9, path);
  std::copy(r0.begin(), r0.end(), calib.r0.begin());
  const auto tr = parse_calib_values(text, "Tr_velo_to_cam", 12, path);
  std::copy(tr.begin(), tr.end(), calib.tr_velo_to_cam.begin());
  calib.validate();
  return calib;
}

void write_calibration(const Calibration& calib, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open calibration file for writing: " + path);
  auto emit = [&](const std::string& key, const double* v, size_t n) {
    out << key << ":";
    char buf[64];
    for (size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), " %.12e", v[i]);
      out << buf;
    }
    out << '\n';
  };
  // P0/P1/P3 are emitted identical to P2; only P2 is consumed here.
  emit("P0", calib.p2.data(), 12);
  emit("P1", calib.p2.data(), 12);
  emit("P2", calib.p2.data(), 12);
  emit("P3", calib.p2.data(), 12);
  emit("R0_rect", calib.r0.data(), 9);
  emit("Tr_velo_to_cam", calib.tr_velo_to_cam.data(), 12);
  emit("Tr_imu_to_velo", calib.tr_velo_to_cam.data(), 12);
  if (!out) throw std::runtime_error("failed writing calibration file: " + path);
}

namespace {

Eigen::Matrix4d tr_matrix(const std::array<double, 12>& tr) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = tr[r * 4 + c];
  }
  return m;
}

Eigen::Matrix3d r0_matrix(const Calibration& calib) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = calib.r0[r * 3 + c];
  }
  return m;
}

}  // namespace

std::array<double, 3> velo_to_camera(const Calibration& calib, const std::array<double, 3>& p) {
  const Eigen::Vector4d ph(p[0], p[1], p[2], 1.0);
  const Eigen::Vector4d cam = tr_matrix(calib.tr_velo_to_cam) * ph;
  const Eigen::Vector3d rect = r0_matrix(calib) * cam.head<3>();
  return {rect.x(), rect.y(), rect.z()};
}

std::array<double, 3> camera_to_velo(const Calibration& calib, const std::array<double, 3>& p) {
  const Eigen::Vector3d unrect = r0_matrix(calib).inverse() * Eigen::Vector3d(p[0], p[1], p[2]);
  const Eigen::Vector4d ph(unrect.x(), unrect.y(), unrect.z(), 1.0);
  const Eigen::Vector4d velo = tr_matrix(calib.tr_velo_to_cam).inverse() * ph;
  return {velo.x(), velo.y(), velo.z()};
}

std::optional<Box2D> project_to_image(const Box3D& box, const Calibration& calib) {
  const auto corners = box.corners();
  Box2D hull{1e30, 1e30, -1e30, -1e30};
  int in_front = 0;
  for (const Vec3f& c : corners) {
    const auto cam = velo_to_camera(calib, {c.x, c.y, c.z});
    if (cam[2] <= 1e-6) continue;  // behind the image plane
    ++in_front;
    const double u = (calib.p2[0] * cam[0] + calib.p2[1] * cam[1] + calib.p2[2] * cam[2] +
                      calib.p2[3]) /
                     cam[2];
    const double v = (calib.p2[4] * cam[0] + calib.p2[5] * cam[1] + calib.p2[6] * cam[2] +
                      calib.p2[7]) /
                     cam[2];
    hull.left = std::min(hull.left, u);
    hull.right = std::max(hull.right, u);
    hull.top = std::min(hull.top, v);
    hull.bottom = std::max(hull.bottom, v);
  }
  if (in_front == 0) return std::nullopt;
  hull.left = std::max(hull.left, 0.0);
  hull.top = std::max(hull.top, 0.0);
  hull.right = std::min(hull.right, calib.image_width);
  hull.bottom = std::min(hull.bottom, calib.image_height);
  if (hull.right <= hull.left || hull.bottom <= hull.top) return std::nullopt;
  return hull;
}

Box3D label_to_velo_box(const FrameLabel& label, const Calibration& calib) {
  const auto bottom_center = camera_to_velo(calib, {label.x, label.y, label.z});
  Box3D box;
  box.center = {static_cast<float>(bottom_center[0]), static_cast<float>(bottom_center[1]),
                static_cast<float>(bottom_center[2] + 0.5 * label.height)};
  box.length = static_cast<float>(label.length);
  box.width = static_cast<float>(label.width);
  box.height = static_cast<float>(label.height);
  box.yaw = static_cast<float>(-label.rotation_y - M_PI / 2.0);
  return box;
}

std::optional<FrameLabel> detection_to_label(const std::string& class_name, const Box3D& box,
                                             double score, const Calibration& calib) {
  const auto bbox = project_to_image(box, calib);
  if (!bbox) return std::nullopt;

  FrameLabel label;
  label.type = class_name;
  label.truncation = 0.0;
  label.occlusion = 0;
  label.bbox = *bbox;
  label.height = box.height;
  label.width = box.width;
  label.length = box.length;
  const auto cam = velo_to_camera(calib, {box.center.x, box.center.y, box.z_min()});
  label.x = cam[0];
  label.y = cam[1];
  label.z = cam[2];
  double ry = -static_cast<double>(box.yaw) - M_PI / 2.0;
  while (ry > M_PI) ry -= 2.0 * M_PI;
  while (ry < -M_PI) ry += 2.0 * M_PI;
  label.rotation_y = ry;
  label.alpha = ry - std::atan2(cam[0], cam[2]);
  label.score = score;
  return label;
}

}  // namespace votedet
