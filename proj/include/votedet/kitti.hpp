// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "votedet/geometry.hpp"
#include "votedet/point_cloud.hpp"

namespace votedet {

/// 2D image-plane box in pixels; left < right, top < bottom.
struct Box2D {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double width() const { return right - left; }
  double height() const { return bottom - top; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
};

double box2d_iou(const Box2D& a, const Box2D& b);
double box2d_intersection_area(const Box2D& a, const Box2D& b);

/// One ground-truth (or detection) record in the benchmark label format.
/// 3D pose lives in the camera frame: `location` is the bottom-center of the
/// box, `rotation_y` the heading about the camera y axis.
struct FrameLabel {
  std::string type;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  Box2D bbox;
  double height = 0.0;  // meters
  double width = 0.0;
  double length = 0.0;
  double x = 0.0;  // camera frame, meters
  double y = 0.0;
  double z = 0.0;
  double rotation_y = 0.0;
  std::optional<double> score;

  bool is_dont_care() const { return type == "DontCare"; }
};

/// Camera projection parameters. `p2` is the 3x4 projection matrix of the
/// left color camera, `r0` the 3x3 rectification, `tr_velo_to_cam` the 3x4
/// lidar-to-camera transform. Image bounds default to the benchmark's frame
/// size and can be overridden from the sidecar config.
struct Calibration {
  std::array<double, 12> p2{};
  std::array<double, 9> r0{};
  std::array<double, 12> tr_velo_to_cam{};
  double image_width = 1242.0;
  double image_height = 375.0;

  void validate() const;
};

/// Reads little-endian float32 (x, y, z, reflectance) quadruples. Throws on
/// unreadable paths and on files whose length is not a multiple of 16.
PointCloud read_velodyne_bin(const std::string& path);
void write_velodyne_bin(const PointCloud& cloud, const std::string& path);

/// Parses a whitespace-delimited label file (15 fields per line, optional
/// 16th score). DontCare entries are retained. Malformed lines raise an
/// error carrying the line number.
std::vector<FrameLabel> read_labels(const std::string& path);
void write_labels(const std::vector<FrameLabel>& labels, const std::string& path);

/// Parses the key/matrix calibration format; throws naming any missing key.
Calibration read_calibration(const std::string& path);
void write_calibration(const Calibration& calib, const std::string& path);

/// Lidar-frame point to camera frame (rectified) and back.
std::array<double, 3> velo_to_camera(const Calibration& calib, const std::array<double, 3>& p);
std::array<double, 3> camera_to_velo(const Calibration& calib, const std::array<double, 3>& p);

/// Projects a lidar-frame cuboid into the image: the axis-aligned hull of
/// the projected corners, clipped to the image bounds. Returns nothing when
/// every corner is behind the camera or the clipped hull is empty.
std::optional<Box2D> project_to_image(const Box3D& box, const Calibration& calib);

/// Lidar-frame oriented box of a (non-DontCare) label.
Box3D label_to_velo_box(const FrameLabel& label, const Calibration& calib);

/// Converts a lidar-frame box + score into a label record, projecting the
/// 2D bbox through the calibration. Returns nothing when the box leaves the
/// image (such detections are discarded). Truncation and occlusion are
/// emitted as zeros.
std::optional<FrameLabel> detection_to_label(const std::string& class_name, const Box3D& box,
                                             double score, const Calibration& calib);

}  // namespace votedet
