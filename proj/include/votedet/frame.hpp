// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "votedet/kitti.hpp"
#include "votedet/point_cloud.hpp"

namespace votedet {

/// One dataset frame: lidar points, ground-truth labels, and the camera
/// calibration used for image-space evaluation.
struct Frame {
  std::string id;
  PointCloud cloud;
  std::vector<FrameLabel> labels;
  Calibration calib;
};

/// Lidar-frame ground-truth boxes of one class (DontCare excluded).
std::vector<Box3D> class_boxes_of(const Frame& frame, const std::string& class_name);

/// Loads `<root>/<velodyne>/<id>.bin`, `<root>/<labels>/<id>.txt`,
/// `<root>/<calib>/<id>.txt`.
Frame load_frame(const std::string& root, const std::string& id,
                 const std::string& velodyne_dir = "velodyne",
                 const std::string& label_dir = "label_2",
                 const std::string& calib_dir = "calib");

}  // namespace votedet
