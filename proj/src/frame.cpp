// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/frame.hpp"

#include <algorithm>
#include <cctype>

namespace votedet {

namespace {

bool iequals(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::vector<Box3D> class_boxes_of(const Frame& frame, const std::string& class_name) {
  std::vector<Box3D> boxes;
  for (const FrameLabel& label : frame.labels) {
    if (label.is_dont_care() || !iequals(label.type, class_name)) continue;
    boxes.push_back(label_to_velo_box(label, frame.calib));
  }
  return boxes;
}

Frame load_frame(const std::string& root, const std::string& id,
                 const std::string& velodyne_dir, const std::string& label_dir,
                 const std::string& calib_dir) {
  Frame frame;
  frame.id = id;
  frame.cloud = read_velodyne_bin(root + "/" + velodyne_dir + "/" + id + ".bin");
  frame.labels = read_labels(root + "/" + label_dir + "/" + id + ".txt");
  frame.calib = read_calibration(root + "/" + calib_dir + "/" + id + ".txt");
  return frame;
}

}  // namespace votedet
