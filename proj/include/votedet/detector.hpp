// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "votedet/network.hpp"
#include "votedet/point_cloud.hpp"

namespace votedet {

/// A cell-anchored detection hypothesis in the world (lidar) frame.
struct Detection {
  std::string class_name;
  Vec3f center;  // box center; bottom face at center.z - height/2
  float yaw = 0.0f;
  float score = 0.0f;
  float length = 0.0f;
  float width = 0.0f;
  float height = 0.0f;

  Box3D box() const { return {center, length, width, height, yaw}; }
};

/// Per-axis nearest-rank percentile of ground-truth box dimensions.
/// Throws on an empty label set or a percentile outside (0, 100].
ClassBoxSpec fit_class_box(const std::string& class_name,
                           const std::vector<Box3D>& class_boxes, double percentile = 95.0);

struct DetectOptions {
  float threshold = 1.0f;     // keep cells scoring strictly above this
  int bins = 0;               // 0: use the grid config's angular_bins
  int workers = 1;            // orientation passes run in parallel
  int max_candidates = 512;   // per-frame cap before NMS (highest scores kept)
  int max_output = 128;       // per-frame cap after NMS
  float nms_iou = 0.25f;
  bool collect_stats = false;
};

/// Mean per-layer activation occupancy (over orientation passes) plus the
/// input grid occupancy, for sparsity reporting.
struct DetectStats {
  std::vector<double> mean_layer_occupancy;  // index 0 = input grid
  double score_cells = 0.0;                  // cells above threshold, pre-NMS
};

/// Runs the network over the discretized cloud at each orientation bin angle
/// (the cloud is rotated by the negative angle about the vertical axis
/// through the coordinate origin), collects cells scoring above the
/// threshold, centers the fixed class box on each firing cell, maps centers
/// back to the world frame, and prunes duplicates with 3D NMS.
std::vector<Detection> detect_frame(const Network& net, const ModelMetadata& meta,
                                    const PointCloud& cloud, const DetectOptions& options,
                                    DetectStats* stats = nullptr);

/// Greedy score-descending suppression: a detection is dropped when its 3D
/// box overlaps an already-kept detection of the same class with IoU above
/// the threshold. Output is sorted by descending score.
std::vector<Detection> nms_3d(std::vector<Detection> detections, float iou_threshold = 0.25f);

}  // namespace votedet
