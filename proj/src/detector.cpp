// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "votedet/parallel.hpp"

namespace votedet {

ClassBoxSpec fit_class_box(const std::string& class_name,
                           const std::vector<Box3D>& class_boxes, double percentile) {
  if (class_boxes.empty()) {
    throw std::invalid_argument("fit_class_box: label set must be non-empty");
  }
  if (!(percentile > 0.0) || percentile > 100.0) {
    throw std::invalid_argument("fit_class_box: percentile must be in (0, 100]");
  }
  auto nearest_rank = [&](auto get) {
    std::vector<float> dims;
    dims.reserve(class_boxes.size());
    for (const Box3D& b : class_boxes) dims.push_back(get(b));
    std::sort(dims.begin(), dims.end());
    const size_t rank = static_cast<size_t>(
        std::ceil(percentile / 100.0 * static_cast<double>(dims.size())));
    return dims[std::max<size_t>(rank, 1) - 1];
  };
  ClassBoxSpec spec;
  spec.class_name = class_name;
  spec.length = nearest_rank([](const Box3D& b) { return b.length; });
  spec.width = nearest_rank([](const Box3D& b) { return b.width; });
  spec.height = nearest_rank([](const Box3D& b) { return b.height; });
  spec.validate();
  return spec;
}

std::vector<Detection> nms_3d(std::vector<Detection> detections, float iou_threshold) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  kept.reserve(detections.size());
  for (const Detection& det : detections) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_name != det.class_name) continue;
      if (box_iou_3d(k.box(), det.box()) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(det);
  }
  return kept;
}

std::vector<Detection> detect_frame(const Network& net, const ModelMetadata& meta,
                                    const PointCloud& cloud, const DetectOptions& options,
                                    DetectStats* stats) {
  if (!(options.threshold > 0.0f)) {
    throw std::invalid_argument(
        "detect_frame: threshold must be positive (vote-free cells are only equivalent to "
        "dense scores below zero)");
  }
  const GridConfig& grid = meta.grid;
  grid.validate();
  const int bins = options.bins > 0 ? options.bins : grid.angular_bins;
  const ClassBoxSpec& box = meta.class_box;

  struct BinResult {
    std::vector<Detection> detections;
    std::vector<double> layer_occupancy;
  };
  std::vector<BinResult> per_bin(bins);

  parallel_for_index(static_cast<size_t>(bins), options.workers, [&](size_t b) {
    const float angle = static_cast<float>(M_PI) * static_cast<float>(b) / bins;
    const PointCloud rotated = rotate_points(cloud, -angle);
    const SparseGrid input = discretize(rotated, grid);

    SparseGrid scores;
    if (options.collect_stats) {
      auto acts = net.forward_activations(input);
      for (const SparseGrid& a : acts) {
        per_bin[b].layer_occupancy.push_back(static_cast<double>(a.occupied_count()));
      }
      scores = std::move(acts.back());
      scores.prune_zero_cells();
    } else {
      scores = net.forward(input);
    }

    const float c = std::cos(angle);
    const float s = std::sin(angle);
    auto& dets = per_bin[b].detections;
    const auto keys = scores.keys();
    for (size_t pos = 0; pos < keys.size(); ++pos) {
      const float score = scores.values(pos)[0];
      if (!(score > options.threshold)) continue;
      const CellKey key = keys[pos];
      const Vec3f cell = grid.cell_center(key_l(key), key_m(key), key_n(key));
      Detection det;
      det.class_name = box.class_name;
      // Back to the world frame: the cloud was rotated by -angle, so the
      // firing location rotates by +angle. The box is anchored on the firing
      // cell's center, the same alignment the training crops use.
      det.center = {c * cell.x - s * cell.y, s * cell.x + c * cell.y, cell.z};
      det.yaw = angle;
      det.score = score;
      det.length = box.length;
      det.width = box.width;
      det.height = box.height;
      dets.push_back(det);
    }
  });

  std::vector<Detection> all;
  double score_cells = 0.0;
  for (const BinResult& r : per_bin) {
    all.insert(all.end(), r.detections.begin(), r.detections.end());
    score_cells += static_cast<double>(r.detections.size());
  }
  if (stats) {
    stats->score_cells = score_cells;
    stats->mean_layer_occupancy.clear();
    if (!per_bin.empty() && !per_bin[0].layer_occupancy.empty()) {
      const size_t layers = per_bin[0].layer_occupancy.size();
      stats->mean_layer_occupancy.assign(layers, 0.0);
      for (const BinResult& r : per_bin) {
        for (size_t c = 0; c < layers; ++c) {
          stats->mean_layer_occupancy[c] += r.layer_occupancy[c];
        }
      }
      for (double& v : stats->mean_layer_occupancy) v /= bins;
    }
  }

  if (static_cast<int>(all.size()) > options.max_candidates) {
    std::stable_sort(all.begin(), all.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    all.resize(options.max_candidates);
  }
  std::vector<Detection> kept = nms_3d(std::move(all), options.nms_iou);
  if (static_cast<int>(kept.size()) > options.max_output) kept.resize(options.max_output);
  return kept;
}

}  // namespace votedet
