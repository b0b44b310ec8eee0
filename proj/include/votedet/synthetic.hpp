// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "votedet/frame.hpp"
#include "votedet/voxel_grid.hpp"

namespace votedet {

/// Desk-scale scene generator: solid boxes (the positive class) plus thin
/// pillars, walls, wall pairs, and corner fragments as distractors, on a
/// sparse ground plane. Frames carry an overhead pinhole calibration so that
/// image-plane evaluation coincides with a bird's-eye view of the scene.
struct SyntheticConfig {
  uint64_t seed = 1;
  int num_frames = 100;

  GridConfig grid{0.2f, {-8.0f, -8.0f, -0.4f}, 80, 80, 16, 8};

  std::string class_name = "Box";
  int min_positives = 1;
  int max_positives = 3;
  int min_distractors = 3;
  int max_distractors = 7;

  // Points per square meter.
  double ground_density = 4.0;
  double surface_density = 55.0;
  // Per-object density multiplier drawn from [1 - jitter, 1 + jitter].
  double density_jitter = 0.45;

  float placement_radius = 5.4f;  // keep objects inside every rotated grid

  double image_width = 800.0;
  double image_height = 800.0;
  double camera_height = 40.0;
};

/// Overhead camera calibration consistent with the generator's labels.
Calibration synthetic_calibration(const SyntheticConfig& config);

/// Deterministic frame for (config.seed, index).
Frame generate_synthetic_frame(const SyntheticConfig& config, int index);

std::vector<Frame> generate_synthetic_frames(const SyntheticConfig& config, int first_index,
                                             int count);

/// Writes velodyne/, label_2/, calib/ and an image_size.txt sidecar under
/// `root`, with zero-padded six-digit frame ids starting at `first_index`.
void write_synthetic_dataset(const SyntheticConfig& config, const std::string& root,
                             int first_index = 0);

}  // namespace votedet
