// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "votedet/kitti.hpp"

namespace votedet {

/// Filter defining which ground-truth boxes count as positives at one
/// difficulty level. Boxes failing the filter are ignored: they are neither
/// positives nor do detections matching them count as false positives.
struct DifficultySpec {
  std::string name;
  double min_height_px = 25.0;
  int max_occlusion = 2;
  double max_truncation = 0.5;
};

inline const DifficultySpec kEasy{"easy", 40.0, 0, 0.15};
inline const DifficultySpec kModerate{"moderate", 25.0, 1, 0.30};
inline const DifficultySpec kHard{"hard", 25.0, 2, 0.50};

/// Benchmark overlap requirement: 0.7 for cars, 0.5 otherwise.
double iou_threshold_for_class(const std::string& class_name);

enum class DetOutcome { kTruePositive, kFalsePositive, kIgnored };

struct FrameMatches {
  /// (score, is_true_positive) for every counted (non-ignored) detection.
  std::vector<std::pair<double, bool>> counted;
  /// Number of non-ignored ground-truth boxes of the class.
  int num_positives = 0;
  /// Per-detection outcomes, aligned with the input order (for inspection).
  std::vector<DetOutcome> outcomes;
  /// Per-(same-class) label: true when some detection matched it.
  std::vector<bool> label_found;
};

/// Greedy score-descending matching of one frame's detections of one class
/// against that frame's labels. Each label matches at most once. Detections
/// whose best overlap is with an ignored label, that fall inside a DontCare
/// region, or that are smaller than the difficulty's height cutoff are
/// ignored rather than penalized.
FrameMatches match_detections(const std::vector<FrameLabel>& detections,
                              const std::vector<FrameLabel>& labels,
                              const std::string& class_name, double iou_threshold,
                              const DifficultySpec& difficulty);

struct PRPoint {
  double score = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

struct APResult {
  /// Absent when the ground truth contains no positives.
  std::optional<double> ap;
  std::vector<PRPoint> curve;
  int num_positives = 0;
};

/// Pools matches across frames, sweeps detections in descending score order,
/// and computes 11-point interpolated average precision (recall levels
/// 0, 0.1, ..., 1.0; interpolated precision is the maximum precision at any
/// recall >= the level).
APResult average_precision(const std::vector<FrameMatches>& frames);

}  // namespace votedet
