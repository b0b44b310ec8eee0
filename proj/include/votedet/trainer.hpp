// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "votedet/detector.hpp"
#include "votedet/evaluation.hpp"
#include "votedet/frame.hpp"
#include "votedet/network.hpp"

namespace votedet {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  float learning_rate = 1e-3f;
  float momentum = 0.9f;
  float l2_weight_decay = 1e-4f;
  float l1_sparsity_penalty = 0.0f;
  int mining_period_epochs = 10;
  int mined_per_frame = 10;
  uint64_t seed = 0;

  char model_kind = 'D';
  int hidden_filters = 8;
  float validation_fraction = 0.2f;
  int validation_period_epochs = 1;
  float validation_threshold = 0.1f;  // score cutoff for the validation sweep
  float mining_threshold = 1.0f;
  int workers = 1;

  void validate() const;
};

enum class ExampleSource { kGroundTruth, kRandomNegative, kMinedNegative };

/// A training example: crop-frame points (re-discretized on use, so
/// augmentation stays exact), its binary label, and where it came from.
/// `anchor`/`anchor_yaw` record the world-frame pose the crop was cut at.
struct Example {
  PointCloud points;
  int label = 1;  // +1 or -1
  std::string frame_id;
  ExampleSource source = ExampleSource::kGroundTruth;
  Vec3f anchor;
  float anchor_yaw = 0.0f;
};

struct HingeResult {
  float loss = 0.0f;
  float d_score = 0.0f;
};

/// max(0, 1 - score * label) and its subgradient in the score (0 exactly at
/// the margin). Throws unless label is +1 or -1.
HingeResult hinge_loss(float score, int label);

struct L1PenaltyResult {
  double penalty = 0.0;
  /// One subgradient grid per activation, on the same occupied cells.
  std::vector<SparseGrid> subgradients;
};

/// lambda * sum over activations of (sum |h| over stored cells) normalized
/// by each grid's total spatial volume; subgradients are
/// lambda * sign(h) / volume.
L1PenaltyResult l1_activation_penalty(std::span<const SparseGrid> activations, float lambda);

struct OptimizerState {
  std::vector<LayerGradients> velocity;

  static OptimizerState zeros_like(const Network& net);
};

/// Momentum SGD with L2 decay: v <- momentum * v - lr * (grad + l2 * w);
/// w <- w + v; biases are clamped non-positive afterwards. Returns a
/// diagnostic string (and leaves the network untouched) when a gradient is
/// not finite.
std::optional<std::string> sgd_step(Network& net, OptimizerState& state,
                                    const std::vector<LayerGradients>& gradients,
                                    const TrainConfig& config);

/// Crop grid sized exactly to the architecture's receptive field, centered
/// on the origin so a crop anchor (a box center) maps onto the center cell's
/// center.
GridConfig make_crop_config(const Architecture& arch, float cell_size, int angular_bins);

/// Crop-frame points around a world anchor: rotate by -yaw about the anchor,
/// shift the anchor to the crop frame, and keep everything near the crop
/// volume (with slack for later augmentation jitter).
PointCloud extract_crop(const PointCloud& cloud, const Vec3f& anchor, float yaw,
                        const GridConfig& crop);

/// Applies an explicit jitter transform (rotation about the crop's vertical
/// axis, then translation) to an example's points. Label and provenance are
/// preserved.
Example jitter_example(const Example& example, const Vec3f& translation, float yaw);

/// Random translation within one cell per axis and yaw within one angular
/// bin, re-applied to the source points. The label is preserved.
Example augment(const Example& example, const GridConfig& crop, std::mt19937_64& rng);

/// Per-example objective (hinge at the crop's center cell plus the L1
/// activation penalty) and its full parameter gradient.
struct ObjectiveResult {
  double objective = 0.0;
  double hinge = 0.0;
  double penalty = 0.0;
  float score = 0.0f;
  std::vector<LayerGradients> gradients;
  std::vector<size_t> layer_occupancy;  // occupied cells of each activation
};

ObjectiveResult example_objective(const Network& net, const SparseGrid& crop, int label,
                                  float lambda);

/// Runs detection over full frames and returns the highest-scoring false
/// positives per frame (3D IoU below 0.25 against every same-class
/// ground-truth box) as fresh negative examples.
std::vector<Example> mine_hard_negatives(const Network& net, const ModelMetadata& meta,
                                         std::span<const Frame> frames,
                                         const GridConfig& crop, const TrainConfig& config);

/// Detection + image-space evaluation of a model over frames (moderate
/// difficulty), as used for validation during training.
APResult evaluate_on_frames(const Network& net, const ModelMetadata& meta,
                            std::span<const Frame> frames, float threshold, int workers);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_penalty = 0.0;
  double validation_ap = -1.0;  // -1: not measured this epoch
  std::vector<double> mean_layer_occupancy;
  double wall_seconds = 0.0;
  int pool_size = 0;
  int mined_added = 0;
};

struct FitResult {
  Network best_network;
  Network final_network;
  ModelMetadata metadata;
  std::vector<EpochRecord> log;
  double best_validation_ap = -1.0;
  int best_epoch = -1;
};

/// Full training protocol: positives from ground truth, random non-
/// overlapping negatives (balanced 1:1), per-epoch augmentation of the
/// positives, periodic hard negative mining, momentum SGD over batches, and
/// periodic validation. Returns both the best-validation model and the
/// final-epoch model. Throws when the training split has no positives.
/// A non-null `resume` restarts the schedule from that model's parameters
/// (its architecture, grid, and class box take precedence over the config).
FitResult fit(std::span<const Frame> frames, const GridConfig& grid, const TrainConfig& config,
              const std::string& class_name, const LoadedModel* resume = nullptr);

/// Serializes epoch records as line-delimited JSON.
void write_training_log(const std::vector<EpochRecord>& log, const std::string& path);

}  // namespace votedet
