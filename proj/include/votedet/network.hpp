// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "votedet/sparse_conv.hpp"

namespace votedet {

struct LayerSpec {
  int kernel_x = 1;
  int kernel_y = 1;
  int kernel_z = 1;
  int in_channels = 1;
  int out_channels = 1;
  bool has_relu = true;
};

/// Fixed-size box assumed for a detected class, sized from training labels.
struct ClassBoxSpec {
  std::string class_name;
  float length = 0.0f;  // meters along local x
  float width = 0.0f;   // meters along local y
  float height = 0.0f;  // meters along z

  void validate() const;
};

/// An ordered layer stack. The final layer is linear (no ReLU) with a single
/// output channel producing the detection score.
struct Architecture {
  std::vector<LayerSpec> layers;
  std::string class_name;

  void validate() const;
};

/// Per-axis receptive field of the stacked kernels: 1 + sum(kernel - 1).
std::array<int, 3> receptive_field(const Architecture& arch);

/// Builds one of the benchmark architectures:
///   A: single linear layer whose kernel is the full receptive field.
///   B: 3x3x3 + linear output layer.
///   C: 5x5x5 + linear output layer.
///   D: 3x3x3, 3x3x3 + linear output layer.
///   E: 5x5x5, 3x3x3 + linear output layer.
/// The output kernel takes the smallest odd extents whose total receptive
/// field covers the class box at the given cell size.
Architecture make_architecture(char model, const ClassBoxSpec& box, float cell_size,
                               int input_channels = kPointFeatureChannels,
                               int hidden_filters = 8);

class Network {
 public:
  Network() = default;
  Network(Architecture arch, std::vector<FilterBank> banks);

  const Architecture& architecture() const { return arch_; }
  const std::vector<FilterBank>& banks() const { return banks_; }
  std::vector<FilterBank>& banks() { return banks_; }
  size_t layer_count() const { return banks_.size(); }

  /// Checks layer chaining, final-layer shape, and bias non-positivity.
  void validate() const;

  /// Runs the stack on a sparse grid and returns the single-channel score
  /// grid over vote-receiving cells, pruned of exact zeros.
  SparseGrid forward(const SparseGrid& input) const;

  /// Like forward, but additionally returns every layer input: result[0] is
  /// the network input, result[c] the (post-ReLU) input of layer c, and
  /// result.back() the final score grid.
  std::vector<SparseGrid> forward_activations(const SparseGrid& input) const;

 private:
  Architecture arch_;
  std::vector<FilterBank> banks_;
};

/// He-style initialization: zero-mean Gaussians with variance 2 / fan_in
/// (fan_in = kernel volume times input channels); biases start at zero. The
/// same seed always produces the same network.
Network init_he(const Architecture& arch, uint64_t seed);

/// Everything needed to run a detector end to end.
struct ModelMetadata {
  GridConfig grid;
  ClassBoxSpec class_box;
  float sparsity_penalty = 0.0f;  // L1 activation penalty the model was trained with
  char model_kind = 'D';
};

/// Binary model container: a little-endian magic/version/length prefix, a
/// JSON header describing the architecture and metadata, then the raw
/// float32 parameter payload in layer order (weights, then biases).
void save_model(const Network& net, const ModelMetadata& meta, const std::string& path);

struct LoadedModel {
  Network network;
  ModelMetadata metadata;
};

/// Loads and validates a model file; throws std::runtime_error on version
/// mismatch, truncation, or invariant violations (for example a positive
/// bias edited into the payload).
LoadedModel load_model(const std::string& path);

}  // namespace votedet
