// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "votedet/voxel_grid.hpp"

namespace votedet {

/// One convolutional layer's parameters. Kernel extents are odd
/// (2I+1, 2J+1, 2K+1); weights are indexed by spatial offset in
/// [-I..I] x [-J..J] x [-K..K] and by (input, output) channel, with the
/// output channel fastest. Biases are one per output channel and are kept
/// non-positive so that cells receiving no votes stay exactly zero after the
/// ReLU, preserving sparsity.
class FilterBank {
 public:
  FilterBank() = default;
  FilterBank(int kernel_x, int kernel_y, int kernel_z, int in_channels, int out_channels);

  int kernel_x() const { return kernel_x_; }
  int kernel_y() const { return kernel_y_; }
  int kernel_z() const { return kernel_z_; }
  int half_x() const { return kernel_x_ / 2; }
  int half_y() const { return kernel_y_ / 2; }
  int half_z() const { return kernel_z_ / 2; }
  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }

  size_t weight_count() const { return weights_.size(); }

  /// Weight at spatial offset (i, j, k) in [-I..I] etc.
  float& weight(int i, int j, int k, int f_in, int f_out) {
    return weights_[weight_offset(i, j, k, f_in, f_out)];
  }
  float weight(int i, int j, int k, int f_in, int f_out) const {
    return weights_[weight_offset(i, j, k, f_in, f_out)];
  }
  /// Start of the contiguous [f_in][f_out] block for one spatial offset.
  const float* weight_block(int i, int j, int k) const {
    return weights_.data() + weight_offset(i, j, k, 0, 0);
  }

  std::vector<float>& weights() { return weights_; }
  const std::vector<float>& weights() const { return weights_; }
  std::vector<float>& biases() { return biases_; }
  const std::vector<float>& biases() const { return biases_; }

  /// Clamps every bias to min(bias, 0); called after each optimizer step.
  void clamp_biases();

  /// Throws std::invalid_argument if any bias is positive or shapes are off.
  void validate() const;

  size_t weight_offset(int i, int j, int k, int f_in, int f_out) const {
    const size_t si = static_cast<size_t>(i + half_x());
    const size_t sj = static_cast<size_t>(j + half_y());
    const size_t sk = static_cast<size_t>(k + half_z());
    return (((si * kernel_y_ + sj) * kernel_z_ + sk) * in_channels_ + f_in) * out_channels_ +
           f_out;
  }

 private:
  int kernel_x_ = 1;
  int kernel_y_ = 1;
  int kernel_z_ = 1;
  int in_channels_ = 1;
  int out_channels_ = 1;
  std::vector<float> weights_;
  std::vector<float> biases_;
};

/// Gradient accumulators shaped exactly like their FilterBank.
struct LayerGradients {
  std::vector<float> d_weights;
  std::vector<float> d_biases;

  static LayerGradients zeros_like(const FilterBank& bank);
  void add(const LayerGradients& other);
  void scale(float s);
};

/// Sparse convolution by feature-centric voting: every occupied input cell
/// scatters a weighted copy of the spatially flipped kernel into its
/// neighborhood. Votes landing outside the grid are discarded (zero-padding
/// semantics); the bias is added once to every cell that received at least
/// one vote. Output extents equal input extents.
///
/// `workers` > 1 partitions the occupied cells; each worker accumulates into
/// a private grid and the partial grids are merged in worker order, so the
/// result is bit-identical from run to run for a fixed worker count.
SparseGrid vote_forward(const SparseGrid& input, const FilterBank& filters, int workers = 1);

/// Reference dense convolution over the full volume in double precision,
/// with zero padding and the bias added to every cell. Output is a dense
/// volume-major array [l][m][n][f_out]. Intended for tests on small grids.
std::vector<double> dense_forward(const SparseGrid& input, const FilterBank& filters);

/// Per-channel max(0, x). Cells whose entire vector becomes zero are removed,
/// restoring the sparsity invariant.
SparseGrid relu(const SparseGrid& input);

struct BackwardResult {
  LayerGradients gradients;
  SparseGrid grad_input;
};

/// Backpropagation through the voting layer. `grad_output`'s occupied set
/// must lie within the vote-reachable neighborhood of `input`. Returns
/// weight/bias gradients and the input-feature gradient restricted to the
/// occupied cells of `input`.
BackwardResult backward(const SparseGrid& input, const FilterBank& filters,
                        const SparseGrid& grad_output);

}  // namespace votedet
