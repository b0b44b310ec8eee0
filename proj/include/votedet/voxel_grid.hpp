// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "votedet/point_cloud.hpp"

namespace votedet {

/// Axis-aligned discretization volume. `origin` is the minimum corner; cell
/// (l, m, n) spans [origin + idx * cell_size, origin + (idx + 1) * cell_size)
/// per axis. `angular_bins` is the number of detector orientations over
/// [0, pi).
struct GridConfig {
  float cell_size = 0.2f;
  Vec3f origin{-40.0f, -40.0f, -3.0f};
  int extent_x = 400;
  int extent_y = 400;
  int extent_z = 32;
  int angular_bins = 8;

  /// Throws std::invalid_argument on non-positive cell size or extents, or
  /// angular_bins < 1.
  void validate() const;

  int64_t volume() const {
    return static_cast<int64_t>(extent_x) * extent_y * extent_z;
  }
  Vec3f cell_center(int l, int m, int n) const {
    return {origin.x + (static_cast<float>(l) + 0.5f) * cell_size,
            origin.y + (static_cast<float>(m) + 0.5f) * cell_size,
            origin.z + (static_cast<float>(n) + 0.5f) * cell_size};
  }
  float cell_bottom_z(int n) const {
    return origin.z + static_cast<float>(n) * cell_size;
  }
  bool in_bounds(int l, int m, int n) const {
    return l >= 0 && l < extent_x && m >= 0 && m < extent_y && n >= 0 && n < extent_z;
  }
};

/// Number of per-cell feature channels produced by discretization:
/// occupancy, mean reflectance, reflectance variance, linearity, planarity,
/// sphericity.
inline constexpr int kPointFeatureChannels = 6;

/// Packed cell index. Each extent must stay below 2^20 cells.
using CellKey = uint64_t;

inline CellKey make_cell_key(int l, int m, int n) {
  return (static_cast<CellKey>(l) << 40) | (static_cast<CellKey>(m) << 20) |
         static_cast<CellKey>(n);
}
inline int key_l(CellKey k) { return static_cast<int>(k >> 40); }
inline int key_m(CellKey k) { return static_cast<int>((k >> 20) & 0xFFFFF); }
inline int key_n(CellKey k) { return static_cast<int>(k & 0xFFFFF); }

namespace detail {

/// Open-addressing map from CellKey to a slot index. Linear probing over a
/// power-of-two table; kEmpty is never a valid packed key (extents < 2^20).
class CellIndex {
 public:
  static constexpr CellKey kEmpty = ~CellKey{0};

  CellIndex() { reset(16); }

  void reset(size_t capacity_hint);
  uint32_t find(CellKey key) const;           // kNotFound if absent
  uint32_t insert(CellKey key, uint32_t slot);  // returns existing slot if present
  size_t size() const { return size_; }

  static constexpr uint32_t kNotFound = ~uint32_t{0};

 private:
  void grow();

  std::vector<CellKey> keys_;
  std::vector<uint32_t> slots_;
  size_t size_ = 0;
  size_t mask_ = 0;
};

}  // namespace detail

/// Sparse map from occupied cell indices to fixed-length feature vectors.
/// Cells are stored in insertion order, which every producer in this library
/// keeps deterministic; iteration order is therefore reproducible.
class SparseGrid {
 public:
  SparseGrid() = default;
  SparseGrid(GridConfig config, int channels);

  const GridConfig& config() const { return config_; }
  int channels() const { return channels_; }
  size_t occupied_count() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

  /// Feature vector of cell (l, m, n), or an empty span if the cell is absent.
  std::span<const float> find(int l, int m, int n) const;
  std::span<const float> find(CellKey key) const;

  /// Returns the (zero-initialized on first use) feature vector for the cell,
  /// creating it if needed. Key must be in bounds.
  std::span<float> find_or_insert(CellKey key);

  /// Inserts a fresh cell with the given features. The cell must not exist.
  void insert(CellKey key, std::span<const float> features);

  std::span<const CellKey> keys() const { return keys_; }
  std::span<const float> values(size_t pos) const {
    return {values_.data() + pos * channels_, static_cast<size_t>(channels_)};
  }
  std::span<float> values_mut(size_t pos) {
    return {values_.data() + pos * channels_, static_cast<size_t>(channels_)};
  }

  /// Drops every cell whose feature vector is entirely zero, preserving the
  /// relative order of the survivors.
  void prune_zero_cells();

  void reserve(size_t cells);

 private:
  GridConfig config_{};
  int channels_ = 0;
  std::vector<CellKey> keys_;
  std::vector<float> values_;
  detail::CellIndex index_;
};

/// Per-cell population statistics of the points that fell into one cell.
/// Layout matches kPointFeatureChannels.
struct CellFeatures {
  float occupancy = 1.0f;
  float mean_reflectance = 0.0f;
  float var_reflectance = 0.0f;
  float linearity = 0.0f;
  float planarity = 0.0f;
  float sphericity = 0.0f;
};

/// Statistics of a non-empty point list: population mean/variance of the
/// clamped-to-[0,1] reflectances plus eigenvalue-ratio shape factors of the
/// 3x3 coordinate scatter matrix. Fewer than 3 points, or a degenerate
/// leading eigenvalue, yields zero shape factors. Throws on empty input.
CellFeatures compute_cell_features(std::span<const Point> cell_points);

/// Bins a point cloud into the grid. Points outside the volume are dropped;
/// each cell containing at least one point stores its CellFeatures. The
/// result is independent of point order.
SparseGrid discretize(const PointCloud& cloud, const GridConfig& config);

}  // namespace votedet
