// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/voxel_grid.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace votedet {

void GridConfig::validate() const {
  if (!(cell_size > 0.0f) || !std::isfinite(cell_size)) {
    throw std::invalid_argument("GridConfig: cell_size must be positive and finite");
  }
  if (extent_x < 1 || extent_y < 1 || extent_z < 1) {
    throw std::invalid_argument("GridConfig: extents must all be >= 1");
  }
  if (extent_x >= (1 << 20) || extent_y >= (1 << 20) || extent_z >= (1 << 20)) {
    throw std::invalid_argument("GridConfig: extents exceed the supported 2^20 cells per axis");
  }
  if (angular_bins < 1) {
    throw std::invalid_argument("GridConfig: angular_bins must be >= 1");
  }
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y) || !std::isfinite(origin.z)) {
    throw std::invalid_argument("GridConfig: origin must be finite");
  }
}

namespace detail {

// splitmix64 finalizer; cheap and well-distributed for packed indices.
static inline uint64_t hash_key(CellKey k) {
  uint64_t x = k + 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void CellIndex::reset(size_t capacity_hint) {
  size_t buckets = 16;
  while (buckets < capacity_hint * 2) buckets <<= 1;
  keys_.assign(buckets, kEmpty);
  slots_.assign(buckets, 0);
  size_ = 0;
  mask_ = buckets - 1;
}

uint32_t CellIndex::find(CellKey key) const {
  size_t pos = hash_key(key) & mask_;
  while (true) {
    const CellKey k = keys_[pos];
    if (k == key) return slots_[pos];
    if (k == kEmpty) return kNotFound;
    pos = (pos + 1) & mask_;
  }
}

uint32_t CellIndex::insert(CellKey key, uint32_t slot) {
  if ((size_ + 1) * 10 >= (mask_ + 1) * 7) grow();
  size_t pos = hash_key(key) & mask_;
  while (true) {
    const CellKey k = keys_[pos];
    if (k == key) return slots_[pos];
    if (k == kEmpty) {
      keys_[pos] = key;
      slots_[pos] = slot;
      ++size_;
      return slot;
    }
    pos = (pos + 1) & mask_;
  }
}

void CellIndex::grow() {
  std::vector<CellKey> old_keys = std::move(keys_);
  std::vector<uint32_t> old_slots = std::move(slots_);
  const size_t buckets = (mask_ + 1) * 2;
  keys_.assign(buckets, kEmpty);
  slots_.assign(buckets, 0);
  mask_ = buckets - 1;
  for (size_t i = 0; i < old_keys.size(); ++i) {
    if (old_keys[i] == kEmpty) continue;
    size_t pos = hash_key(old_keys[i]) & mask_;
    while (keys_[pos] != kEmpty) pos = (pos + 1) & mask_;
    keys_[pos] = old_keys[i];
    slots_[pos] = old_slots[i];
  }
}

}  // namespace detail

SparseGrid::SparseGrid(GridConfig config, int channels)
    : config_(config), channels_(channels) {
  config_.validate();
  if (channels_ < 1) throw std::invalid_argument("SparseGrid: channels must be >= 1");
}

std::span<const float> SparseGrid::find(int l, int m, int n) const {
  if (!config_.in_bounds(l, m, n)) return {};
  return find(make_cell_key(l, m, n));
}

std::span<const float> SparseGrid::find(CellKey key) const {
  const uint32_t slot = index_.find(key);
  if (slot == detail::CellIndex::kNotFound) return {};
  return values(slot);
}

std::span<float> SparseGrid::find_or_insert(CellKey key) {
  const uint32_t slot = index_.insert(key, static_cast<uint32_t>(keys_.size()));
  if (slot == keys_.size()) {
    keys_.push_back(key);
    values_.resize(values_.size() + channels_, 0.0f);
  }
  return values_mut(slot);
}

void SparseGrid::insert(CellKey key, std::span<const float> features) {
  if (static_cast<int>(features.size()) != channels_) {
    throw std::invalid_argument("SparseGrid::insert: channel count mismatch");
  }
  auto dst = find_or_insert(key);
  std::copy(features.begin(), features.end(), dst.begin());
}

void SparseGrid::prune_zero_cells() {
  size_t write = 0;
  for (size_t read = 0; read < keys_.size(); ++read) {
    const float* v = values_.data() + read * channels_;
    bool all_zero = true;
    for (int c = 0; c < channels_; ++c) {
      if (v[c] != 0.0f) {
        all_zero = false;
        break;
      }
    }
    if (all_zero) continue;
    if (write != read) {
      keys_[write] = keys_[read];
      std::copy(v, v + channels_, values_.begin() + write * channels_);
    }
    ++write;
  }
  keys_.resize(write);
  values_.resize(write * channels_);
  index_.reset(keys_.size());
  for (size_t i = 0; i < keys_.size(); ++i) {
    index_.insert(keys_[i], static_cast<uint32_t>(i));
  }
}

void SparseGrid::reserve(size_t cells) {
  keys_.reserve(cells);
  values_.reserve(cells * channels_);
}

CellFeatures compute_cell_features(std::span<const Point> cell_points) {
  if (cell_points.empty()) {
    throw std::invalid_argument("compute_cell_features: cell_points must be non-empty");
  }
  const size_t n = cell_points.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  // Center coordinate moments on the first point; within-cell offsets are
  // tiny, so this keeps the scatter matrix numerically clean.
  const double cx = cell_points[0].x;
  const double cy = cell_points[0].y;
  const double cz = cell_points[0].z;

  double sr = 0.0, srr = 0.0;
  double sx = 0.0, sy = 0.0, sz = 0.0;
  double sxx = 0.0, sxy = 0.0, sxz = 0.0, syy = 0.0, syz = 0.0, szz = 0.0;
  for (const Point& p : cell_points) {
    const double r = std::clamp(static_cast<double>(p.reflectance), 0.0, 1.0);
    sr += r;
    srr += r * r;
    const double x = p.x - cx;
    const double y = p.y - cy;
    const double z = p.z - cz;
    sx += x;
    sy += y;
    sz += z;
    sxx += x * x;
    sxy += x * y;
    sxz += x * z;
    syy += y * y;
    syz += y * z;
    szz += z * z;
  }

  CellFeatures f;
  const double mean_r = sr * inv_n;
  f.mean_reflectance = static_cast<float>(mean_r);
  f.var_reflectance = static_cast<float>(std::max(0.0, srr * inv_n - mean_r * mean_r));

  if (n >= 3) {
    const double mx = sx * inv_n;
    const double my = sy * inv_n;
    const double mz = sz * inv_n;
    Eigen::Matrix3d scatter;
    scatter << sxx * inv_n - mx * mx, sxy * inv_n - mx * my, sxz * inv_n - mx * mz,
        sxy * inv_n - mx * my, syy * inv_n - my * my, syz * inv_n - my * mz,
        sxz * inv_n - mx * mz, syz * inv_n - my * mz, szz * inv_n - mz * mz;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(scatter);
    // Ascending from Eigen; we want l1 >= l2 >= l3 >= 0.
    const double l1 = std::max(0.0, solver.eigenvalues()(2));
    const double l2 = std::max(0.0, solver.eigenvalues()(1));
    const double l3 = std::max(0.0, solver.eigenvalues()(0));
    if (l1 >= 1e-9) {
      f.linearity = static_cast<float>(std::clamp((l1 - l2) / l1, 0.0, 1.0));
      f.planarity = static_cast<float>(std::clamp((l2 - l3) / l1, 0.0, 1.0));
      f.sphericity = static_cast<float>(std::clamp(l3 / l1, 0.0, 1.0));
    }
  }
  return f;
}

SparseGrid discretize(const PointCloud& cloud, const GridConfig& config) {
  config.validate();

  // Group in-bounds points by cell.
  detail::CellIndex index;
  std::vector<CellKey> cell_keys;
  std::vector<std::vector<Point>> cell_points;
  const double inv_cell = 1.0 / static_cast<double>(config.cell_size);
  for (const Point& p : cloud.points) {
    const int l = static_cast<int>(
        std::floor((static_cast<double>(p.x) - config.origin.x) * inv_cell));
    const int m = static_cast<int>(
        std::floor((static_cast<double>(p.y) - config.origin.y) * inv_cell));
    const int n = static_cast<int>(
        std::floor((static_cast<double>(p.z) - config.origin.z) * inv_cell));
    if (!config.in_bounds(l, m, n)) continue;
    const CellKey key = make_cell_key(l, m, n);
    const uint32_t slot = index.insert(key, static_cast<uint32_t>(cell_keys.size()));
    if (slot == cell_keys.size()) {
      cell_keys.push_back(key);
      cell_points.emplace_back();
    }
    cell_points[slot].push_back(p);
  }

  // Canonical cell order and within-cell point order, so that the result is
  // bit-identical under any permutation of the input.
  std::vector<uint32_t> order(cell_keys.size());
  for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](uint32_t a, uint32_t b) { return cell_keys[a] < cell_keys[b]; });

  SparseGrid grid(config, kPointFeatureChannels);
  grid.reserve(cell_keys.size());
  for (const uint32_t slot : order) {
    auto& pts = cell_points[slot];
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
      if (a.x != b.x) return a.x < b.x;
      if (a.y != b.y) return a.y < b.y;
      if (a.z != b.z) return a.z < b.z;
      return a.reflectance < b.reflectance;
    });
    const CellFeatures f = compute_cell_features(pts);
    const float features[kPointFeatureChannels] = {f.occupancy,  f.mean_reflectance,
                                                   f.var_reflectance, f.linearity,
                                                   f.planarity,  f.sphericity};
    grid.insert(cell_keys[slot], features);
  }
  return grid;
}

}  // namespace votedet
