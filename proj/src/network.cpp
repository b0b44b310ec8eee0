// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace votedet {

void ClassBoxSpec::validate() const {
  if (!(length > 0.0f) || !(width > 0.0f) || !(height > 0.0f)) {
    throw std::invalid_argument("ClassBoxSpec: box dimensions must be positive");
  }
}

void Architecture::validate() const {
  if (layers.empty()) throw std::invalid_argument("Architecture: no layers");
  for (size_t c = 0; c + 1 < layers.size(); ++c) {
    if (layers[c].out_channels != layers[c + 1].in_channels) {
      throw std::invalid_argument("Architecture: adjacent layer channels do not chain");
    }
  }
  const LayerSpec& last = layers.back();
  if (last.out_channels != 1 || last.has_relu) {
    throw std::invalid_argument("Architecture: final layer must be linear with one output");
  }
  for (const LayerSpec& l : layers) {
    if (l.kernel_x % 2 == 0 || l.kernel_y % 2 == 0 || l.kernel_z % 2 == 0) {
      throw std::invalid_argument("Architecture: kernel extents must be odd");
    }
  }
}

std::array<int, 3> receptive_field(const Architecture& arch) {
  std::array<int, 3> rf{1, 1, 1};
  for (const LayerSpec& l : arch.layers) {
    rf[0] += l.kernel_x - 1;
    rf[1] += l.kernel_y - 1;
    rf[2] += l.kernel_z - 1;
  }
  return rf;
}

namespace {

// Smallest odd kernel extent so the stacked receptive field reaches `need`
// cells on one axis, given `accumulated` cells already contributed by the
// hidden layers.
int output_kernel_extent(int need, int accumulated) {
  int k = need - accumulated;
  if (k < 1) k = 1;
  if (k % 2 == 0) ++k;
  return k;
}

}  // namespace

Architecture make_architecture(char model, const ClassBoxSpec& box, float cell_size,
                               int input_channels, int hidden_filters) {
  box.validate();
  if (!(cell_size > 0.0f)) throw std::invalid_argument("make_architecture: bad cell size");

  const int need_x = static_cast<int>(std::ceil(box.length / cell_size));
  const int need_y = static_cast<int>(std::ceil(box.width / cell_size));
  const int need_z = static_cast<int>(std::ceil(box.height / cell_size));

  std::vector<std::array<int, 3>> hidden;
  switch (model) {
    case 'A':
      break;
    case 'B':
      hidden = {{3, 3, 3}};
      break;
    case 'C':
      hidden = {{5, 5, 5}};
      break;
    case 'D':
      hidden = {{3, 3, 3}, {3, 3, 3}};
      break;
    case 'E':
      hidden = {{5, 5, 5}, {3, 3, 3}};
      break;
    default:
      throw std::invalid_argument("make_architecture: model must be one of A-E");
  }

  Architecture arch;
  arch.class_name = box.class_name;
  int acc_x = 0, acc_y = 0, acc_z = 0;
  int channels = input_channels;
  for (const auto& k : hidden) {
    arch.layers.push_back({k[0], k[1], k[2], channels, hidden_filters, true});
    channels = hidden_filters;
    acc_x += k[0] - 1;
    acc_y += k[1] - 1;
    acc_z += k[2] - 1;
  }
  arch.layers.push_back({output_kernel_extent(need_x, acc_x), output_kernel_extent(need_y, acc_y),
                         output_kernel_extent(need_z, acc_z), channels, 1, false});
  arch.validate();
  return arch;
}

Network::Network(Architecture arch, std::vector<FilterBank> banks)
    : arch_(std::move(arch)), banks_(std::move(banks)) {
  validate();
}

void Network::validate() const {
  arch_.validate();
  if (banks_.size() != arch_.layers.size()) {
    throw std::invalid_argument("Network: bank count does not match the architecture");
  }
  for (size_t c = 0; c < banks_.size(); ++c) {
    const LayerSpec& spec = arch_.layers[c];
    const FilterBank& bank = banks_[c];
    if (bank.kernel_x() != spec.kernel_x || bank.kernel_y() != spec.kernel_y ||
        bank.kernel_z() != spec.kernel_z || bank.in_channels() != spec.in_channels ||
        bank.out_channels() != spec.out_channels) {
      throw std::invalid_argument("Network: bank shape does not match its layer spec");
    }
    bank.validate();
  }
}

SparseGrid Network::forward(const SparseGrid& input) const {
  SparseGrid current = input;
  for (size_t c = 0; c < banks_.size(); ++c) {
    SparseGrid z = vote_forward(current, banks_[c]);
    current = arch_.layers[c].has_relu ? relu(z) : std::move(z);
  }
  current.prune_zero_cells();
  return current;
}

std::vector<SparseGrid> Network::forward_activations(const SparseGrid& input) const {
  std::vector<SparseGrid> acts;
  acts.reserve(banks_.size() + 1);
  acts.push_back(input);
  for (size_t c = 0; c < banks_.size(); ++c) {
    SparseGrid z = vote_forward(acts.back(), banks_[c]);
    acts.push_back(arch_.layers[c].has_relu ? relu(z) : std::move(z));
  }
  return acts;
}

Network init_he(const Architecture& arch, uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  std::vector<FilterBank> banks;
  banks.reserve(arch.layers.size());
  for (const LayerSpec& spec : arch.layers) {
    FilterBank bank(spec.kernel_x, spec.kernel_y, spec.kernel_z, spec.in_channels,
                    spec.out_channels);
    const double fan_in = static_cast<double>(spec.kernel_x) * spec.kernel_y * spec.kernel_z *
                          spec.in_channels;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (float& w : bank.weights()) w = static_cast<float>(dist(rng));
    // Biases start at zero, the largest value the non-positive constraint
    // allows.
    banks.push_back(std::move(bank));
  }
  return Network(arch, std::move(banks));
}

}  // namespace votedet
