// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/sparse_conv.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace votedet {

FilterBank::FilterBank(int kernel_x, int kernel_y, int kernel_z, int in_channels,
                       int out_channels)
    : kernel_x_(kernel_x),
      kernel_y_(kernel_y),
      kernel_z_(kernel_z),
      in_channels_(in_channels),
      out_channels_(out_channels) {
  if (kernel_x_ < 1 || kernel_y_ < 1 || kernel_z_ < 1 || kernel_x_ % 2 == 0 ||
      kernel_y_ % 2 == 0 || kernel_z_ % 2 == 0) {
    throw std::invalid_argument("FilterBank: kernel extents must be odd and positive");
  }
  if (in_channels_ < 1 || out_channels_ < 1) {
    throw std::invalid_argument("FilterBank: channel counts must be >= 1");
  }
  weights_.assign(static_cast<size_t>(kernel_x_) * kernel_y_ * kernel_z_ * in_channels_ *
                      out_channels_,
                  0.0f);
  biases_.assign(out_channels_, 0.0f);
}

void FilterBank::clamp_biases() {
  for (float& b : biases_) b = std::min(b, 0.0f);
}

void FilterBank::validate() const {
  const size_t expect = static_cast<size_t>(kernel_x_) * kernel_y_ * kernel_z_ *
                        in_channels_ * out_channels_;
  if (weights_.size() != expect || biases_.size() != static_cast<size_t>(out_channels_)) {
    throw std::invalid_argument("FilterBank: parameter buffers do not match the shape");
  }
  for (const float b : biases_) {
    if (b > 0.0f) throw std::invalid_argument("FilterBank: biases must be non-positive");
  }
}

LayerGradients LayerGradients::zeros_like(const FilterBank& bank) {
  LayerGradients g;
  g.d_weights.assign(bank.weight_count(), 0.0f);
  g.d_biases.assign(bank.out_channels(), 0.0f);
  return g;
}

void LayerGradients::add(const LayerGradients& other) {
  if (other.d_weights.size() != d_weights.size() || other.d_biases.size() != d_biases.size()) {
    throw std::invalid_argument("LayerGradients::add: shape mismatch");
  }
  for (size_t i = 0; i < d_weights.size(); ++i) d_weights[i] += other.d_weights[i];
  for (size_t i = 0; i < d_biases.size(); ++i) d_biases[i] += other.d_biases[i];
}

void LayerGradients::scale(float s) {
  for (float& w : d_weights) w *= s;
  for (float& b : d_biases) b *= s;
}

namespace {

// Scatter the votes of input cells [begin, end) into `out`.
void vote_range(const SparseGrid& input, const FilterBank& filters, size_t begin, size_t end,
                SparseGrid& out) {
  const GridConfig& cfg = input.config();
  const int hx = filters.half_x();
  const int hy = filters.half_y();
  const int hz = filters.half_z();
  const int f_in = filters.in_channels();
  const int f_out = filters.out_channels();
  const auto keys = input.keys();

  for (size_t pos = begin; pos < end; ++pos) {
    const CellKey key = keys[pos];
    const int l = key_l(key);
    const int m = key_m(key);
    const int n = key_n(key);
    const auto h = input.values(pos);

    const int i_lo = std::max(-hx, -l), i_hi = std::min(hx, cfg.extent_x - 1 - l);
    const int j_lo = std::max(-hy, -m), j_hi = std::min(hy, cfg.extent_y - 1 - m);
    const int k_lo = std::max(-hz, -n), k_hi = std::min(hz, cfg.extent_z - 1 - n);
    for (int i = i_lo; i <= i_hi; ++i) {
      for (int j = j_lo; j <= j_hi; ++j) {
        for (int k = k_lo; k <= k_hi; ++k) {
          // Votes use the spatially flipped kernel: the cell at offset
          // (i, j, k) receives weight(-i, -j, -k).
          const float* w = filters.weight_block(-i, -j, -k);
          auto acc = out.find_or_insert(make_cell_key(l + i, m + j, n + k));
          for (int fi = 0; fi < f_in; ++fi) {
            const float hv = h[fi];
            if (hv == 0.0f) continue;
            const float* wrow = w + static_cast<size_t>(fi) * f_out;
            for (int fo = 0; fo < f_out; ++fo) acc[fo] += wrow[fo] * hv;
          }
        }
      }
    }
  }
}

}  // namespace

SparseGrid vote_forward(const SparseGrid& input, const FilterBank& filters, int workers) {
  if (input.channels() != filters.in_channels()) {
    throw std::invalid_argument("vote_forward: input channels do not match the filter bank");
  }
  const size_t count = input.occupied_count();
  SparseGrid out(input.config(), filters.out_channels());

  if (workers <= 1 || count < 1024) {
    vote_range(input, filters, 0, count, out);
  } else {
    const size_t t = std::min<size_t>(workers, count);
    std::vector<SparseGrid> partial(t, SparseGrid(input.config(), filters.out_channels()));
    std::vector<std::thread> threads;
    threads.reserve(t);
    for (size_t w = 0; w < t; ++w) {
      const size_t begin = count * w / t;
      const size_t end = count * (w + 1) / t;
      threads.emplace_back([&, w, begin, end] {
        vote_range(input, filters, begin, end, partial[w]);
      });
    }
    for (auto& th : threads) th.join();
    // Merge in worker order so the accumulation order is fixed.
    for (size_t w = 0; w < t; ++w) {
      const auto keys = partial[w].keys();
      for (size_t pos = 0; pos < keys.size(); ++pos) {
        auto acc = out.find_or_insert(keys[pos]);
        const auto v = partial[w].values(pos);
        for (size_t c = 0; c < acc.size(); ++c) acc[c] += v[c];
      }
    }
  }

  const auto& biases = filters.biases();
  const auto out_keys = out.keys();
  for (size_t pos = 0; pos < out_keys.size(); ++pos) {
    auto v = out.values_mut(pos);
    for (int fo = 0; fo < filters.out_channels(); ++fo) v[fo] += biases[fo];
  }
  return out;
}

std::vector<double> dense_forward(const SparseGrid& input, const FilterBank& filters) {
  if (input.channels() != filters.in_channels()) {
    throw std::invalid_argument("dense_forward: input channels do not match the filter bank");
  }
  const GridConfig& cfg = input.config();
  const int f_in = filters.in_channels();
  const int f_out = filters.out_channels();
  const size_t volume = static_cast<size_t>(cfg.volume());
  std::vector<double> out(volume * f_out, 0.0);

  for (int l = 0; l < cfg.extent_x; ++l) {
    for (int m = 0; m < cfg.extent_y; ++m) {
      for (int n = 0; n < cfg.extent_z; ++n) {
        const size_t base =
            ((static_cast<size_t>(l) * cfg.extent_y + m) * cfg.extent_z + n) * f_out;
        for (int fo = 0; fo < f_out; ++fo) {
          double acc = filters.biases()[fo];
          for (int i = -filters.half_x(); i <= filters.half_x(); ++i) {
            for (int j = -filters.half_y(); j <= filters.half_y(); ++j) {
              for (int k = -filters.half_z(); k <= filters.half_z(); ++k) {
                const auto h = input.find(l + i, m + j, n + k);
                if (h.empty()) continue;
                for (int fi = 0; fi < f_in; ++fi) {
                  acc += static_cast<double>(filters.weight(i, j, k, fi, fo)) * h[fi];
                }
              }
            }
          }
          out[base + fo] = acc;
        }
      }
    }
  }
  return out;
}

SparseGrid relu(const SparseGrid& input) {
  SparseGrid out(input.config(), input.channels());
  out.reserve(input.occupied_count());
  const auto keys = input.keys();
  for (size_t pos = 0; pos < keys.size(); ++pos) {
    const auto v = input.values(pos);
    bool any = false;
    for (const float x : v) {
      if (x > 0.0f) {
        any = true;
        break;
      }
    }
    if (!any) continue;
    auto dst = out.find_or_insert(keys[pos]);
    for (size_t c = 0; c < v.size(); ++c) dst[c] = std::max(0.0f, v[c]);
  }
  return out;
}

BackwardResult backward(const SparseGrid& input, const FilterBank& filters,
                        const SparseGrid& grad_output) {
  if (input.channels() != filters.in_channels()) {
    throw std::invalid_argument("backward: input channels do not match the filter bank");
  }
  if (grad_output.channels() != filters.out_channels()) {
    throw std::invalid_argument("backward: grad_output channels do not match the filter bank");
  }
  const GridConfig& cfg = input.config();
  const int f_in = filters.in_channels();
  const int f_out = filters.out_channels();

  BackwardResult res{LayerGradients::zeros_like(filters), SparseGrid(cfg, f_in)};

  const auto gkeys = grad_output.keys();
  for (size_t pos = 0; pos < gkeys.size(); ++pos) {
    const CellKey key = gkeys[pos];
    const int l = key_l(key);
    const int m = key_m(key);
    const int n = key_n(key);
    const auto g = grad_output.values(pos);

    for (int fo = 0; fo < f_out; ++fo) res.gradients.d_biases[fo] += g[fo];

    const int hx = filters.half_x();
    const int hy = filters.half_y();
    const int hz = filters.half_z();
    const int i_lo = std::max(-hx, -l), i_hi = std::min(hx, cfg.extent_x - 1 - l);
    const int j_lo = std::max(-hy, -m), j_hi = std::min(hy, cfg.extent_y - 1 - m);
    const int k_lo = std::max(-hz, -n), k_hi = std::min(hz, cfg.extent_z - 1 - n);
    for (int i = i_lo; i <= i_hi; ++i) {
      for (int j = j_lo; j <= j_hi; ++j) {
        for (int k = k_lo; k <= k_hi; ++k) {
          // The forward pairing z_{o} += w_{p-o} h_{p} means the weight at
          // offset (i, j, k) couples grad at o with input at o + (i, j, k).
          const auto h = input.find(l + i, m + j, n + k);
          if (h.empty()) continue;
          const size_t w_base = filters.weight_offset(i, j, k, 0, 0);
          float* dw = res.gradients.d_weights.data() + w_base;
          const float* w = filters.weights().data() + w_base;
          auto gi = res.grad_input.find_or_insert(make_cell_key(l + i, m + j, n + k));
          for (int fi = 0; fi < f_in; ++fi) {
            const float hv = h[fi];
            float acc = 0.0f;
            const size_t row = static_cast<size_t>(fi) * f_out;
            for (int fo = 0; fo < f_out; ++fo) {
              const float gv = g[fo];
              dw[row + fo] += hv * gv;
              acc += w[row + fo] * gv;
            }
            gi[fi] += acc;
          }
        }
      }
    }
  }
  return res;
}

}  // namespace votedet
