// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "votedet/evaluation.hpp"
#include "votedet/parallel.hpp"

namespace votedet {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (learning_rate < 0.0f || momentum < 0.0f || l2_weight_decay < 0.0f ||
      l1_sparsity_penalty < 0.0f) {
    throw std::invalid_argument("TrainConfig: rates must be >= 0");
  }
  if (mining_period_epochs < 0 || mined_per_frame < 0) {
    throw std::invalid_argument("TrainConfig: mining settings must be >= 0");
  }
  if (validation_fraction < 0.0f || validation_fraction >= 1.0f) {
    throw std::invalid_argument("TrainConfig: validation_fraction must be in [0, 1)");
  }
  if (validation_period_epochs < 1) {
    throw std::invalid_argument("TrainConfig: validation_period_epochs must be >= 1");
  }
  if (hidden_filters < 1) throw std::invalid_argument("TrainConfig: hidden_filters must be >= 1");
  if (model_kind < 'A' || model_kind > 'E') {
    throw std::invalid_argument("TrainConfig: model_kind must be one of A-E");
  }
  if (workers < 1) throw std::invalid_argument("TrainConfig: workers must be >= 1");
}

HingeResult hinge_loss(float score, int label) {
  if (label != 1 && label != -1) {
    throw std::invalid_argument("hinge_loss: label must be +1 or -1");
  }
  const float margin = 1.0f - score * static_cast<float>(label);
  if (margin > 0.0f) return {margin, static_cast<float>(-label)};
  return {0.0f, 0.0f};
}

L1PenaltyResult l1_activation_penalty(std::span<const SparseGrid> activations, float lambda) {
  if (lambda < 0.0f) throw std::invalid_argument("l1_activation_penalty: lambda must be >= 0");
  L1PenaltyResult result;
  result.subgradients.reserve(activations.size());
  for (const SparseGrid& act : activations) {
    const double volume = static_cast<double>(act.config().volume());
    const double scale = static_cast<double>(lambda) / volume;
    SparseGrid sub(act.config(), act.channels());
    sub.reserve(act.occupied_count());
    double total = 0.0;
    const auto keys = act.keys();
    for (size_t pos = 0; pos < keys.size(); ++pos) {
      const auto v = act.values(pos);
      auto s = sub.find_or_insert(keys[pos]);
      for (size_t c = 0; c < v.size(); ++c) {
        total += std::abs(static_cast<double>(v[c]));
        if (v[c] > 0.0f) {
          s[c] = static_cast<float>(scale);
        } else if (v[c] < 0.0f) {
          s[c] = static_cast<float>(-scale);
        }
      }
    }
    result.penalty += static_cast<double>(lambda) * total / volume;
    result.subgradients.push_back(std::move(sub));
  }
  return result;
}

OptimizerState OptimizerState::zeros_like(const Network& net) {
  OptimizerState state;
  state.velocity.reserve(net.banks().size());
  for (const FilterBank& bank : net.banks()) {
    state.velocity.push_back(LayerGradients::zeros_like(bank));
  }
  return state;
}

std::optional<std::string> sgd_step(Network& net, OptimizerState& state,
                                    const std::vector<LayerGradients>& gradients,
                                    const TrainConfig& config) {
  if (gradients.size() != net.banks().size() || state.velocity.size() != net.banks().size()) {
    throw std::invalid_argument("sgd_step: gradient shapes do not match the network");
  }
  for (size_t c = 0; c < gradients.size(); ++c) {
    for (const float g : gradients[c].d_weights) {
      if (!std::isfinite(g)) {
        return "non-finite weight gradient in layer " + std::to_string(c) + "; step aborted";
      }
    }
    for (const float g : gradients[c].d_biases) {
      if (!std::isfinite(g)) {
        return "non-finite bias gradient in layer " + std::to_string(c) + "; step aborted";
      }
    }
  }
  const float lr = config.learning_rate;
  const float mu = config.momentum;
  const float l2 = config.l2_weight_decay;
  for (size_t c = 0; c < gradients.size(); ++c) {
    FilterBank& bank = net.banks()[c];
    auto& vel = state.velocity[c];
    auto& w = bank.weights();
    for (size_t i = 0; i < w.size(); ++i) {
      vel.d_weights[i] = mu * vel.d_weights[i] - lr * (gradients[c].d_weights[i] + l2 * w[i]);
      w[i] += vel.d_weights[i];
    }
    auto& b = bank.biases();
    for (size_t i = 0; i < b.size(); ++i) {
      vel.d_biases[i] = mu * vel.d_biases[i] - lr * (gradients[c].d_biases[i] + l2 * b[i]);
      b[i] += vel.d_biases[i];
    }
    bank.clamp_biases();
  }
  return std::nullopt;
}

GridConfig make_crop_config(const Architecture& arch, float cell_size, int angular_bins) {
  const auto rf = receptive_field(arch);
  GridConfig cfg;
  cfg.cell_size = cell_size;
  cfg.extent_x = rf[0];
  cfg.extent_y = rf[1];
  cfg.extent_z = rf[2];
  cfg.origin = {-0.5f * cell_size * rf[0], -0.5f * cell_size * rf[1],
                -0.5f * cell_size * rf[2]};
  cfg.angular_bins = angular_bins;
  return cfg;
}

PointCloud extract_crop(const PointCloud& cloud, const Vec3f& anchor, float yaw,
                        const GridConfig& crop) {
  const double c = std::cos(-static_cast<double>(yaw));
  const double s = std::sin(-static_cast<double>(yaw));
  const double half_x = -crop.origin.x;
  const double half_y = -crop.origin.y;
  const double half_z = -crop.origin.z;
  // Keep a jitter margin: corner points sweep by up to r * (pi / bins) under
  // augmentation rotation, plus one cell of translation.
  const double radius = std::sqrt(half_x * half_x + half_y * half_y);
  const double slack_xy =
      radius * M_PI / static_cast<double>(std::max(1, crop.angular_bins)) + crop.cell_size;
  const double slack_z = 2.0 * crop.cell_size;

  PointCloud out;
  for (const Point& p : cloud.points) {
    const double dx = p.x - anchor.x;
    const double dy = p.y - anchor.y;
    const double dz = p.z - anchor.z;
    const Point q{c * dx - s * dy, s * dx + c * dy, dz, p.reflectance};
    if (std::abs(q.x) > half_x + slack_xy || std::abs(q.y) > half_y + slack_xy) continue;
    if (q.z < -half_z - slack_z || q.z > half_z + slack_z) continue;
    out.points.push_back(q);
  }
  return out;
}

Example jitter_example(const Example& example, const Vec3f& translation, float yaw) {
  Example out = example;
  out.points = translate_points(rotate_points(example.points, yaw), translation);
  return out;
}

Example augment(const Example& example, const GridConfig& crop, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> shift(-crop.cell_size, crop.cell_size);
  const float bin_width =
      static_cast<float>(M_PI) / static_cast<float>(std::max(1, crop.angular_bins));
  std::uniform_real_distribution<float> spin(-bin_width, bin_width);
  // Draw in a fixed order so a given rng state maps to one transform.
  const float tx = shift(rng);
  const float ty = shift(rng);
  const float tz = shift(rng);
  const float yaw = spin(rng);
  return jitter_example(example, {tx, ty, tz}, yaw);
}

namespace {

// Center cell of a receptive-field-sized crop.
CellKey crop_center_key(const GridConfig& crop) {
  return make_cell_key(crop.extent_x / 2, crop.extent_y / 2, crop.extent_z / 2);
}

// Applies the ReLU mask of `activation` to `grad` in place: channels whose
// activation is exactly zero pass no gradient.
void mask_by_activation(SparseGrid& grad, const SparseGrid& activation) {
  const auto keys = grad.keys();
  for (size_t pos = 0; pos < keys.size(); ++pos) {
    const auto act = activation.find(keys[pos]);
    auto g = grad.values_mut(pos);
    if (act.empty()) {
      for (float& v : g) v = 0.0f;
      continue;
    }
    for (size_t c = 0; c < g.size(); ++c) {
      if (!(act[c] > 0.0f)) g[c] = 0.0f;
    }
  }
}

void add_grid(SparseGrid& dst, const SparseGrid& src) {
  const auto keys = src.keys();
  for (size_t pos = 0; pos < keys.size(); ++pos) {
    auto d = dst.find_or_insert(keys[pos]);
    const auto s = src.values(pos);
    for (size_t c = 0; c < d.size(); ++c) d[c] += s[c];
  }
}

}  // namespace

ObjectiveResult example_objective(const Network& net, const SparseGrid& crop, int label,
                                  float lambda) {
  const auto acts = net.forward_activations(crop);
  const size_t layers = net.banks().size();

  ObjectiveResult result;
  result.layer_occupancy.reserve(acts.size());
  for (const SparseGrid& a : acts) result.layer_occupancy.push_back(a.occupied_count());

  const SparseGrid& scores = acts.back();
  const CellKey center = crop_center_key(crop.config());
  const auto center_val = scores.find(center);
  const bool center_present = !center_val.empty();
  result.score =
      center_present ? center_val[0] : net.banks().back().biases()[0];

  const HingeResult hinge = hinge_loss(result.score, label);
  result.hinge = hinge.loss;

  // Penalty applies to the intermediate activations only (acts[1..layers-1]).
  L1PenaltyResult penalty;
  if (layers > 1) {
    penalty = l1_activation_penalty(
        std::span<const SparseGrid>(acts.data() + 1, layers - 1), lambda);
  }
  result.penalty = penalty.penalty;
  result.objective = static_cast<double>(hinge.loss) + penalty.penalty;

  result.gradients.reserve(layers);
  for (const FilterBank& bank : net.banks()) {
    result.gradients.push_back(LayerGradients::zeros_like(bank));
  }

  const bool penalty_active = lambda > 0.0f && layers > 1;
  if (hinge.d_score == 0.0f && !penalty_active) return result;

  // Seed the score gradient. A center cell that received no votes only
  // reaches the final bias.
  SparseGrid g(crop.config(), 1);
  if (hinge.d_score != 0.0f) {
    if (center_present) {
      g.find_or_insert(center)[0] = hinge.d_score;
    } else {
      result.gradients.back().d_biases[0] += hinge.d_score;
    }
  }

  for (size_t c = layers; c-- > 0;) {
    BackwardResult back = backward(acts[c], net.banks()[c], g);
    result.gradients[c].add(back.gradients);
    if (c == 0) break;
    SparseGrid gin = std::move(back.grad_input);
    if (penalty_active) add_grid(gin, penalty.subgradients[c - 1]);
    mask_by_activation(gin, acts[c]);
    g = std::move(gin);
  }
  return result;
}

std::vector<Example> mine_hard_negatives(const Network& net, const ModelMetadata& meta,
                                         std::span<const Frame> frames,
                                         const GridConfig& crop, const TrainConfig& config) {
  std::vector<std::vector<Example>> per_frame(frames.size());
  parallel_for_index(frames.size(), config.workers, [&](size_t fi) {
    const Frame& frame = frames[fi];
    DetectOptions options;
    options.threshold = config.mining_threshold;
    options.workers = 1;
    const std::vector<Detection> dets = detect_frame(net, meta, frame.cloud, options);
    const std::vector<Box3D> truth = class_boxes_of(frame, meta.class_box.class_name);

    std::vector<const Detection*> false_positives;
    for (const Detection& det : dets) {
      double best = 0.0;
      for (const Box3D& gt : truth) best = std::max(best, box_iou_3d(det.box(), gt));
      if (best < 0.25) false_positives.push_back(&det);
    }
    std::stable_sort(false_positives.begin(), false_positives.end(),
                     [](const Detection* a, const Detection* b) { return a->score > b->score; });
    const size_t take = std::min<size_t>(false_positives.size(), config.mined_per_frame);
    for (size_t i = 0; i < take; ++i) {
      const Detection& det = *false_positives[i];
      Example ex;
      ex.points = extract_crop(frame.cloud, det.center, det.yaw, crop);
      ex.label = -1;
      ex.frame_id = frame.id;
      ex.source = ExampleSource::kMinedNegative;
      ex.anchor = det.center;
      ex.anchor_yaw = det.yaw;
      per_frame[fi].push_back(std::move(ex));
    }
  });

  std::vector<Example> mined;
  for (auto& v : per_frame) {
    for (auto& e : v) mined.push_back(std::move(e));
  }
  return mined;
}

APResult evaluate_on_frames(const Network& net, const ModelMetadata& meta,
                            std::span<const Frame> frames, float threshold, int workers) {
  std::vector<FrameMatches> matches(frames.size());
  const double iou = iou_threshold_for_class(meta.class_box.class_name);
  parallel_for_index(frames.size(), workers, [&](size_t fi) {
    const Frame& frame = frames[fi];
    DetectOptions options;
    options.threshold = threshold;
    options.workers = 1;
    const std::vector<Detection> dets = detect_frame(net, meta, frame.cloud, options);
    std::vector<FrameLabel> det_labels;
    for (const Detection& det : dets) {
      auto label = detection_to_label(det.class_name, det.box(), det.score, frame.calib);
      if (label) det_labels.push_back(std::move(*label));
    }
    matches[fi] = match_detections(det_labels, frame.labels, meta.class_box.class_name, iou,
                                   kModerate);
  });
  return average_precision(matches);
}

namespace {

struct ExampleOutcome {
  std::vector<LayerGradients> gradients;
  double loss = 0.0;
  double penalty = 0.0;
  std::vector<size_t> layer_occupancy;
};

std::vector<Example> build_positive_examples(std::span<const Frame> frames,
                                             const std::string& class_name,
                                             const GridConfig& crop) {
  std::vector<Example> positives;
  for (const Frame& frame : frames) {
    for (const Box3D& box : class_boxes_of(frame, class_name)) {
      Example ex;
      ex.points = extract_crop(frame.cloud, box.center, box.yaw, crop);
      ex.label = 1;
      ex.frame_id = frame.id;
      ex.source = ExampleSource::kGroundTruth;
      ex.anchor = box.center;
      ex.anchor_yaw = box.yaw;
      positives.push_back(std::move(ex));
    }
  }
  return positives;
}

std::vector<Example> build_random_negatives(std::span<const Frame> frames,
                                            const std::string& class_name,
                                            const GridConfig& grid, const GridConfig& crop,
                                            const ClassBoxSpec& class_box,
                                            std::mt19937_64& rng) {
  std::vector<Example> negatives;
  for (const Frame& frame : frames) {
    const std::vector<Box3D> truth = class_boxes_of(frame, class_name);
    const size_t want = truth.size();
    if (want == 0) continue;
    const SparseGrid occupancy = discretize(frame.cloud, grid);
    if (occupancy.empty()) continue;
    std::uniform_int_distribution<size_t> pick_cell(0, occupancy.occupied_count() - 1);
    std::uniform_int_distribution<int> pick_bin(0, std::max(1, grid.angular_bins) - 1);
    size_t made = 0;
    for (int attempt = 0; attempt < 200 && made < want; ++attempt) {
      const CellKey key = occupancy.keys()[pick_cell(rng)];
      const Vec3f anchor = grid.cell_center(key_l(key), key_m(key), key_n(key));
      const float yaw = static_cast<float>(M_PI) * static_cast<float>(pick_bin(rng)) /
                        static_cast<float>(std::max(1, grid.angular_bins));
      Box3D candidate{anchor, class_box.length, class_box.width, class_box.height, yaw};
      bool overlaps = false;
      for (const Box3D& gt : truth) {
        if (box_iou_3d(candidate, gt) > 0.0) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) continue;
      Example ex;
      ex.points = extract_crop(frame.cloud, anchor, yaw, crop);
      ex.label = -1;
      ex.frame_id = frame.id;
      ex.source = ExampleSource::kRandomNegative;
      ex.anchor = anchor;
      ex.anchor_yaw = yaw;
      negatives.push_back(std::move(ex));
      ++made;
    }
  }
  return negatives;
}

}  // namespace

FitResult fit(std::span<const Frame> frames, const GridConfig& grid, const TrainConfig& config,
              const std::string& class_name, const LoadedModel* resume) {
  config.validate();
  grid.validate();

  // Deterministic train/validation split.
  std::vector<size_t> order(frames.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 split_rng(config.seed ^ 0x5117ULL);
  std::shuffle(order.begin(), order.end(), split_rng);
  size_t val_count = static_cast<size_t>(
      std::lround(config.validation_fraction * static_cast<double>(frames.size())));
  if (config.validation_fraction > 0.0f && frames.size() > 1) {
    val_count = std::max<size_t>(val_count, 1);
  }
  val_count = std::min(val_count, frames.size() > 0 ? frames.size() - 1 : size_t{0});
  std::vector<Frame> val_frames, train_frames;
  for (size_t i = 0; i < order.size(); ++i) {
    (i < val_count ? val_frames : train_frames).push_back(frames[order[i]]);
  }

  // Class box from the training split, then the class-specific architecture.
  std::vector<Box3D> all_truth;
  for (const Frame& f : train_frames) {
    const auto boxes = class_boxes_of(f, class_name);
    all_truth.insert(all_truth.end(), boxes.begin(), boxes.end());
  }
  if (all_truth.empty()) {
    throw std::invalid_argument("fit: no positive examples of class " + class_name);
  }
  const ClassBoxSpec class_box =
      resume ? resume->metadata.class_box : fit_class_box(class_name, all_truth);
  const Architecture arch =
      resume ? resume->network.architecture()
             : make_architecture(config.model_kind, class_box, grid.cell_size,
                                 kPointFeatureChannels, config.hidden_filters);
  const GridConfig crop = make_crop_config(arch, grid.cell_size, grid.angular_bins);

  FitResult result;
  result.metadata = {grid, class_box, config.l1_sparsity_penalty,
                     resume ? resume->metadata.model_kind : config.model_kind};
  Network net = resume ? resume->network : init_he(arch, config.seed);
  OptimizerState opt = OptimizerState::zeros_like(net);

  std::mt19937_64 data_rng(config.seed ^ 0xda7aULL);
  const std::vector<Example> positives =
      build_positive_examples(train_frames, class_name, crop);
  std::vector<Example> negatives =
      build_random_negatives(train_frames, class_name, grid, crop, class_box, data_rng);

  Network best = net;
  double best_ap = -1.0;
  int best_epoch = -1;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    std::mt19937_64 epoch_rng(config.seed ^ (0xEBull << 32) ^ static_cast<uint64_t>(epoch));

    // Fresh augmentation of the positives each epoch; negatives stay as-is.
    std::vector<const Example*> pool;
    std::vector<Example> augmented;
    augmented.reserve(positives.size());
    for (const Example& pos : positives) augmented.push_back(augment(pos, crop, epoch_rng));
    for (const Example& ex : augmented) pool.push_back(&ex);
    for (const Example& ex : negatives) pool.push_back(&ex);
    std::shuffle(pool.begin(), pool.end(), epoch_rng);

    double loss_sum = 0.0;
    double penalty_sum = 0.0;
    size_t seen = 0;
    std::vector<double> occ_sum;

    for (size_t start = 0; start < pool.size(); start += config.batch_size) {
      const size_t count = std::min<size_t>(config.batch_size, pool.size() - start);
      std::vector<ExampleOutcome> outcomes(count);
      parallel_for_index(count, config.workers, [&](size_t i) {
        const Example& ex = *pool[start + i];
        const SparseGrid crop_grid = discretize(ex.points, crop);
        ObjectiveResult obj =
            example_objective(net, crop_grid, ex.label, config.l1_sparsity_penalty);
        outcomes[i] = {std::move(obj.gradients), obj.hinge, obj.penalty,
                       std::move(obj.layer_occupancy)};
      });

      std::vector<LayerGradients> batch_grads;
      for (const FilterBank& bank : net.banks()) {
        batch_grads.push_back(LayerGradients::zeros_like(bank));
      }
      for (size_t i = 0; i < count; ++i) {
        for (size_t c = 0; c < batch_grads.size(); ++c) {
          batch_grads[c].add(outcomes[i].gradients[c]);
        }
        loss_sum += outcomes[i].loss;
        penalty_sum += outcomes[i].penalty;
        if (occ_sum.size() < outcomes[i].layer_occupancy.size()) {
          occ_sum.resize(outcomes[i].layer_occupancy.size(), 0.0);
        }
        for (size_t c = 0; c < outcomes[i].layer_occupancy.size(); ++c) {
          occ_sum[c] += static_cast<double>(outcomes[i].layer_occupancy[c]);
        }
      }
      const float inv = 1.0f / static_cast<float>(count);
      for (auto& g : batch_grads) g.scale(inv);
      seen += count;

      const auto error = sgd_step(net, opt, batch_grads, config);
      if (error) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = std::numeric_limits<double>::quiet_NaN();
        result.log.push_back(rec);
        break;  // skip the remainder of this epoch
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.pool_size = static_cast<int>(pool.size());
    if (seen > 0) {
      rec.mean_loss = loss_sum / static_cast<double>(seen);
      rec.mean_penalty = penalty_sum / static_cast<double>(seen);
      for (double v : occ_sum) {
        rec.mean_layer_occupancy.push_back(v / static_cast<double>(seen));
      }
    }

    if (config.mining_period_epochs > 0 && epoch % config.mining_period_epochs == 0 &&
        epoch < config.epochs && config.mined_per_frame > 0) {
      std::vector<Example> mined =
          mine_hard_negatives(net, result.metadata, train_frames, crop, config);
      rec.mined_added = static_cast<int>(mined.size());
      for (auto& ex : mined) negatives.push_back(std::move(ex));
    }

    if (!val_frames.empty() &&
        (epoch % config.validation_period_epochs == 0 || epoch == config.epochs)) {
      const APResult ap = evaluate_on_frames(net, result.metadata, val_frames,
                                             config.validation_threshold, config.workers);
      rec.validation_ap = ap.ap.value_or(0.0);
      if (rec.validation_ap > best_ap) {
        best_ap = rec.validation_ap;
        best_epoch = epoch;
        best = net;
      }
    }

    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.log.push_back(rec);
  }

  result.final_network = net;
  result.best_network = best_epoch >= 0 ? best : net;
  result.best_validation_ap = best_ap;
  result.best_epoch = best_epoch;
  return result;
}

void write_training_log(const std::vector<EpochRecord>& log, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open training log for writing: " + path);
  for (const EpochRecord& rec : log) {
    nlohmann::json j;
    j["epoch"] = rec.epoch;
    if (std::isfinite(rec.mean_loss)) {
      j["loss"] = rec.mean_loss;
    } else {
      j["loss"] = nullptr;
    }
    j["penalty"] = rec.mean_penalty;
    if (rec.validation_ap >= 0.0) {
      j["validation_ap"] = rec.validation_ap;
    } else {
      j["validation_ap"] = nullptr;
    }
    j["mean_layer_occupancy"] = rec.mean_layer_occupancy;
    j["wall_seconds"] = rec.wall_seconds;
    j["pool_size"] = rec.pool_size;
    j["mined_added"] = rec.mined_added;
    out << j.dump() << '\n';
  }
}

}  // namespace votedet
