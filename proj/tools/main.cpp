// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "votedet/detector.hpp"
#include "votedet/evaluation.hpp"
#include "votedet/frame.hpp"
#include "votedet/parallel.hpp"
#include "votedet/synthetic.hpp"
#include "votedet/trainer.hpp"

namespace fs = std::filesystem;
using namespace votedet;

namespace {

struct DatasetOptions {
  std::string root;
  std::string velodyne_dir = "velodyne";
  std::string label_dir = "label_2";
  std::string calib_dir = "calib";
  std::string frames;  // "000000,000003" or "0-49"; empty: every velodyne file
  double image_width = 0.0;   // 0: sidecar image_size.txt, else benchmark default
  double image_height = 0.0;
};

void add_dataset_flags(CLI::App* cmd, DatasetOptions& opts, bool required_root = true) {
  auto* root = cmd->add_option("--data", opts.root, "dataset root directory");
  if (required_root) root->required();
  cmd->add_option("--velodyne-dir", opts.velodyne_dir, "point cloud subdirectory");
  cmd->add_option("--label-dir", opts.label_dir, "label subdirectory");
  cmd->add_option("--calib-dir", opts.calib_dir, "calibration subdirectory");
  cmd->add_option("--frames", opts.frames, "frame ids: comma list or inclusive range a-b");
  cmd->add_option("--image-width", opts.image_width, "image width in pixels");
  cmd->add_option("--image-height", opts.image_height, "image height in pixels");
}

void add_grid_flags(CLI::App* cmd, GridConfig& grid) {
  cmd->add_option("--cell-size", grid.cell_size, "cell edge length in meters");
  cmd->add_option("--origin-x", grid.origin.x, "grid origin x (meters)");
  cmd->add_option("--origin-y", grid.origin.y, "grid origin y (meters)");
  cmd->add_option("--origin-z", grid.origin.z, "grid origin z (meters)");
  cmd->add_option("--extent-x", grid.extent_x, "cells along x");
  cmd->add_option("--extent-y", grid.extent_y, "cells along y");
  cmd->add_option("--extent-z", grid.extent_z, "cells along z");
  cmd->add_option("--bins", grid.angular_bins, "orientation bins over [0, pi)");
}

std::vector<std::string> expand_frame_ids(const DatasetOptions& opts) {
  std::vector<std::string> ids;
  if (opts.frames.empty()) {
    const fs::path dir = fs::path(opts.root) / opts.velodyne_dir;
    if (!fs::exists(dir)) throw std::runtime_error("missing directory: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".bin") ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }
  const auto dash = opts.frames.find('-');
  if (dash != std::string::npos && opts.frames.find(',') == std::string::npos) {
    const int first = std::stoi(opts.frames.substr(0, dash));
    const int last = std::stoi(opts.frames.substr(dash + 1));
    char buf[16];
    for (int i = first; i <= last; ++i) {
      std::snprintf(buf, sizeof(buf), "%06d", i);
      ids.push_back(buf);
    }
    return ids;
  }
  std::string token;
  std::istringstream ss(opts.frames);
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) ids.push_back(token);
  }
  return ids;
}

void apply_image_size(Frame& frame, const DatasetOptions& opts) {
  double w = opts.image_width, h = opts.image_height;
  if (w <= 0.0 || h <= 0.0) {
    std::ifstream sidecar(fs::path(opts.root) / "image_size.txt");
    double sw = 0.0, sh = 0.0;
    if (sidecar >> sw >> sh) {
      w = sw;
      h = sh;
    }
  }
  if (w > 0.0 && h > 0.0) {
    frame.calib.image_width = w;
    frame.calib.image_height = h;
  }
}

std::vector<Frame> load_frames(const DatasetOptions& opts) {
  const std::vector<std::string> ids = expand_frame_ids(opts);
  std::vector<Frame> frames;
  frames.reserve(ids.size());
  for (const std::string& id : ids) {
    Frame frame = load_frame(opts.root, id, opts.velodyne_dir, opts.label_dir, opts.calib_dir);
    apply_image_size(frame, opts);
    frames.push_back(std::move(frame));
  }
  return frames;
}

int run_synth(const SyntheticConfig& config, const std::string& out, int first_index) {
  write_synthetic_dataset(config, out, first_index);
  std::cout << "wrote " << config.num_frames << " synthetic frames under " << out << "\n";
  return 0;
}

int run_voxelize(const DatasetOptions& data, const GridConfig& grid, const std::string& dump) {
  grid.validate();
  const std::vector<std::string> ids = expand_frame_ids(data);
  if (ids.empty()) throw std::runtime_error("no frames selected");
  for (const std::string& id : ids) {
    const PointCloud cloud =
        read_velodyne_bin(data.root + "/" + data.velodyne_dir + "/" + id + ".bin");
    const SparseGrid sparse = discretize(cloud, grid);
    const double fraction =
        static_cast<double>(sparse.occupied_count()) / static_cast<double>(grid.volume());

    std::array<double, kPointFeatureChannels> mean{};
    for (size_t pos = 0; pos < sparse.occupied_count(); ++pos) {
      const auto v = sparse.values(pos);
      for (int c = 0; c < kPointFeatureChannels; ++c) mean[c] += v[c];
    }
    if (sparse.occupied_count() > 0) {
      for (double& m : mean) m /= static_cast<double>(sparse.occupied_count());
    }

    nlohmann::json j;
    j["frame"] = id;
    j["points"] = cloud.size();
    j["occupied_cells"] = sparse.occupied_count();
    j["occupancy_fraction"] = fraction;
    j["mean_features"] = mean;
    std::cout << j.dump() << "\n";

    if (!dump.empty()) {
      std::ofstream out(dump + "." + id, std::ios::binary | std::ios::trunc);
      const uint64_t count = sparse.occupied_count();
      out.write(reinterpret_cast<const char*>(&count), sizeof(count));
      for (size_t pos = 0; pos < count; ++pos) {
        const CellKey key = sparse.keys()[pos];
        const int32_t idx[3] = {key_l(key), key_m(key), key_n(key)};
        out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
        const auto v = sparse.values(pos);
        out.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
      }
    }
  }
  return 0;
}

int run_train(const DatasetOptions& data, GridConfig grid, TrainConfig config,
              const std::string& class_name, const std::string& out_model,
              const std::string& out_log, int synthetic_frames, uint64_t synthetic_seed,
              const std::string& resume_path) {
  std::vector<Frame> frames;
  std::string effective_class = class_name;
  if (synthetic_frames > 0) {
    SyntheticConfig synth;
    synth.seed = synthetic_seed;
    synth.num_frames = synthetic_frames;
    frames = generate_synthetic_frames(synth, 0, synthetic_frames);
    grid = synth.grid;
    effective_class = synth.class_name;
  } else {
    frames = load_frames(data);
  }

  LoadedModel resume_model;
  const LoadedModel* resume = nullptr;
  if (!resume_path.empty()) {
    resume_model = load_model(resume_path);
    grid = resume_model.metadata.grid;
    effective_class = resume_model.metadata.class_box.class_name;
    resume = &resume_model;
  }

  const FitResult result = fit(frames, grid, config, effective_class, resume);
  save_model(result.best_network, result.metadata, out_model);
  save_model(result.final_network, result.metadata, out_model + ".final");
  if (!out_log.empty()) write_training_log(result.log, out_log);

  nlohmann::json j;
  j["best_validation_ap"] = result.best_validation_ap;
  j["best_epoch"] = result.best_epoch;
  j["epochs"] = result.log.size();
  j["model"] = out_model;
  std::cout << j.dump() << "\n";
  return 0;
}

int run_detect(const DatasetOptions& data, const std::string& model_path,
               const std::string& out_dir, std::vector<float> thresholds, int bins,
               int workers, float nms_iou) {
  const LoadedModel model = load_model(model_path);
  if (thresholds.empty()) thresholds.push_back(1.0f);
  std::sort(thresholds.begin(), thresholds.end());

  const std::vector<std::string> ids = expand_frame_ids(data);
  const bool sweep = thresholds.size() > 1;
  for (const float threshold : thresholds) {
    char suffix[32] = "";
    if (sweep) std::snprintf(suffix, sizeof(suffix), "_t%.3f", threshold);
    const fs::path dir = fs::path(out_dir + suffix);
    fs::create_directories(dir);

    for (const std::string& id : ids) {
      Frame frame =
          load_frame(data.root, id, data.velodyne_dir, data.label_dir, data.calib_dir);
      apply_image_size(frame, data);

      DetectOptions options;
      options.threshold = threshold;
      options.bins = bins;
      options.workers = workers;
      options.nms_iou = nms_iou;
      const std::vector<Detection> dets =
          detect_frame(model.network, model.metadata, frame.cloud, options);

      std::vector<FrameLabel> labels;
      nlohmann::json jdets = nlohmann::json::array();
      for (const Detection& det : dets) {
        const auto label = detection_to_label(det.class_name, det.box(), det.score,
                                              frame.calib);
        if (!label) continue;  // outside the image
        labels.push_back(*label);
        jdets.push_back({{"class", det.class_name},
                         {"score", det.score},
                         {"center", {det.center.x, det.center.y, det.center.z}},
                         {"yaw", det.yaw},
                         {"dims", {det.length, det.width, det.height}}});
      }
      write_labels(labels, (dir / (id + ".txt")).string());
      std::ofstream jout(dir / (id + ".json"), std::ios::trunc);
      jout << jdets.dump(2) << "\n";
    }
    std::cout << "wrote detections for " << ids.size() << " frames to " << dir.string()
              << "\n";
  }
  return 0;
}

int run_eval(const std::string& det_dir, const DatasetOptions& data,
             const std::string& class_name, const std::string& out_prefix) {
  const std::vector<std::string> ids = expand_frame_ids(data);
  if (ids.empty()) throw std::runtime_error("no frames selected");
  const double iou = iou_threshold_for_class(class_name);

  nlohmann::json summary;
  for (const DifficultySpec& difficulty : {kEasy, kModerate, kHard}) {
    std::vector<FrameMatches> matches;
    matches.reserve(ids.size());
    for (const std::string& id : ids) {
      const auto labels = read_labels(data.root + "/" + data.label_dir + "/" + id + ".txt");
      const fs::path det_path = fs::path(det_dir) / (id + ".txt");
      std::vector<FrameLabel> dets;
      if (fs::exists(det_path)) dets = read_labels(det_path.string());
      matches.push_back(match_detections(dets, labels, class_name, iou, difficulty));
    }
    const APResult result = average_precision(matches);

    if (!out_prefix.empty()) {
      std::ofstream csv(out_prefix + "_" + difficulty.name + ".csv", std::ios::trunc);
      csv << "score,recall,precision\n";
      for (const PRPoint& p : result.curve) {
        csv << p.score << "," << p.recall << "," << p.precision << "\n";
      }
    }
    if (result.ap.has_value()) {
      summary[difficulty.name] = *result.ap;
      std::printf("%-9s AP: %.4f  (positives: %d)\n", difficulty.name.c_str(), *result.ap,
                  result.num_positives);
    } else {
      summary[difficulty.name] = nullptr;
      std::printf("%-9s AP: undefined (no positives)\n", difficulty.name.c_str());
    }
  }
  if (!out_prefix.empty()) {
    std::ofstream jout(out_prefix + ".json", std::ios::trunc);
    summary["class"] = class_name;
    jout << summary.dump(2) << "\n";
  }
  return 0;
}

int run_bench(const DatasetOptions& data, const std::string& model_path, int repetitions,
              float threshold, int workers, const std::string& out_csv, double ap_slot) {
  const LoadedModel model = load_model(model_path);
  const std::vector<std::string> ids = expand_frame_ids(data);
  if (ids.empty() || repetitions < 1) throw std::runtime_error("bench needs frames and reps");

  std::vector<PointCloud> clouds;
  clouds.reserve(ids.size());
  for (const std::string& id : ids) {
    clouds.push_back(read_velodyne_bin(data.root + "/" + data.velodyne_dir + "/" + id +
                                       ".bin"));
  }

  std::vector<double> times;
  std::vector<double> occupancy_sum;
  for (int rep = 0; rep < repetitions; ++rep) {
    for (const PointCloud& cloud : clouds) {
      DetectOptions options;
      options.threshold = threshold;
      options.workers = workers;
      options.collect_stats = true;
      DetectStats stats;
      const auto start = std::chrono::steady_clock::now();
      (void)detect_frame(model.network, model.metadata, cloud, options, &stats);
      times.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      if (occupancy_sum.size() < stats.mean_layer_occupancy.size()) {
        occupancy_sum.resize(stats.mean_layer_occupancy.size(), 0.0);
      }
      for (size_t c = 0; c < stats.mean_layer_occupancy.size(); ++c) {
        occupancy_sum[c] += stats.mean_layer_occupancy[c];
      }
    }
  }

  const double mean = std::accumulate(times.begin(), times.end(), 0.0) / times.size();
  double var = 0.0;
  for (const double t : times) var += (t - mean) * (t - mean);
  const double stddev = times.size() > 1 ? std::sqrt(var / (times.size() - 1)) : 0.0;

  std::printf("frames: %zu  reps: %d  detection time: %.1f ms +- %.1f ms per frame\n",
              ids.size(), repetitions, 1e3 * mean, 1e3 * stddev);
  for (size_t c = 0; c < occupancy_sum.size(); ++c) {
    std::printf("layer %zu mean occupied cells: %.1f\n", c,
                occupancy_sum[c] / static_cast<double>(times.size()));
  }

  if (!out_csv.empty()) {
    std::ofstream csv(out_csv, std::ios::trunc);
    csv << "penalty,runtime_ms,runtime_std_ms,ap";
    for (size_t c = 0; c < occupancy_sum.size(); ++c) csv << ",layer" << c << "_occupied";
    csv << "\n";
    csv << model.metadata.sparsity_penalty << "," << 1e3 * mean << "," << 1e3 * stddev << ",";
    if (ap_slot >= 0.0) csv << ap_slot;
    for (size_t c = 0; c < occupancy_sum.size(); ++c) {
      csv << "," << occupancy_sum[c] / static_cast<double>(times.size());
    }
    csv << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse voting convnet lidar detector"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file (flags override)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  SyntheticConfig synth;
  std::string synth_out;
  int synth_first = 0;
  synth_cmd->add_option("--out", synth_out, "output dataset root")->required();
  synth_cmd->add_option("--frames", synth.num_frames, "number of frames");
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--first-index", synth_first, "first frame id");

  // voxelize
  auto* vox_cmd = app.add_subcommand("voxelize", "discretize frames and print statistics");
  DatasetOptions vox_data;
  GridConfig vox_grid;
  std::string vox_dump;
  add_dataset_flags(vox_cmd, vox_data);
  add_grid_flags(vox_cmd, vox_grid);
  vox_cmd->add_option("--dump", vox_dump, "binary grid dump path prefix");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a class-specific detector");
  DatasetOptions train_data;
  GridConfig train_grid;
  TrainConfig train_config;
  std::string train_class = "Car";
  std::string train_out = "model.vdm";
  std::string train_log;
  int train_synth = 0;
  uint64_t train_synth_seed = 1;
  std::string model_kind = "D";
  add_dataset_flags(train_cmd, train_data, /*required_root=*/false);
  add_grid_flags(train_cmd, train_grid);
  train_cmd->add_option("--class", train_class, "object class to train");
  train_cmd->add_option("--out", train_out, "output model path")->required();
  train_cmd->add_option("--log", train_log, "training log path (JSON lines)");
  train_cmd->add_option("--model", model_kind, "architecture kind: A, B, C, D, or E");
  train_cmd->add_option("--epochs", train_config.epochs, "training epochs");
  train_cmd->add_option("--batch-size", train_config.batch_size, "examples per batch");
  train_cmd->add_option("--learning-rate", train_config.learning_rate, "SGD learning rate");
  train_cmd->add_option("--momentum", train_config.momentum, "SGD momentum");
  train_cmd->add_option("--weight-decay", train_config.l2_weight_decay, "L2 weight decay");
  train_cmd->add_option("--sparsity-penalty", train_config.l1_sparsity_penalty,
                        "L1 activation penalty");
  train_cmd->add_option("--mining-period", train_config.mining_period_epochs,
                        "epochs between hard negative mining rounds (0 disables)");
  train_cmd->add_option("--mined-per-frame", train_config.mined_per_frame,
                        "false positives mined per frame");
  train_cmd->add_option("--mining-threshold", train_config.mining_threshold,
                        "detection threshold during mining");
  train_cmd->add_option("--seed", train_config.seed, "rng seed");
  train_cmd->add_option("--hidden-filters", train_config.hidden_filters,
                        "filters per hidden layer");
  train_cmd->add_option("--validation-fraction", train_config.validation_fraction,
                        "held-out fraction of frames");
  train_cmd->add_option("--validation-period", train_config.validation_period_epochs,
                        "epochs between validation passes");
  train_cmd->add_option("--validation-threshold", train_config.validation_threshold,
                        "detection threshold for validation sweeps");
  train_cmd->add_option("--workers", train_config.workers, "parallel workers");
  train_cmd->add_option("--synthetic", train_synth,
                        "train on N generated synthetic frames instead of --data");
  train_cmd->add_option("--synthetic-seed", train_synth_seed, "synthetic generator seed");
  std::string train_resume;
  train_cmd->add_option("--resume", train_resume, "model file to restart training from");

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "run detection over frames");
  DatasetOptions detect_data;
  std::string detect_model;
  std::string detect_out = "detections";
  std::vector<float> detect_thresholds;
  int detect_bins = 0;
  int detect_workers = default_worker_count();
  float detect_nms = 0.25f;
  add_dataset_flags(detect_cmd, detect_data);
  detect_cmd->add_option("--model", detect_model, "model file")->required();
  detect_cmd->add_option("--out", detect_out, "output directory");
  detect_cmd->add_option("--threshold", detect_thresholds,
                         "detection threshold(s); several values emit one directory each");
  detect_cmd->add_option("--bins", detect_bins, "orientation bins (0: model default)");
  detect_cmd->add_option("--workers", detect_workers, "parallel orientation workers");
  detect_cmd->add_option("--nms-iou", detect_nms, "3D NMS IoU threshold");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate detections against ground truth");
  DatasetOptions eval_data;
  std::string eval_dets;
  std::string eval_class = "Car";
  std::string eval_out;
  add_dataset_flags(eval_cmd, eval_data);
  eval_cmd->add_option("--detections", eval_dets, "directory of detection label files")
      ->required();
  eval_cmd->add_option("--class", eval_class, "class to evaluate");
  eval_cmd->add_option("--out", eval_out, "report path prefix (CSV + JSON)");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "measure detection time and sparsity");
  DatasetOptions bench_data;
  std::string bench_model;
  int bench_reps = 1;
  float bench_threshold = 1.0f;
  int bench_workers = default_worker_count();
  std::string bench_csv;
  double bench_ap = -1.0;
  add_dataset_flags(bench_cmd, bench_data);
  bench_cmd->add_option("--model", bench_model, "model file")->required();
  bench_cmd->add_option("--reps", bench_reps, "repetitions over the frame list");
  bench_cmd->add_option("--threshold", bench_threshold, "detection threshold");
  bench_cmd->add_option("--workers", bench_workers, "parallel orientation workers");
  bench_cmd->add_option("--out", bench_csv, "CSV report path");
  bench_cmd->add_option("--ap", bench_ap, "AP value to record in the report");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return run_synth(synth, synth_out, synth_first);
    if (vox_cmd->parsed()) return run_voxelize(vox_data, vox_grid, vox_dump);
    if (train_cmd->parsed()) {
      train_config.model_kind = model_kind.empty() ? 'D' : model_kind[0];
      return run_train(train_data, train_grid, train_config, train_class, train_out,
                       train_log, train_synth, train_synth_seed, train_resume);
    }
    if (detect_cmd->parsed()) {
      return run_detect(detect_data, detect_model, detect_out, detect_thresholds,
                        detect_bins, detect_workers, detect_nms);
    }
    if (eval_cmd->parsed()) return run_eval(eval_dets, eval_data, eval_class, eval_out);
    if (bench_cmd->parsed()) {
      return run_bench(bench_data, bench_model, bench_reps, bench_threshold, bench_workers,
                       bench_csv, bench_ap);
    }
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
