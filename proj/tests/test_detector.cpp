// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "votedet/detector.hpp"
#include "votedet/voxel_grid.hpp"

using namespace votedet;

namespace {

// Points on the shell of a box (four sides + top), on a fixed lattice.
PointCloud box_shell(const Box3D& box, double step = 0.08) {
  PointCloud cloud;
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  auto push = [&](double lx, double ly, double lz) {
    cloud.points.push_back({box.center.x + c * lx - s * ly, box.center.y + s * lx + c * ly,
                            box.center.z + lz, 0.5});
  };
  const double hl = 0.5 * box.length, hw = 0.5 * box.width, hh = 0.5 * box.height;
  for (double a = -hl; a <= hl; a += step) {
    for (double b = -hh; b <= hh; b += step) {
      push(a, -hw, b);
      push(a, hw, b);
    }
  }
  for (double a = -hw; a <= hw; a += step) {
    for (double b = -hh; b <= hh; b += step) {
      push(-hl, a, b);
      push(hl, a, b);
    }
  }
  for (double a = -hl; a <= hl; a += step) {
    for (double b = -hw; b <= hw; b += step) push(a, b, hh);
  }
  return cloud;
}

GridConfig scene_grid() {
  GridConfig cfg;
  cfg.cell_size = 0.2f;
  cfg.origin = {-6.0f, -6.0f, -0.4f};
  cfg.extent_x = 60;
  cfg.extent_y = 60;
  cfg.extent_z = 16;
  cfg.angular_bins = 4;
  return cfg;
}

// A hand-built matched filter for a solid box: +1 on the occupancy channel
// at every kernel offset inside the box, zero elsewhere; score = number of
// occupied cells within the box window.
ModelMetadata template_meta(const ClassBoxSpec& box) {
  ModelMetadata meta;
  meta.grid = scene_grid();
  meta.class_box = box;
  meta.model_kind = 'A';
  return meta;
}

Network template_network(const ClassBoxSpec& box, float cell) {
  const Architecture arch = make_architecture('A', box, cell);
  FilterBank bank(arch.layers[0].kernel_x, arch.layers[0].kernel_y, arch.layers[0].kernel_z,
                  kPointFeatureChannels, 1);
  const int bx = static_cast<int>(std::ceil(0.5f * box.length / cell));
  const int by = static_cast<int>(std::ceil(0.5f * box.width / cell));
  const int bz = static_cast<int>(std::ceil(0.5f * box.height / cell));
  for (int i = -bank.half_x(); i <= bank.half_x(); ++i) {
    for (int j = -bank.half_y(); j <= bank.half_y(); ++j) {
      for (int k = -bank.half_z(); k <= bank.half_z(); ++k) {
        const bool inside = std::abs(i) <= bx && std::abs(j) <= by && std::abs(k) <= bz;
        bank.weight(i, j, k, 0, 0) = inside ? 1.0f : -0.25f;
      }
    }
  }
  return Network(arch, {std::move(bank)});
}

}  // namespace

TEST_CASE("class box fitting uses nearest-rank percentiles") {
  std::vector<Box3D> identical(100, Box3D{{0, 0, 0}, 3.5f, 1.5f, 1.4f, 0.0f});
  const ClassBoxSpec same = fit_class_box("Car", identical);
  CHECK(same.length == 3.5f);
  CHECK(same.width == 1.5f);
  CHECK(same.height == 1.4f);

  std::vector<Box3D> spread;
  for (int i = 1; i <= 100; ++i) {
    spread.push_back({{0, 0, 0}, static_cast<float>(i), 1.0f, 1.0f, 0.0f});
  }
  CHECK(fit_class_box("Car", spread, 95.0).length == 95.0f);
  CHECK(fit_class_box("Car", spread, 100.0).length == 100.0f);
  CHECK_THROWS_AS(fit_class_box("Car", {}), std::invalid_argument);
}

TEST_CASE("nms keeps the strongest of duplicate boxes and leaves disjoint ones") {
  Detection a;
  a.class_name = "Box";
  a.center = {1.0f, 1.0f, 0.5f};
  a.length = 2.0f;
  a.width = 1.0f;
  a.height = 1.0f;
  a.score = 0.9f;
  Detection b = a;
  b.score = 0.8f;
  Detection c = a;
  c.center = {8.0f, 8.0f, 0.5f};
  c.score = 0.7f;

  const auto single = nms_3d({a});
  CHECK(single.size() == 1);

  const auto pruned = nms_3d({b, a, c});
  REQUIRE(pruned.size() == 2);
  CHECK(pruned[0].score == 0.9f);
  CHECK(pruned[1].score == 0.7f);
}

TEST_CASE("nms output is a score-sorted subset with bounded pairwise overlap") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<float> pos(-4.0f, 4.0f), score(0.1f, 3.0f),
      yaw(0.0f, 3.14f);
  std::vector<Detection> dets;
  for (int i = 0; i < 40; ++i) {
    Detection d;
    d.class_name = "Box";
    d.center = {pos(rng), pos(rng), 0.75f};
    d.length = 2.0f;
    d.width = 1.0f;
    d.height = 1.5f;
    d.yaw = yaw(rng);
    d.score = score(rng);
    dets.push_back(d);
  }
  const auto kept = nms_3d(dets, 0.25f);
  CHECK(kept.size() <= dets.size());
  for (size_t i = 0; i < kept.size(); ++i) {
    if (i > 0) CHECK(kept[i - 1].score >= kept[i].score);
    for (size_t j = i + 1; j < kept.size(); ++j) {
      CHECK(box_iou_3d(kept[i].box(), kept[j].box()) <= 0.25);
    }
  }
}

TEST_CASE("empty cloud and infinite threshold produce no detections") {
  const ClassBoxSpec box{"Box", 2.0f, 1.0f, 0.8f};
  const Network net = template_network(box, 0.2f);
  const ModelMetadata meta = template_meta(box);

  DetectOptions options;
  options.threshold = 10.0f;
  CHECK(detect_frame(net, meta, PointCloud{}, options).empty());

  const Box3D planted{{1.3f, -0.7f, 0.35f}, 2.0f, 1.0f, 0.8f, 0.0f};
  options.threshold = std::numeric_limits<float>::infinity();
  CHECK(detect_frame(net, meta, box_shell(planted), options).empty());

  options.threshold = 0.0f;
  CHECK_THROWS_AS(detect_frame(net, meta, PointCloud{}, options), std::invalid_argument);
}

TEST_CASE("plant-and-recover with a hand-built template network") {
  const ClassBoxSpec box{"Box", 2.0f, 1.0f, 0.8f};
  const Network net = template_network(box, 0.2f);
  const ModelMetadata meta = template_meta(box);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<float> pos(-3.5f, 3.5f), yawd(0.0f, 3.1f);
  int recovered = 0;
  const int trials = 12;
  for (int t = 0; t < trials; ++t) {
    const Box3D planted{{pos(rng), pos(rng), 0.33f}, box.length, box.width, box.height,
                        yawd(rng)};
    const PointCloud cloud = box_shell(planted);

    DetectOptions options;
    // The template counts occupied cells inside the box window; the shell
    // occupies a couple hundred cells, so a generous margin works.
    options.threshold = 60.0f;
    const auto dets = detect_frame(net, meta, cloud, options);
    if (dets.size() != 1) continue;
    const float dx = dets[0].center.x - planted.center.x;
    const float dy = dets[0].center.y - planted.center.y;
    const float dz = dets[0].center.z - planted.center.z;
    const float diag = 0.2f * std::sqrt(3.0f);
    if (std::sqrt(dx * dx + dy * dy + dz * dz) <= diag) ++recovered;
  }
  CHECK(recovered >= trials - 1);
}

TEST_CASE("bin-zero detection agrees with direct forward plus threshold") {
  const ClassBoxSpec box{"Box", 2.0f, 1.0f, 0.8f};
  const Network net = template_network(box, 0.2f);
  const ModelMetadata meta = template_meta(box);
  const Box3D planted{{0.9f, 0.5f, 0.33f}, 2.0f, 1.0f, 0.8f, 0.0f};
  const PointCloud cloud = box_shell(planted);

  DetectOptions options;
  options.threshold = 60.0f;
  options.bins = 1;  // only the unrotated pass
  options.nms_iou = 1.1f;  // effectively disable suppression
  options.max_candidates = 1 << 20;
  options.max_output = 1 << 20;
  const auto dets = detect_frame(net, meta, cloud, options);

  const SparseGrid scores = net.forward(discretize(cloud, meta.grid));
  size_t above = 0;
  for (size_t pos = 0; pos < scores.occupied_count(); ++pos) {
    above += scores.values(pos)[0] > options.threshold;
  }
  CHECK(dets.size() == above);
}

TEST_CASE("rotating the scene by one bin width preserves the detection count") {
  const ClassBoxSpec box{"Box", 2.0f, 1.0f, 0.8f};
  const Network net = template_network(box, 0.2f);
  const ModelMetadata meta = template_meta(box);
  const float bin = static_cast<float>(M_PI) / 4.0f;  // 4 bins

  const Box3D planted{{1.7f, 0.4f, 0.33f}, 2.0f, 1.0f, 0.8f, 0.3f};
  const PointCloud cloud = box_shell(planted);
  const PointCloud rotated = rotate_points(cloud, bin);

  DetectOptions options;
  options.threshold = 60.0f;
  const auto base = detect_frame(net, meta, cloud, options);
  const auto spun = detect_frame(net, meta, rotated, options);
  CHECK(base.size() == spun.size());
  REQUIRE(base.size() == 1);
  // The recovered center rotates with the scene.
  const float c = std::cos(bin), s = std::sin(bin);
  CHECK(spun[0].center.x ==
        doctest::Approx(c * base[0].center.x - s * base[0].center.y).epsilon(0.25));
  CHECK(spun[0].center.y ==
        doctest::Approx(s * base[0].center.x + c * base[0].center.y).epsilon(0.25));
}
