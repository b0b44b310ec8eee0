// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace votedet {

Calibration synthetic_calibration(const SyntheticConfig& config) {
  Calibration calib;
  calib.image_width = config.image_width;
  calib.image_height = config.image_height;

  // Camera straight above the origin looking down: x_cam = y_world,
  // y_cam = x_world, z_cam = -(z_world - height).
  calib.tr_velo_to_cam = {0.0, 1.0, 0.0, 0.0,
                          1.0, 0.0, 0.0, 0.0,
                          0.0, 0.0, -1.0, config.camera_height};
  calib.r0 = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0};

  // Focal length chosen so the grid footprint fills the image at ground
  // level.
  const double half_span = std::max(
      std::max(std::abs(config.grid.origin.x),
               std::abs(config.grid.origin.x + config.grid.extent_x * config.grid.cell_size)),
      std::max(std::abs(config.grid.origin.y),
               std::abs(config.grid.origin.y + config.grid.extent_y * config.grid.cell_size)));
  const double f = 0.5 * config.image_width * config.camera_height / half_span;
  calib.p2 = {f, 0.0, config.image_width / 2.0, 0.0,
              0.0, f, config.image_height / 2.0, 0.0,
              0.0, 0.0, 1.0, 0.0};
  return calib;
}

namespace {

struct SceneObject {
  Box3D box;
  bool positive = false;
};

// Uniform points on the rectangle spanned by (du, dv) around `base`, with a
// touch of off-plane noise.
void sample_face(std::mt19937_64& rng, const Vec3f& base, const Vec3f& du, const Vec3f& dv,
                 const Vec3f& normal, double density, float reflectance_base,
                 std::vector<Point>& out) {
  const float area = std::sqrt(du.x * du.x + du.y * du.y + du.z * du.z) *
                     std::sqrt(dv.x * dv.x + dv.y * dv.y + dv.z * dv.z);
  std::poisson_distribution<int> count_dist(std::max(0.2, density * area));
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::normal_distribution<float> noise(0.0f, 0.012f);
  std::normal_distribution<float> rnoise(0.0f, 0.04f);
  const int count = count_dist(rng);
  for (int i = 0; i < count; ++i) {
    const float a = unit(rng);
    const float b = unit(rng);
    const float off = noise(rng);
    Point p;
    p.x = base.x + a * du.x + b * dv.x + off * normal.x;
    p.y = base.y + a * du.y + b * dv.y + off * normal.y;
    p.z = base.z + a * du.z + b * dv.z + off * normal.z;
    p.reflectance = std::clamp(reflectance_base + rnoise(rng), 0.02f, 0.98f);
    out.push_back(p);
  }
}

// Surface-sampled cuboid shell: four side faces plus the top when asked.
void sample_box_shell(std::mt19937_64& rng, const Box3D& box, double density, bool with_top,
                      float reflectance, std::vector<Point>& out) {
  const float c = std::cos(box.yaw);
  const float s = std::sin(box.yaw);
  auto world = [&](float lx, float ly, float lz) {
    return Vec3f{box.center.x + c * lx - s * ly, box.center.y + s * lx + c * ly,
                 box.center.z + lz};
  };
  const float hl = 0.5f * box.length;
  const float hw = 0.5f * box.width;
  const float hh = 0.5f * box.height;
  const Vec3f ex = Vec3f{c, s, 0.0f};
  const Vec3f ey = Vec3f{-s, c, 0.0f};
  const Vec3f ez = Vec3f{0.0f, 0.0f, 1.0f};

  // Side faces: +-x and +-y in the box frame, spanning the full height.
  sample_face(rng, world(hl, -hw, -hh), ey * (2.0f * hw), ez * (2.0f * hh), ex, density,
              reflectance, out);
  sample_face(rng, world(-hl, -hw, -hh), ey * (2.0f * hw), ez * (2.0f * hh), ex, density,
              reflectance, out);
  sample_face(rng, world(-hl, hw, -hh), ex * (2.0f * hl), ez * (2.0f * hh), ey, density,
              reflectance, out);
  sample_face(rng, world(-hl, -hw, -hh), ex * (2.0f * hl), ez * (2.0f * hh), ey, density,
              reflectance, out);
  if (with_top) {
    sample_face(rng, world(-hl, -hw, hh), ex * (2.0f * hl), ey * (2.0f * hw), ez, density,
                reflectance, out);
  }
}

bool placement_ok(const std::vector<SceneObject>& placed, const Box3D& candidate) {
  for (const SceneObject& obj : placed) {
    const float dx = obj.box.center.x - candidate.center.x;
    const float dy = obj.box.center.y - candidate.center.y;
    const float reach = 0.5f * std::sqrt(obj.box.length * obj.box.length +
                                         obj.box.width * obj.box.width) +
                        0.5f * std::sqrt(candidate.length * candidate.length +
                                         candidate.width * candidate.width) +
                        0.9f;
    if (dx * dx + dy * dy < reach * reach) return false;
  }
  return true;
}

}  // namespace

Frame generate_synthetic_frame(const SyntheticConfig& config, int index) {
  std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ull + static_cast<uint64_t>(index) + 1);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);

  const Calibration calib = synthetic_calibration(config);
  Frame frame;
  {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", index);
    frame.id = buf;
  }
  frame.calib = calib;

  std::vector<SceneObject> objects;
  auto place = [&](float length, float width, float height, bool positive) {
    for (int attempt = 0; attempt < 60; ++attempt) {
      const float r = config.placement_radius * std::sqrt(unit(rng));
      const float phi = 2.0f * static_cast<float>(M_PI) * unit(rng);
      const float yaw = static_cast<float>(M_PI) * unit(rng);
      Box3D box{{r * std::cos(phi), r * std::sin(phi), 0.5f * height}, length, width, height,
                yaw};
      if (!placement_ok(objects, box)) continue;
      objects.push_back({box, positive});
      return true;
    }
    return false;
  };

  std::uniform_int_distribution<int> pos_count(config.min_positives, config.max_positives);
  std::uniform_int_distribution<int> dis_count(config.min_distractors, config.max_distractors);
  const int positives = pos_count(rng);
  const int distractors = dis_count(rng);

  for (int i = 0; i < positives; ++i) {
    const float length = 3.4f + 0.6f * unit(rng);
    const float width = 1.5f + 0.3f * unit(rng);
    const float height = 1.35f + 0.25f * unit(rng);
    place(length, width, height, true);
  }

  std::uniform_int_distribution<int> kind_dist(0, 3);
  for (int i = 0; i < distractors; ++i) {
    const int kind = kind_dist(rng);
    if (kind == 0) {
      // Pillar.
      place(0.15f + 0.1f * unit(rng), 0.15f + 0.1f * unit(rng), 1.2f + 1.0f * unit(rng),
            false);
    } else if (kind == 1) {
      // Single wall.
      place(1.6f + 2.6f * unit(rng), 0.08f + 0.08f * unit(rng), 1.1f + 0.7f * unit(rng),
            false);
    } else if (kind == 2) {
      // A pair of parallel walls at a random spacing; placed as one footprint
      // so the pair stays together.
      const float length = 2.2f + 1.8f * unit(rng);
      const float spacing = 0.8f + 1.8f * unit(rng);
      const float height = 1.1f + 0.7f * unit(rng);
      if (place(length, spacing + 0.12f, height, false)) {
        const Box3D outline = objects.back().box;
        objects.pop_back();
        const float c = std::cos(outline.yaw);
        const float s = std::sin(outline.yaw);
        for (const float side : {-0.5f, 0.5f}) {
          Box3D wall = outline;
          wall.width = 0.1f;
          wall.center.x = outline.center.x - s * side * spacing;
          wall.center.y = outline.center.y + c * side * spacing;
          objects.push_back({wall, false});
        }
      }
    } else {
      // Corner fragment: two short perpendicular walls meeting at a point.
      const float arm_a = 1.0f + 2.0f * unit(rng);
      const float arm_b = 1.0f + 2.0f * unit(rng);
      const float height = 1.1f + 0.6f * unit(rng);
      if (place(std::max(arm_a, arm_b), std::max(arm_a, arm_b), height, false)) {
        const Box3D outline = objects.back().box;
        objects.pop_back();
        const float c = std::cos(outline.yaw);
        const float s = std::sin(outline.yaw);
        // Arms extend from the outline center along the local +x and +y axes.
        Box3D wall_a = outline;
        wall_a.length = arm_a;
        wall_a.width = 0.1f;
        wall_a.center.x += c * 0.5f * arm_a;
        wall_a.center.y += s * 0.5f * arm_a;
        Box3D wall_b = outline;
        wall_b.length = 0.1f;
        wall_b.width = arm_b;
        wall_b.center.x += -s * 0.5f * arm_b;
        wall_b.center.y += c * 0.5f * arm_b;
        objects.push_back({wall_a, false});
        objects.push_back({wall_b, false});
      }
    }
  }

  // Ground plane speckle.
  const float min_x = config.grid.origin.x;
  const float min_y = config.grid.origin.y;
  const float span_x = config.grid.extent_x * config.grid.cell_size;
  const float span_y = config.grid.extent_y * config.grid.cell_size;
  const double ground_area = static_cast<double>(span_x) * span_y;
  std::poisson_distribution<int> ground_count(config.ground_density * ground_area);
  std::normal_distribution<float> ground_noise(0.0f, 0.02f);
  const int n_ground = ground_count(rng);
  for (int i = 0; i < n_ground; ++i) {
    Point p;
    p.x = min_x + span_x * unit(rng);
    p.y = min_y + span_y * unit(rng);
    p.z = ground_noise(rng);
    p.reflectance = std::clamp(0.25f + 0.1f * unit(rng), 0.0f, 1.0f);
    frame.cloud.points.push_back(p);
  }

  // Object shells.
  for (const SceneObject& obj : objects) {
    std::uniform_real_distribution<double> dj(1.0 - config.density_jitter,
                                              1.0 + config.density_jitter);
    const double density = config.surface_density * dj(rng);
    const float reflectance = 0.25f + 0.55f * unit(rng);
    sample_box_shell(rng, obj.box, density, obj.positive, reflectance, frame.cloud.points);
  }

  // Labels for the positive class.
  for (const SceneObject& obj : objects) {
    if (!obj.positive) continue;
    FrameLabel label;
    label.type = config.class_name;
    label.truncation = 0.0;
    label.occlusion = 0;
    const auto bbox = project_to_image(obj.box, calib);
    if (!bbox) continue;
    label.bbox = *bbox;
    label.height = obj.box.height;
    label.width = obj.box.width;
    label.length = obj.box.length;
    const auto cam = velo_to_camera(calib, {obj.box.center.x, obj.box.center.y,
                                            obj.box.z_min()});
    label.x = cam[0];
    label.y = cam[1];
    label.z = cam[2];
    double ry = -static_cast<double>(obj.box.yaw) - M_PI / 2.0;
    while (ry > M_PI) ry -= 2.0 * M_PI;
    while (ry < -M_PI) ry += 2.0 * M_PI;
    label.rotation_y = ry;
    label.alpha = ry;
    frame.labels.push_back(std::move(label));
  }
  return frame;
}

std::vector<Frame> generate_synthetic_frames(const SyntheticConfig& config, int first_index,
                                             int count) {
  std::vector<Frame> frames;
  frames.reserve(count);
  for (int i = 0; i < count; ++i) {
    frames.push_back(generate_synthetic_frame(config, first_index + i));
  }
  return frames;
}

void write_synthetic_dataset(const SyntheticConfig& config, const std::string& root,
                             int first_index) {
  namespace fs = std::filesystem;
  fs::create_directories(root + "/velodyne");
  fs::create_directories(root + "/label_2");
  fs::create_directories(root + "/calib");

  const Calibration calib = synthetic_calibration(config);
  for (int i = 0; i < config.num_frames; ++i) {
    const Frame frame = generate_synthetic_frame(config, first_index + i);
    write_velodyne_bin(frame.cloud, root + "/velodyne/" + frame.id + ".bin");
    write_labels(frame.labels, root + "/label_2/" + frame.id + ".txt");
    write_calibration(calib, root + "/calib/" + frame.id + ".txt");
  }
  std::ofstream size_file(root + "/image_size.txt", std::ios::trunc);
  size_file << config.image_width << " " << config.image_height << "\n";
}

}  // namespace votedet
