// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "votedet/kitti.hpp"

using namespace votedet;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Forward-looking identity-style calibration: camera at the lidar origin,
// x_cam = -y_velo, y_cam = -z_velo, z_cam = x_velo.
Calibration simple_calibration(double focal = 700.0) {
  Calibration calib;
  calib.tr_velo_to_cam = {0.0, -1.0, 0.0, 0.0,
                          0.0, 0.0, -1.0, 0.0,
                          1.0, 0.0, 0.0, 0.0};
  calib.r0 = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
  calib.p2 = {focal, 0.0, 621.0, 0.0,
              0.0, focal, 187.5, 0.0,
              0.0, 0.0, 1.0, 0.0};
  return calib;
}

}  // namespace

TEST_CASE("velodyne round trip and corruption handling") {
  const std::string path = temp_path("votedet_points.bin");

  // Single known record.
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    const float rec[4] = {1.0f, 2.0f, 3.0f, 0.5f};
    out.write(reinterpret_cast<const char*>(rec), 16);
  }
  PointCloud cloud = read_velodyne_bin(path);
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.points[0].x == 1.0);
  CHECK(cloud.points[0].y == 2.0);
  CHECK(cloud.points[0].z == 3.0);
  CHECK(cloud.points[0].reflectance == 0.5);

  // Empty file.
  { std::ofstream out(path, std::ios::binary | std::ios::trunc); }
  CHECK(read_velodyne_bin(path).empty());

  // 17-byte file.
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    const char junk[17] = {};
    out.write(junk, 17);
  }
  CHECK_THROWS_AS(read_velodyne_bin(path), std::runtime_error);
  CHECK_THROWS_AS(read_velodyne_bin("/nonexistent/file.bin"), std::runtime_error);
}

TEST_CASE("label parsing: canonical line, DontCare, malformed field") {
  const std::string path = temp_path("votedet_labels.txt");
  {
    std::ofstream out(path, std::ios::trunc);
    out << "Car 0.00 0 1.85 387.63 181.54 423.81 203.12 1.67 1.87 3.69 -16.53 2.39 58.49 "
           "1.57\n";
    out << "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10\n";
  }
  const auto labels = read_labels(path);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].type == "Car");
  CHECK(labels[0].truncation == 0.0);
  CHECK(labels[0].occlusion == 0);
  CHECK(labels[0].alpha == doctest::Approx(1.85));
  CHECK(labels[0].bbox.left == doctest::Approx(387.63));
  CHECK(labels[0].bbox.bottom == doctest::Approx(203.12));
  CHECK(labels[0].height == doctest::Approx(1.67));
  CHECK(labels[0].width == doctest::Approx(1.87));
  CHECK(labels[0].length == doctest::Approx(3.69));
  CHECK(labels[0].x == doctest::Approx(-16.53));
  CHECK(labels[0].rotation_y == doctest::Approx(1.57));
  CHECK(!labels[0].score.has_value());
  CHECK(!labels[0].is_dont_care());
  CHECK(labels[1].is_dont_care());

  {
    std::ofstream out(path, std::ios::trunc);
    out << "Car 0.00 0 1.85 bogus 181.54 423.81 203.12 1.67 1.87 3.69 -16.53 2.39 58.49 "
           "1.57\n";
  }
  try {
    read_labels(path);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
}

TEST_CASE("labels round-trip field-exactly through write and read") {
  std::vector<FrameLabel> labels;
  FrameLabel a;
  a.type = "Pedestrian";
  a.truncation = 0.12;
  a.occlusion = 2;
  a.alpha = -0.4;
  a.bbox = {100.25, 50.5, 140.75, 130.0};
  a.height = 1.78;
  a.width = 0.62;
  a.length = 0.91;
  a.x = -3.25;
  a.y = 1.61;
  a.z = 12.5;
  a.rotation_y = -1.22;
  labels.push_back(a);
  FrameLabel b = a;
  b.type = "Cyclist";
  b.score = 2.5;
  labels.push_back(b);

  const std::string p1 = temp_path("votedet_labels_rt1.txt");
  const std::string p2 = temp_path("votedet_labels_rt2.txt");
  write_labels(labels, p1);
  const auto reread = read_labels(p1);
  REQUIRE(reread.size() == 2);
  CHECK(reread[0].type == "Pedestrian");
  CHECK(reread[0].truncation == a.truncation);
  CHECK(reread[0].bbox.left == a.bbox.left);
  CHECK(reread[0].bbox.bottom == a.bbox.bottom);
  CHECK(reread[0].height == a.height);
  CHECK(reread[0].x == a.x);
  CHECK(reread[0].rotation_y == a.rotation_y);
  CHECK(!reread[0].score.has_value());
  REQUIRE(reread[1].score.has_value());
  CHECK(*reread[1].score == 2.5);

  // Second write is byte-identical.
  write_labels(reread, p2);
  std::ifstream f1(p1), f2(p2);
  const std::string t1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string t2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(t1 == t2);
}

TEST_CASE("calibration parsing reports missing keys by name") {
  const std::string path = temp_path("votedet_calib.txt");
  const Calibration calib = simple_calibration();
  write_calibration(calib, path);
  const Calibration reread = read_calibration(path);
  for (int i = 0; i < 12; ++i) CHECK(reread.p2[i] == doctest::Approx(calib.p2[i]));
  for (int i = 0; i < 9; ++i) CHECK(reread.r0[i] == doctest::Approx(calib.r0[i]));
  for (int i = 0; i < 12; ++i) {
    CHECK(reread.tr_velo_to_cam[i] == doctest::Approx(calib.tr_velo_to_cam[i]));
  }

  {
    std::ofstream out(path, std::ios::trunc);
    out << "P2: 1 0 0 0 0 1 0 0 0 0 1 0\n";
    out << "R0_rect: 1 0 0 0 1 0 0 0 1\n";
  }
  try {
    read_calibration(path);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("Tr_velo_to_cam") != std::string::npos);
  }
}

TEST_CASE("velo/camera transforms invert each other") {
  const Calibration calib = simple_calibration();
  const std::array<double, 3> p{12.0, -3.0, 0.8};
  const auto cam = velo_to_camera(calib, p);
  const auto back = camera_to_velo(calib, cam);
  for (int i = 0; i < 3; ++i) CHECK(back[i] == doctest::Approx(p[i]).epsilon(1e-9));
}

TEST_CASE("projection: behind-camera discard and centered box") {
  const Calibration calib = simple_calibration();

  Box3D behind{{-10.0f, 0.0f, 0.0f}, 2.0f, 2.0f, 1.5f, 0.0f};
  CHECK(!project_to_image(behind, calib).has_value());

  // Box on the optical axis 20 m ahead: hull centered on the principal
  // point. Height 1.5 m at depth ~20 m spans about f * h / z pixels.
  Box3D ahead{{20.0f, 0.0f, 0.0f}, 2.0f, 2.0f, 1.5f, 0.0f};
  const auto bbox = project_to_image(ahead, calib);
  REQUIRE(bbox.has_value());
  const double cx = 0.5 * (bbox->left + bbox->right);
  const double cy = 0.5 * (bbox->top + bbox->bottom);
  CHECK(cx == doctest::Approx(621.0).epsilon(0.01));
  CHECK(cy == doctest::Approx(187.5).epsilon(0.01));

  // Pinhole scale consistency: doubling the distance halves the height
  // within 1%.
  Box3D twice{{40.0f, 0.0f, 0.0f}, 2.0f, 2.0f, 1.5f, 0.0f};
  const auto far_box = project_to_image(twice, calib);
  REQUIRE(far_box.has_value());
  CHECK(far_box->height() == doctest::Approx(bbox->height() / 2.0).epsilon(0.011));
}

TEST_CASE("projected hull contains the projected center") {
  const Calibration calib = simple_calibration();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> fx(8.0f, 40.0f), fy(-6.0f, 6.0f), fz(-1.5f, 1.5f),
      yaw(0.0f, 3.14f), dim(0.5f, 3.5f);
  for (int i = 0; i < 50; ++i) {
    Box3D box{{fx(rng), fy(rng), fz(rng)}, dim(rng), dim(rng), dim(rng), yaw(rng)};
    const auto bbox = project_to_image(box, calib);
    if (!bbox) continue;
    const auto cam = velo_to_camera(calib, {box.center.x, box.center.y, box.center.z});
    if (cam[2] <= 0.0) continue;
    const double u = (calib.p2[0] * cam[0] + calib.p2[2] * cam[2]) / cam[2];
    const double v = (calib.p2[5] * cam[1] + calib.p2[6] * cam[2]) / cam[2];
    if (u < 0.0 || u > calib.image_width || v < 0.0 || v > calib.image_height) continue;
    CHECK(u >= bbox->left - 1e-6);
    CHECK(u <= bbox->right + 1e-6);
    CHECK(v >= bbox->top - 1e-6);
    CHECK(v <= bbox->bottom + 1e-6);
  }
}

TEST_CASE("label and lidar box conversions are mutually inverse") {
  const Calibration calib = simple_calibration();
  Box3D box{{15.0f, 2.0f, 0.3f}, 3.9f, 1.6f, 1.5f, 0.8f};
  const auto label = detection_to_label("Car", box, 1.5, calib);
  REQUIRE(label.has_value());
  CHECK(label->type == "Car");
  REQUIRE(label->score.has_value());
  CHECK(*label->score == doctest::Approx(1.5));

  const Box3D back = label_to_velo_box(*label, calib);
  CHECK(back.center.x == doctest::Approx(box.center.x).epsilon(1e-4));
  CHECK(back.center.y == doctest::Approx(box.center.y).epsilon(1e-4));
  CHECK(back.center.z == doctest::Approx(box.center.z).epsilon(1e-4));
  CHECK(back.length == doctest::Approx(box.length));
  CHECK(back.width == doctest::Approx(box.width));
  CHECK(back.height == doctest::Approx(box.height));
  CHECK(std::abs(std::remainder(back.yaw - box.yaw, 2.0 * M_PI)) < 1e-4);
}
