// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "votedet/voxel_grid.hpp"

using namespace votedet;

namespace {

GridConfig small_grid() {
  GridConfig cfg;
  cfg.cell_size = 1.0f;
  cfg.origin = {0.0f, 0.0f, 0.0f};
  cfg.extent_x = 10;
  cfg.extent_y = 10;
  cfg.extent_z = 5;
  cfg.angular_bins = 8;
  return cfg;
}

// Independent symmetric 3x3 eigenvalue oracle (Cardano / trigonometric
// form), used to cross-check the shape factors.
std::array<double, 3> eig3_sym(double a00, double a01, double a02, double a11, double a12,
                               double a22) {
  const double p1 = a01 * a01 + a02 * a02 + a12 * a12;
  if (p1 < 1e-30) {
    std::array<double, 3> e{a00, a11, a22};
    std::sort(e.begin(), e.end(), std::greater<>());
    return e;
  }
  const double q = (a00 + a11 + a22) / 3.0;
  const double p2 = (a00 - q) * (a00 - q) + (a11 - q) * (a11 - q) + (a22 - q) * (a22 - q) +
                    2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  const double b00 = (a00 - q) / p, b01 = a01 / p, b02 = a02 / p;
  const double b11 = (a11 - q) / p, b12 = a12 / p, b22 = (a22 - q) / p;
  const double detb = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) +
                      b02 * (b01 * b12 - b11 * b02);
  const double r = std::clamp(detb / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  return {e1, 3.0 * q - e1 - e3, e3};
}

}  // namespace

TEST_CASE("empty cloud discretizes to an empty grid") {
  const SparseGrid grid = discretize(PointCloud{}, small_grid());
  CHECK(grid.occupied_count() == 0);
  CHECK(grid.empty());
}

TEST_CASE("single point lands in its cell with exact statistics") {
  PointCloud cloud;
  cloud.points.push_back({2.5f, 3.5f, 1.5f, 0.5f});  // center of cell (2, 3, 1)
  const SparseGrid grid = discretize(cloud, small_grid());
  REQUIRE(grid.occupied_count() == 1);
  const auto f = grid.find(2, 3, 1);
  REQUIRE(!f.empty());
  CHECK(f[0] == 1.0f);               // occupancy
  CHECK(f[1] == doctest::Approx(0.5f));  // mean reflectance
  CHECK(f[2] == 0.0f);               // variance of one sample
  CHECK(f[3] == 0.0f);
  CHECK(f[4] == 0.0f);
  CHECK(f[5] == 0.0f);
}

TEST_CASE("occupied cells match an independent floor-division oracle") {
  const GridConfig cfg = small_grid();
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<float> ux(-2.0f, 12.0f), uz(-1.0f, 6.0f), ur(0.0f, 1.0f);
  PointCloud cloud;
  std::set<std::tuple<int, int, int>> oracle;
  for (int i = 0; i < 1000; ++i) {
    Point p{ux(rng), ux(rng), uz(rng), ur(rng)};
    cloud.points.push_back(p);
    const int l = static_cast<int>(std::floor((p.x - cfg.origin.x) / cfg.cell_size));
    const int m = static_cast<int>(std::floor((p.y - cfg.origin.y) / cfg.cell_size));
    const int n = static_cast<int>(std::floor((p.z - cfg.origin.z) / cfg.cell_size));
    if (l >= 0 && l < cfg.extent_x && m >= 0 && m < cfg.extent_y && n >= 0 && n < cfg.extent_z) {
      oracle.insert({l, m, n});
    }
  }
  const SparseGrid grid = discretize(cloud, cfg);
  CHECK(grid.occupied_count() == oracle.size());
  CHECK(grid.occupied_count() <= cloud.size());
  for (const CellKey key : grid.keys()) {
    CHECK(oracle.count({key_l(key), key_m(key), key_n(key)}) == 1);
  }
}

TEST_CASE("discretize is invariant under point permutation") {
  const GridConfig cfg = small_grid();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(0.0f, 10.0f), uz(0.0f, 5.0f), ur(0.0f, 1.0f);
  PointCloud cloud;
  for (int i = 0; i < 500; ++i) cloud.points.push_back({u(rng), u(rng), uz(rng), ur(rng)});
  PointCloud shuffled = cloud;
  std::shuffle(shuffled.points.begin(), shuffled.points.end(), rng);

  const SparseGrid a = discretize(cloud, cfg);
  const SparseGrid b = discretize(shuffled, cfg);
  REQUIRE(a.occupied_count() == b.occupied_count());
  for (size_t i = 0; i < a.occupied_count(); ++i) {
    CHECK(a.keys()[i] == b.keys()[i]);
    const auto va = a.values(i);
    const auto vb = b.values(i);
    for (size_t c = 0; c < va.size(); ++c) CHECK(va[c] == vb[c]);
  }
}

TEST_CASE("grid iteration visits each occupied cell exactly once") {
  PointCloud cloud;
  for (int i = 0; i < 50; ++i) {
    cloud.points.push_back({static_cast<float>(i % 7) + 0.5f,
                            static_cast<float>(i % 5) + 0.5f, 0.5f, 0.3f});
  }
  const SparseGrid grid = discretize(cloud, small_grid());
  std::set<CellKey> seen;
  for (const CellKey key : grid.keys()) {
    CHECK(seen.insert(key).second);
    CHECK(!grid.find(key).empty());
  }
  CHECK(seen.size() == grid.occupied_count());
}

TEST_CASE("points on a cell boundary go to the higher-index cell") {
  PointCloud cloud;
  cloud.points.push_back({2.0f, 0.5f, 0.5f, 0.1f});
  const SparseGrid grid = discretize(cloud, small_grid());
  CHECK(!grid.find(2, 0, 0).empty());
  CHECK(grid.find(1, 0, 0).empty());
}

TEST_CASE("out-of-bounds points are dropped and bad configs rejected") {
  PointCloud cloud;
  cloud.points.push_back({-1.0f, 0.5f, 0.5f, 0.1f});
  cloud.points.push_back({100.0f, 0.5f, 0.5f, 0.1f});
  CHECK(discretize(cloud, small_grid()).occupied_count() == 0);

  GridConfig bad = small_grid();
  bad.cell_size = 0.0f;
  CHECK_THROWS_AS(discretize(cloud, bad), std::invalid_argument);
  bad = small_grid();
  bad.extent_y = 0;
  CHECK_THROWS_AS(discretize(cloud, bad), std::invalid_argument);
}

TEST_CASE("cell features: single point and two-sample variance") {
  CHECK_THROWS_AS(compute_cell_features({}), std::invalid_argument);

  std::vector<Point> one{{1.0f, 2.0f, 3.0f, 0.7f}};
  const CellFeatures f1 = compute_cell_features(one);
  CHECK(f1.occupancy == 1.0f);
  CHECK(f1.mean_reflectance == doctest::Approx(0.7f));
  CHECK(f1.var_reflectance == 0.0f);
  CHECK(f1.linearity == 0.0f);
  CHECK(f1.planarity == 0.0f);
  CHECK(f1.sphericity == 0.0f);

  std::vector<Point> two{{0.0f, 0.0f, 0.0f, 0.2f}, {0.1f, 0.0f, 0.0f, 0.4f}};
  const CellFeatures f2 = compute_cell_features(two);
  CHECK(f2.mean_reflectance == doctest::Approx(0.3f));
  CHECK(f2.var_reflectance == doctest::Approx(0.01f));
}

TEST_CASE("reflectance is clamped to [0, 1] at ingestion") {
  std::vector<Point> pts{{0.0f, 0.0f, 0.0f, 1.5f}, {0.1f, 0.0f, 0.0f, -0.5f}};
  const CellFeatures f = compute_cell_features(pts);
  CHECK(f.mean_reflectance == doctest::Approx(0.5f));
}

TEST_CASE("collinear points give linearity 1, cross-checked with a closed-form eigensolver") {
  std::vector<Point> pts{{0.00f, 0.00f, 0.00f, 0.5f},
                         {0.05f, 0.025f, 0.0125f, 0.5f},
                         {0.10f, 0.05f, 0.025f, 0.5f}};
  const CellFeatures f = compute_cell_features(pts);
  CHECK(f.linearity == doctest::Approx(1.0f).epsilon(1e-6));
  CHECK(f.planarity == doctest::Approx(0.0f).epsilon(1e-6));
  CHECK(f.sphericity == doctest::Approx(0.0f).epsilon(1e-6));

  // Independent oracle on a non-degenerate sample.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-0.1f, 0.1f);
  std::vector<Point> cloud;
  for (int i = 0; i < 40; ++i) cloud.push_back({u(rng), u(rng), u(rng), 0.5f});
  const CellFeatures g = compute_cell_features(cloud);

  double mx = 0, my = 0, mz = 0;
  for (const Point& p : cloud) {
    mx += p.x;
    my += p.y;
    mz += p.z;
  }
  mx /= cloud.size();
  my /= cloud.size();
  mz /= cloud.size();
  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;
  for (const Point& p : cloud) {
    xx += (p.x - mx) * (p.x - mx);
    xy += (p.x - mx) * (p.y - my);
    xz += (p.x - mx) * (p.z - mz);
    yy += (p.y - my) * (p.y - my);
    yz += (p.y - my) * (p.z - mz);
    zz += (p.z - mz) * (p.z - mz);
  }
  const double n = static_cast<double>(cloud.size());
  const auto eig = eig3_sym(xx / n, xy / n, xz / n, yy / n, yz / n, zz / n);
  CHECK(g.linearity == doctest::Approx((eig[0] - eig[1]) / eig[0]).epsilon(1e-4));
  CHECK(g.planarity == doctest::Approx((eig[1] - eig[2]) / eig[0]).epsilon(1e-4));
  CHECK(g.sphericity == doctest::Approx(eig[2] / eig[0]).epsilon(1e-4));
}

TEST_CASE("fewer than three points yield zero shape factors") {
  std::vector<Point> two{{0.0f, 0.0f, 0.0f, 0.5f}, {0.1f, 0.1f, 0.0f, 0.5f}};
  const CellFeatures f = compute_cell_features(two);
  CHECK(f.linearity == 0.0f);
  CHECK(f.planarity == 0.0f);
  CHECK(f.sphericity == 0.0f);

  // Coincident points: degenerate scatter, still zero.
  std::vector<Point> same(5, Point{0.2f, 0.2f, 0.2f, 0.5f});
  const CellFeatures g = compute_cell_features(same);
  CHECK(g.linearity == 0.0f);
  CHECK(g.sphericity == 0.0f);
}

TEST_CASE("rotate_points identity, quarter turn, and inverse composition") {
  PointCloud cloud;
  cloud.points.push_back({1.0, 0.0, 0.7, 0.9});
  cloud.points.push_back({0.3, -2.0, 0.1, 0.2});

  const PointCloud same = rotate_points(cloud, 0.0f);
  for (size_t i = 0; i < cloud.size(); ++i) {
    CHECK(same.points[i].x == cloud.points[i].x);
    CHECK(same.points[i].y == cloud.points[i].y);
  }

  const PointCloud quarter = rotate_points(cloud, M_PI / 2.0);
  CHECK(std::abs(quarter.points[0].x - 0.0) < 1e-9);
  CHECK(std::abs(quarter.points[0].y - 1.0) < 1e-9);
  CHECK(quarter.points[0].z == doctest::Approx(0.7));
  CHECK(quarter.points[0].reflectance == 0.9);

  const PointCloud back = rotate_points(rotate_points(cloud, 0.83), -0.83);
  for (size_t i = 0; i < cloud.size(); ++i) {
    CHECK(std::abs(back.points[i].x - cloud.points[i].x) < 1e-9);
    CHECK(std::abs(back.points[i].y - cloud.points[i].y) < 1e-9);
  }
}
