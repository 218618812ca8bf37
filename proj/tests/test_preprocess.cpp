#include <catch2/catch_amalgamated.hpp>

#include "gplan/preprocess.hpp"
#include "gplan/util.hpp"

using Catch::Approx;
using namespace gplan;
using namespace gplan::preprocess;

TEST_CASE("voxel downsampling merges to centroids in first-seen order", "[preprocess]") {
  PointCloud c;
  c.points = {{0.051, 0.0, 0.0},   // voxel B
              {0.001, 0.0, 0.0},   // voxel A
              {0.059, 0.0, 0.0},   // voxel B again
              {0.009, 0.0, 0.0}};  // voxel A again
  const PointCloud d = downsample(c, 0.01);
  REQUIRE(d.points.size() == 2);
  CHECK(d.points[0].x == Approx(0.055).margin(1e-12));  // B seen first
  CHECK(d.points[1].x == Approx(0.005).margin(1e-12));
  CHECK_THROWS_AS(downsample(c, 0.0), Error);
}

TEST_CASE("downsampling averages timestamps when present", "[preprocess]") {
  PointCloud c;
  c.points = {{0.001, 0, 0}, {0.002, 0, 0}};
  c.timestamps = {10.0, 20.0};
  const PointCloud d = downsample(c, 0.01);
  REQUIRE(d.timestamps.size() == 1);
  CHECK(d.timestamps[0] == Approx(15.0));
}

TEST_CASE("median depth filter uses valid neighbors only", "[preprocess]") {
  DepthMap d(3, 3);
  // 0 2 0
  // 4 0 6
  // 0 8 0
  d.at(1, 0) = 2.0;
  d.at(0, 1) = 4.0;
  d.at(2, 1) = 6.0;
  d.at(1, 2) = 8.0;
  const CropRect full{0, 0, 3, 3};
  const DepthMap f = filter_depth(d, 3, full);
  CHECK(f.at(1, 1) == 4.0);  // lower median of {2,4,6,8}
  CHECK(f.at(0, 0) == 2.0);  // lower median of {2,4}
  CHECK(f.at(2, 2) == 6.0);  // lower median of {6,8}

  SECTION("window of one is identity") {
    const DepthMap g = filter_depth(d, 1, full);
    for (std::size_t i = 0; i < d.depth.size(); ++i) CHECK(g.depth[i] == d.depth[i]);
  }
  SECTION("pixels outside the crop are untouched") {
    const DepthMap g = filter_depth(d, 3, CropRect{1, 1, 1, 1});
    CHECK(g.at(1, 1) == 4.0);
    CHECK(g.at(0, 0) == 0.0);
    CHECK(g.at(0, 1) == 4.0);
  }
  SECTION("bad parameters") {
    CHECK_THROWS_AS(filter_depth(d, 2, full), InvalidWindow);
    CHECK_THROWS_AS(filter_depth(d, 9, full), InvalidWindow);
    CHECK_THROWS_AS(filter_depth(d, 3, CropRect{0, 0, 4, 3}), InvalidCrop);
    CHECK_THROWS_AS(filter_depth(d, 3, CropRect{0, 0, 0, 3}), InvalidCrop);
  }
}

TEST_CASE("a window with no valid depth yields an invalid pixel", "[preprocess]") {
  DepthMap d(5, 5);
  d.at(4, 4) = 1.0;
  const DepthMap f = filter_depth(d, 3, CropRect{0, 0, 5, 5});
  CHECK(f.at(0, 0) == 0.0);
  CHECK(f.at(4, 4) == 1.0);
}

TEST_CASE("depth map unprojects and reprojects to the same pixels", "[preprocess]") {
  const geometry::CameraIntrinsics k{450.0, 460.0, 31.5, 23.5, 64, 48};
  Rng rng(2024);
  DepthMap d(64, 48);
  for (double& v : d.depth)
    if (rng.uniform() < 0.5) v = rng.uniform(0.5, 5.0);

  const PointCloud cloud = depth_to_cloud(d, k);
  std::size_t valid = 0;
  for (double v : d.depth)
    if (v > 0) ++valid;
  REQUIRE(cloud.points.size() == valid);

  std::size_t i = 0;
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      if (!d.valid(x, y)) continue;
      const auto px = geometry::project_point(k, cloud.points[i]);
      CHECK(px.u == Approx(static_cast<double>(x)).margin(1e-6));
      CHECK(px.v == Approx(static_cast<double>(y)).margin(1e-6));
      CHECK(cloud.points[i].z == d.at(x, y));
      ++i;
    }
}

TEST_CASE("optical-axis pixel unprojects onto the axis", "[preprocess]") {
  const geometry::CameraIntrinsics k{500, 500, 320, 240, 640, 480};
  DepthMap d(640, 480);
  d.at(320, 240) = 2.0;
  const PointCloud c = depth_to_cloud(d, k);
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].x == 0.0);
  CHECK(c.points[0].y == 0.0);
  CHECK(c.points[0].z == 2.0);

  const DepthMap empty(8, 8);
  CHECK(depth_to_cloud(empty, k).points.empty());
}

TEST_CASE("ground removal keeps objects and strips the plane", "[preprocess]") {
  // Camera-style frame: y points down, so "up" is -y and the floor sits at
  // the largest y. Plane at y=1 with a box floating clear of the inlier band.
  Rng rng(9);
  std::vector<geometry::Vec3> pts;
  std::size_t plane_count = 0;
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) {
      pts.push_back({-1.0 + i * 0.07, 1.0 + rng.uniform(-0.005, 0.005), 1.0 + j * 0.07});
      ++plane_count;
    }
  const std::size_t box_begin = pts.size();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      for (int m = 0; m < 6; ++m)
        pts.push_back({0.2 + i * 0.03, 0.80 + m * 0.03, 1.5 + j * 0.03});

  const GroundSplit split = remove_ground(pts, 15.0, 0.02);
  std::size_t plane_removed = 0;
  for (std::size_t idx : split.ground) {
    CHECK(idx < box_begin);  // no box point classified as ground
    if (idx < box_begin) ++plane_removed;
  }
  CHECK(plane_removed >= plane_count * 99 / 100);
  CHECK(split.ground.size() + split.kept.size() == pts.size());
}

TEST_CASE("ground removal survives an object-heavy sample", "[preprocess]") {
  // More box points than floor points: a naive whole-set fit would tilt, the
  // seeded fit must not.
  Rng rng(10);
  std::vector<geometry::Vec3> pts;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      pts.push_back({i * 0.1, 1.0 + rng.uniform(-0.003, 0.003), 1.0 + j * 0.1});
  const std::size_t box_begin = pts.size();
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j)
      for (int m = 0; m < 7; ++m)
        pts.push_back({0.3 + i * 0.04, 0.5 + m * 0.04, 1.3 + j * 0.04});
  REQUIRE(pts.size() - box_begin > box_begin);

  const GroundSplit split = remove_ground(pts, 15.0, 0.02);
  std::size_t plane_removed = 0;
  for (std::size_t idx : split.ground) {
    REQUIRE(idx < box_begin);
    ++plane_removed;
  }
  CHECK(plane_removed >= box_begin * 99 / 100);
}

TEST_CASE("steep surfaces are not ground", "[preprocess]") {
  // A wall: plane normal perpendicular to up.
  std::vector<geometry::Vec3> pts;
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) pts.push_back({0.0, i * 0.05, 1.0 + j * 0.05});
  const GroundSplit split = remove_ground(pts, 15.0, 0.02);
  CHECK(split.ground.empty());
  CHECK(split.kept.size() == pts.size());
}

TEST_CASE("tiny inputs pass through ground removal", "[preprocess]") {
  std::vector<geometry::Vec3> pts = {{0, 0, 1}, {0, 0.1, 1}};
  const GroundSplit split = remove_ground(pts, 15.0, 0.02);
  CHECK(split.ground.empty());
  CHECK(split.kept.size() == 2);
}

TEST_CASE("cone cells partition the frustum", "[preprocess]") {
  const geometry::CameraIntrinsics k{100, 100, 50, 50, 100, 100};
  PointCloud c;
  c.points = {{-0.3, -0.3, 1.0},  // left-top quadrant
              {0.3, -0.3, 1.0},   // right-top
              {-0.3, 0.3, 1.0},   // left-bottom
              {0.3, 0.3, 1.0},    // right-bottom
              {0.0, 0.0, -1.0},   // behind camera
              {5.0, 0.0, 1.0}};   // outside the frame
  const auto cells = cone_cell_partition(c, k, geometry::RigidTransform::identity(), 2, 2);
  REQUIRE(cells.size() == 4);
  std::size_t total = 0;
  for (const auto& cell : cells) total += cell.indices.size();
  CHECK(total == 4);

  auto cell_at = [&](int a, int e) -> const ConeCell& { return cells[a * 2 + e]; };
  CHECK(cell_at(0, 0).indices == std::vector<std::size_t>{0});
  CHECK(cell_at(1, 0).indices == std::vector<std::size_t>{1});
  CHECK(cell_at(0, 1).indices == std::vector<std::size_t>{2});
  CHECK(cell_at(1, 1).indices == std::vector<std::size_t>{3});

  CHECK_THROWS_AS(cone_cell_partition(c, k, geometry::RigidTransform::identity(), 0, 2), Error);
}
