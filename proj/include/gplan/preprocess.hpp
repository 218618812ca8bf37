#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <tuple>
#include <vector>

#include "gplan/geometry.hpp"

namespace gplan::preprocess {

using geometry::CameraIntrinsics;
using geometry::Pixel;
using geometry::RigidTransform;
using geometry::Vec3;

struct InvalidCrop : Error {
  using Error::Error;
};
struct InvalidWindow : Error {
  using Error::Error;
};

struct PointCloud {
  std::vector<Vec3> points;
  // Either empty or one stamp per point.
  std::vector<double> timestamps;

  std::size_t size() const { return points.size(); }
};

// Depth in meters; 0 marks an invalid measurement.
struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> depth;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0) {}

  double at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return depth[static_cast<std::size_t>(y) * width + x]; }
  bool valid(int x, int y) const { return at(x, y) > 0.0; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

// Per-pixel instance labels; 0 is background.
struct LabelMask {
  int width = 0, height = 0;
  std::vector<std::uint32_t> labels;

  LabelMask() = default;
  LabelMask(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint32_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

struct CropRect {
  int x = 0, y = 0, width = 0, height = 0;

  void validate_within(int image_w, int image_h) const {
    if (width <= 0 || height <= 0) throw InvalidCrop("crop size must be positive");
    if (x < 0 || y < 0 || x + width > image_w || y + height > image_h)
      throw InvalidCrop("crop exceeds image bounds");
  }
  bool contains(int px, int py) const {
    return px >= x && px < x + width && py >= y && py < y + height;
  }
};

struct ConeCell {
  int az_bin = 0, el_bin = 0;
  std::vector<std::size_t> indices;
};

// Splits the camera frustum into n_az x n_el angular cells of equal angular
// width and buckets each in-frustum point (positive depth, projects inside the
// frame) by its azimuth/elevation relative to the optical axis.
inline std::vector<ConeCell> cone_cell_partition(const PointCloud& cloud,
                                                 const CameraIntrinsics& k,
                                                 const RigidTransform& cloud_to_camera,
                                                 int n_az, int n_el) {
  k.validate();
  if (n_az <= 0 || n_el <= 0) throw Error("cell grid must be positive");
  const double az_lo = std::atan((0.0 - k.cx) / k.fx);
  const double az_hi = std::atan((static_cast<double>(k.width) - k.cx) / k.fx);
  const double el_lo = std::atan((0.0 - k.cy) / k.fy);
  const double el_hi = std::atan((static_cast<double>(k.height) - k.cy) / k.fy);

  std::vector<ConeCell> cells(static_cast<std::size_t>(n_az) * n_el);
  for (int a = 0; a < n_az; ++a)
    for (int e = 0; e < n_el; ++e) {
      auto& c = cells[static_cast<std::size_t>(a) * n_el + e];
      c.az_bin = a;
      c.el_bin = e;
    }

  auto bin_of = [](double v, double lo, double hi, int n) {
    int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * n));
    return std::clamp(b, 0, n - 1);
  };

  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3 p = transform_point(cloud_to_camera, cloud.points[i]);
    if (!(p.z > 0.0)) continue;
    const Pixel px = geometry::project_point(k, p);
    if (px.u < 0.0 || px.u >= k.width || px.v < 0.0 || px.v >= k.height) continue;
    const int a = bin_of(std::atan(p.x / p.z), az_lo, az_hi, n_az);
    const int e = bin_of(std::atan(p.y / p.z), el_lo, el_hi, n_el);
    cells[static_cast<std::size_t>(a) * n_el + e].indices.push_back(i);
  }
  return cells;
}

struct GroundSplit {
  std::vector<std::size_t> ground;  // indices classified as ground plane
  std::vector<std::size_t> kept;    // everything else
};

namespace detail {

struct PlaneFit {
  Vec3 centroid;
  Vec3 normal;  // unit length
};

inline PlaneFit fit_plane(std::span<const Vec3> pts, std::span<const std::size_t> idx) {
  Vec3 c{};
  for (std::size_t i : idx) c += pts[i];
  c = c * (1.0 / static_cast<double>(idx.size()));
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i : idx) {
    const Vec3 d = pts[i] - c;
    const Eigen::Vector3d e(d.x, d.y, d.z);
    cov += e * e.transpose();
  }
  cov /= static_cast<double>(idx.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d n = es.eigenvectors().col(0);  // smallest eigenvalue
  return {c, Vec3{n.x(), n.y(), n.z()}};
}

}  // namespace detail

// Plane-based ground classification. The fit is seeded from a thin height
// band just above the lowest points along `up` and refined on its inlier set,
// which keeps the estimate anchored to the floor even when fitting a cell
// dominated by an object. The final plane only classifies points as ground
// when its normal is within angle_tol_deg of `up`.
inline GroundSplit remove_ground(std::span<const Vec3> points, double angle_tol_deg,
                                 double inlier_dist, Vec3 up = {0.0, -1.0, 0.0}) {
  GroundSplit split;
  const std::size_t n = points.size();
  if (n < 3) {
    split.kept.resize(n);
    std::iota(split.kept.begin(), split.kept.end(), 0);
    return split;
  }
  const double up_norm = up.norm();
  if (!(up_norm > 0.0)) throw Error("up direction must be nonzero");
  const Vec3 u = up * (1.0 / up_norm);

  // Seed band: mean height of the lowest points, widened by a few inlier
  // widths (height = p . u, so the floor sits at the minimum).
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return points[a].dot(u) < points[b].dot(u);
  });
  const std::size_t n_low = std::clamp<std::size_t>(n / 10, 3, 20);
  double low_mean = 0.0;
  for (std::size_t i = 0; i < n_low; ++i) low_mean += points[order[i]].dot(u);
  low_mean /= static_cast<double>(n_low);
  const double band = low_mean + 3.0 * inlier_dist;
  std::vector<std::size_t> inliers;
  for (std::size_t i = 0; i < n && (points[order[i]].dot(u) <= band || inliers.size() < 3); ++i)
    inliers.push_back(order[i]);

  detail::PlaneFit plane = detail::fit_plane(points, inliers);
  for (int iter = 0; iter < 3; ++iter) {
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::fabs((points[i] - plane.centroid).dot(plane.normal));
      if (d <= inlier_dist) next.push_back(i);
    }
    if (next.size() < 3) break;
    plane = detail::fit_plane(points, next);
    inliers = std::move(next);
  }

  const double cos_tol = std::cos(angle_tol_deg * M_PI / 180.0);
  const bool level = std::fabs(plane.normal.dot(u)) >= cos_tol;

  std::vector<char> is_ground(n, 0);
  if (level) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::fabs((points[i] - plane.centroid).dot(plane.normal));
      if (d <= inlier_dist) is_ground[i] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    (is_ground[i] ? split.ground : split.kept).push_back(i);
  return split;
}

// Voxel-grid downsampling: each occupied voxel collapses to the centroid of
// its members. Output voxels are ordered by the index of the first point that
// fell into them, which makes the result independent of map iteration order.
inline PointCloud downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw Error("voxel size must be positive");
  struct Bucket {
    Vec3 sum{};
    double stamp_sum = 0.0;
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::map<std::tuple<long long, long long, long long>, Bucket> grid;
  const bool stamped = !cloud.timestamps.empty();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const auto key = std::make_tuple(static_cast<long long>(std::floor(p.x / voxel)),
                                     static_cast<long long>(std::floor(p.y / voxel)),
                                     static_cast<long long>(std::floor(p.z / voxel)));
    auto [it, inserted] = grid.try_emplace(key);
    Bucket& b = it->second;
    if (inserted) b.first = i;
    b.sum += p;
    if (stamped) b.stamp_sum += cloud.timestamps[i];
    ++b.count;
  }
  std::vector<const Bucket*> buckets;
  buckets.reserve(grid.size());
  for (const auto& [key, b] : grid) buckets.push_back(&b);
  std::sort(buckets.begin(), buckets.end(),
            [](const Bucket* a, const Bucket* b) { return a->first < b->first; });

  PointCloud out;
  out.points.reserve(buckets.size());
  if (stamped) out.timestamps.reserve(buckets.size());
  for (const Bucket* b : buckets) {
    const double inv = 1.0 / static_cast<double>(b->count);
    out.points.push_back(b->sum * inv);
    if (stamped) out.timestamps.push_back(b->stamp_sum * inv);
  }
  return out;
}

// Median filter over the valid (nonzero) depths in a window x window
// neighborhood, applied only inside `crop`. Even-sized tie -> lower median. A
// pixel whose window holds no valid depth becomes invalid.
inline DepthMap filter_depth(const DepthMap& d, int window, const CropRect& crop) {
  if (window < 1 || window > 7 || window % 2 == 0)
    throw InvalidWindow("window must be one of 1, 3, 5, 7");
  crop.validate_within(d.width, d.height);
  DepthMap out = d;
  const int r = window / 2;
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(window) * window);
  for (int y = crop.y; y < crop.y + crop.height; ++y) {
    for (int x = crop.x; x < crop.x + crop.width; ++x) {
      vals.clear();
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (!d.in_bounds(nx, ny)) continue;
          const double v = d.at(nx, ny);
          if (v > 0.0) vals.push_back(v);
        }
      if (vals.empty()) {
        out.at(x, y) = 0.0;
        continue;
      }
      const std::size_t mid = (vals.size() - 1) / 2;  // lower median
      std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
      out.at(x, y) = vals[mid];
    }
  }
  return out;
}

// Back-projects every valid depth pixel into a camera-frame point, scanning
// rows top to bottom. Pixel (x, y) unprojects at coordinates u=x, v=y.
inline PointCloud depth_to_cloud(const DepthMap& d, const CameraIntrinsics& k) {
  k.validate();
  PointCloud out;
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      const double z = d.at(x, y);
      if (!(z > 0.0)) continue;
      out.points.push_back({(x - k.cx) * z / k.fx, (y - k.cy) * z / k.fy, z});
    }
  return out;
}

}  // namespace gplan::preprocess
