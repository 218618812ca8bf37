#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "gplan/io.hpp"
#include "gplan/preprocess.hpp"

namespace gplan::confidence {

using geometry::CameraIntrinsics;
using geometry::Pixel;
using geometry::RigidTransform;
using geometry::Vec3;
using preprocess::DepthMap;
using preprocess::LabelMask;
using preprocess::PointCloud;

struct DomainError : Error {
  using Error::Error;
};
struct InsufficientNeighbors : Error {
  using Error::Error;
};
struct NoValidDepth : Error {
  using Error::Error;
};

// Scaled Shannon term H(p) = e * (-p ln p), zero at both ends of [0,1] and
// exactly 1 at p = 1/e. Input outside [0,1] is a caller bug.
inline double norm_entropy(double p) {
  if (p < 0.0 || p > 1.0 || !std::isfinite(p))
    throw DomainError("entropy argument must lie in [0,1]");
  if (p == 0.0) return 0.0;
  const double h = -M_E * p * std::log(p);
  return std::clamp(h, 0.0, 1.0);
}

// Per-frame normalizers for the entropy channels; every divisor is floored so
// a degenerate frame cannot divide by zero.
struct NormalizationContext {
  double mahalanobis_max = 1.0;  // caps the geometric distance term
  double sigma_max = 1.0;        // caps the depth variance term
  double d_max = 1.0;            // caps per-step track displacement

  static constexpr double kFloor = 1e-12;
  NormalizationContext floored() const {
    return {std::max(mahalanobis_max, kFloor), std::max(sigma_max, kFloor),
            std::max(d_max, kFloor)};
  }
};

// Uncertainty from distance to the instance's pixel centroid: nearby pixels
// map to probability ~1 (low entropy), far ones decay as 1/(1+d).
inline double spatial_entropy(const Pixel& pixel, const Pixel& centroid) {
  const double du = pixel.u - centroid.u;
  const double dv = pixel.v - centroid.v;
  const double d = std::sqrt(du * du + dv * dv);
  return norm_entropy(1.0 / (1.0 + d));
}

inline constexpr double kCovarianceRegularization = 1e-6;

// Squared Mahalanobis distance of `p` from the neighbor distribution, with a
// ridge term keeping the covariance invertible.
inline double mahalanobis_sq(const Vec3& p, std::span<const Vec3> neighbors,
                             double regularization = kCovarianceRegularization) {
  if (neighbors.size() < 4)
    throw InsufficientNeighbors("need at least 4 neighbors for a covariance estimate");
  Eigen::Vector3d mu = Eigen::Vector3d::Zero();
  for (const Vec3& n : neighbors) mu += Eigen::Vector3d(n.x, n.y, n.z);
  mu /= static_cast<double>(neighbors.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& n : neighbors) {
    const Eigen::Vector3d d = Eigen::Vector3d(n.x, n.y, n.z) - mu;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(neighbors.size());
  cov += regularization * Eigen::Matrix3d::Identity();
  const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - mu;
  return d.dot(cov.ldlt().solve(d));
}

// Uncertainty from how far the point sits outside its local neighborhood. The
// squared distance is the default; `use_sqrt` switches to the unsquared form.
inline double geometric_entropy(const Vec3& p, std::span<const Vec3> neighbors,
                                const NormalizationContext& ctx, bool use_sqrt = false) {
  const NormalizationContext c = ctx.floored();
  double dist = mahalanobis_sq(p, neighbors);
  if (use_sqrt) dist = std::sqrt(dist);
  const double ratio = std::clamp(dist / c.mahalanobis_max, 0.0, 1.0);
  return norm_entropy(ratio);
}

// Uncertainty from depth noise in a local window: population variance of the
// valid samples, normalized by the frame's variance cap.
inline double depth_entropy(std::span<const double> samples, const NormalizationContext& ctx) {
  if (samples.empty()) throw NoValidDepth("depth window holds no valid samples");
  const NormalizationContext c = ctx.floored();
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(samples.size());
  const double ratio = std::clamp(var / c.sigma_max, 0.0, 1.0);
  return norm_entropy(ratio);
}

struct PointTrack {
  std::vector<Vec3> positions;  // ordered oldest to newest
};

// Uncertainty from motion: mean normalized step displacement S mapped through
// S/(S+1) so unbounded motion saturates at probability 1. Tracks shorter than
// two observations carry no motion evidence and score zero.
inline double temporal_entropy(const PointTrack& track, const NormalizationContext& ctx) {
  const std::size_t t = track.positions.size();
  if (t < 2) return 0.0;
  const NormalizationContext c = ctx.floored();
  double s = 0.0;
  for (std::size_t i = 1; i < t; ++i)
    s += (track.positions[i] - track.positions[i - 1]).norm() / c.d_max;
  s /= static_cast<double>(t - 1);
  return norm_entropy(s / (s + 1.0));
}

struct WeightProfile {
  double spatial = 1.0, geometric = 1.0, depth = 1.0, temporal = 1.0;

  void validate() const {
    for (double l : {spatial, geometric, depth, temporal})
      if (!std::isfinite(l) || l < 0.0)
        throw DomainError("entropy weights must be finite and non-negative");
  }
};

inline void to_json(json& j, const WeightProfile& w) {
  j = json{{"spatial", w.spatial},
           {"geometric", w.geometric},
           {"depth", w.depth},
           {"temporal", w.temporal}};
}
inline void from_json(const json& j, WeightProfile& w) {
  w.spatial = j.at("spatial").get<double>();
  w.geometric = j.at("geometric").get<double>();
  w.depth = j.at("depth").get<double>();
  w.temporal = j.at("temporal").get<double>();
  w.validate();
}

enum class TaskKind { high_precision, dynamic_scene, cluttered, balanced };

inline TaskKind task_kind_from_string(const std::string& s) {
  const std::string k = to_lower(s);
  if (k == "high_precision") return TaskKind::high_precision;
  if (k == "dynamic" || k == "dynamic_scene") return TaskKind::dynamic_scene;
  if (k == "cluttered") return TaskKind::cluttered;
  if (k == "balanced") return TaskKind::balanced;
  throw DomainError("unknown task kind: " + s);
}

// Emphasis presets: precision work upweights the localization channels,
// dynamic scenes upweight motion, clutter upweights depth consistency.
inline WeightProfile weight_profile_for_task(TaskKind kind) {
  switch (kind) {
    case TaskKind::high_precision:
      return {2.0, 2.0, 1.0, 1.0};
    case TaskKind::dynamic_scene:
      return {1.0, 1.0, 1.0, 2.0};
    case TaskKind::cluttered:
      return {1.0, 1.0, 2.0, 1.0};
    case TaskKind::balanced:
      return {1.0, 1.0, 1.0, 1.0};
  }
  throw DomainError("unknown task kind");
}

struct EntropyVector {
  double spatial = 0.0, geometric = 0.0, depth = 0.0, temporal = 0.0;
};

inline void to_json(json& j, const EntropyVector& e) {
  j = json{{"spatial", e.spatial},
           {"geometric", e.geometric},
           {"depth", e.depth},
           {"temporal", e.temporal}};
}
inline void from_json(const json& j, EntropyVector& e) {
  e.spatial = j.at("spatial").get<double>();
  e.geometric = j.at("geometric").get<double>();
  e.depth = j.at("depth").get<double>();
  e.temporal = j.at("temporal").get<double>();
}

// Fused confidence C = exp(-sum lambda_n H_n); 1 when every channel is
// certain, decaying monotonically as weighted entropy accumulates.
inline double confidence_score(const EntropyVector& e, const WeightProfile& w) {
  w.validate();
  const double s = w.spatial * e.spatial + w.geometric * e.geometric + w.depth * e.depth +
                   w.temporal * e.temporal;
  return std::exp(-s);
}

struct ScoredPoint {
  std::size_t point_index = 0;  // index into the source cloud
  Vec3 position;                // source-frame coordinates
  Pixel pixel;                  // projected image position
  std::uint32_t mask_id = 0;
  EntropyVector entropies;
  double confidence = 0.0;
};

inline void to_json(json& j, const ScoredPoint& s) {
  j = json{{"point_index", s.point_index}, {"position", s.position}, {"pixel", s.pixel},
           {"mask_id", s.mask_id},         {"entropies", s.entropies}, {"confidence", s.confidence}};
}
inline void from_json(const json& j, ScoredPoint& s) {
  s.point_index = j.at("point_index").get<std::size_t>();
  j.at("position").get_to(s.position);
  j.at("pixel").get_to(s.pixel);
  s.mask_id = j.at("mask_id").get<std::uint32_t>();
  j.at("entropies").get_to(s.entropies);
  s.confidence = j.at("confidence").get<double>();
}

struct ScoreParams {
  int knn = 16;          // neighborhood size for the geometric channel
  int depth_window = 5;  // odd window for the depth channel
  bool sqrt_mahalanobis = false;
};

// Projects the cloud, then fuses all four entropy channels per visible point.
// A channel without evidence (background mask, too few neighbors, no valid
// depth, no track) contributes zero entropy rather than failing the point.
// Normalizers are computed from this frame's raw maxima.
inline std::vector<ScoredPoint> score_cloud(
    const PointCloud& cloud, const LabelMask& mask, const DepthMap& depth,
    const std::map<std::size_t, PointTrack>& tracks, const CameraIntrinsics& k,
    const RigidTransform& cloud_to_camera, const WeightProfile& weights,
    const ScoreParams& params = {}) {
  weights.validate();
  if (params.knn < 1) throw DomainError("knn must be positive");
  if (params.depth_window < 1 || params.depth_window % 2 == 0)
    throw DomainError("depth window must be odd and positive");
  if (mask.width != k.width || mask.height != k.height)
    throw DomainError("mask size must match the camera frame");
  if (depth.width != k.width || depth.height != k.height)
    throw DomainError("depth size must match the camera frame");

  const auto projected = geometry::project_cloud(k, cloud_to_camera, cloud.points);
  const std::size_t n = projected.size();

  std::vector<Vec3> cam_pos(n);
  std::vector<std::uint32_t> mask_ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    cam_pos[i] = transform_point(cloud_to_camera, cloud.points[projected[i].index]);
    const int px = std::clamp(static_cast<int>(std::lround(projected[i].pixel.u)), 0,
                              mask.width - 1);
    const int py = std::clamp(static_cast<int>(std::lround(projected[i].pixel.v)), 0,
                              mask.height - 1);
    mask_ids[i] = mask.at(px, py);
  }

  // Instance centroids in pixel space.
  std::map<std::uint32_t, std::pair<Pixel, std::size_t>> centroids;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask_ids[i] == 0) continue;
    auto& [sum, count] = centroids[mask_ids[i]];
    sum.u += projected[i].pixel.u;
    sum.v += projected[i].pixel.v;
    ++count;
  }
  for (auto& [id, acc] : centroids) {
    acc.first.u /= static_cast<double>(acc.second);
    acc.first.v /= static_cast<double>(acc.second);
  }

  // Raw per-point quantities, gathered before normalization.
  std::vector<double> raw_maha(n, -1.0), raw_var(n, -1.0), raw_step(n, -1.0);
  std::vector<std::vector<double>> depth_samples(n);
  const int r = params.depth_window / 2;

  for (std::size_t i = 0; i < n; ++i) {
    // Geometric: brute-force kNN over camera-frame positions.
    if (n >= 5) {
      std::vector<std::pair<double, std::size_t>> dists;
      dists.reserve(n - 1);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        dists.emplace_back((cam_pos[j] - cam_pos[i]).squared_norm(), j);
      }
      const std::size_t kk = std::min<std::size_t>(params.knn, dists.size());
      if (kk >= 4) {
        std::nth_element(dists.begin(), dists.begin() + kk - 1, dists.end());
        std::vector<Vec3> nb(kk);
        for (std::size_t m = 0; m < kk; ++m) nb[m] = cam_pos[dists[m].second];
        double d = mahalanobis_sq(cam_pos[i], nb);
        if (params.sqrt_mahalanobis) d = std::sqrt(d);
        raw_maha[i] = d;
      }
    }
    // Depth: valid samples in the window around the rounded pixel.
    const int px = std::clamp(static_cast<int>(std::lround(projected[i].pixel.u)), 0,
                              depth.width - 1);
    const int py = std::clamp(static_cast<int>(std::lround(projected[i].pixel.v)), 0,
                              depth.height - 1);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const int nx = px + dx, ny = py + dy;
        if (depth.in_bounds(nx, ny) && depth.valid(nx, ny))
          depth_samples[i].push_back(depth.at(nx, ny));
      }
    if (!depth_samples[i].empty()) {
      double mean = 0.0;
      for (double v : depth_samples[i]) mean += v;
      mean /= static_cast<double>(depth_samples[i].size());
      double var = 0.0;
      for (double v : depth_samples[i]) var += (v - mean) * (v - mean);
      raw_var[i] = var / static_cast<double>(depth_samples[i].size());
    }
    // Temporal: largest single-step displacement feeds the frame normalizer.
    const auto it = tracks.find(projected[i].index);
    if (it != tracks.end() && it->second.positions.size() >= 2) {
      double mx = 0.0;
      for (std::size_t m = 1; m < it->second.positions.size(); ++m)
        mx = std::max(mx, (it->second.positions[m] - it->second.positions[m - 1]).norm());
      raw_step[i] = mx;
    }
  }

  NormalizationContext ctx;
  ctx.mahalanobis_max = ctx.sigma_max = ctx.d_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ctx.mahalanobis_max = std::max(ctx.mahalanobis_max, raw_maha[i]);
    ctx.sigma_max = std::max(ctx.sigma_max, raw_var[i]);
    ctx.d_max = std::max(ctx.d_max, raw_step[i]);
  }
  ctx = ctx.floored();

  std::vector<ScoredPoint> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    ScoredPoint& s = out[i];
    s.point_index = projected[i].index;
    s.position = cloud.points[projected[i].index];
    s.pixel = projected[i].pixel;
    s.mask_id = mask_ids[i];

    if (s.mask_id != 0) s.entropies.spatial = spatial_entropy(s.pixel, centroids[s.mask_id].first);
    if (raw_maha[i] >= 0.0)
      s.entropies.geometric = norm_entropy(std::clamp(raw_maha[i] / ctx.mahalanobis_max, 0.0, 1.0));
    if (raw_var[i] >= 0.0)
      s.entropies.depth = norm_entropy(std::clamp(raw_var[i] / ctx.sigma_max, 0.0, 1.0));
    const auto it = tracks.find(projected[i].index);
    if (it != tracks.end()) s.entropies.temporal = temporal_entropy(it->second, ctx);

    s.confidence = confidence_score(s.entropies, weights);
  }
  return out;
}

// Confidence heat overlay: each scored point paints a small dot shading from
// red (low confidence) to green (high).
inline io::Image render_overlay(const io::Image& base, std::span<const ScoredPoint> scored) {
  io::Image out = base;
  for (const ScoredPoint& s : scored) {
    const auto g = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(s.confidence, 0.0, 1.0)));
    const auto r = static_cast<std::uint8_t>(255 - g);
    const int cx = static_cast<int>(std::lround(s.pixel.u));
    const int cy = static_cast<int>(std::lround(s.pixel.v));
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (out.in_bounds(cx + dx, cy + dy)) out.set(cx + dx, cy + dy, r, g, 0);
  }
  return out;
}

}  // namespace gplan::confidence
