#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gplan/errors.hpp"
#include "gplan/jsonio.hpp"

namespace gplan::geometry {

struct InvalidTransform : Error {
  using Error::Error;
};
struct InvalidIntrinsics : Error {
  using Error::Error;
};
struct NonPositiveDepth : Error {
  using Error::Error;
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline void to_json(json& j, const Vec3& v) { j = json::array({v.x, v.y, v.z}); }
inline void from_json(const json& j, Vec3& v) {
  if (!j.is_array() || j.size() != 3) throw Error("vector must be a 3-element array");
  v = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

struct Pixel {
  double u = 0.0, v = 0.0;
};

inline void to_json(json& j, const Pixel& p) { j = json::array({p.u, p.v}); }
inline void from_json(const json& j, Pixel& p) {
  if (!j.is_array() || j.size() != 2) throw Error("pixel must be a 2-element array");
  p = {j[0].get<double>(), j[1].get<double>()};
}

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidIntrinsics("focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidIntrinsics("image size must be positive");
  }
};

inline void to_json(json& j, const CameraIntrinsics& k) {
  j = json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
           {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}
inline void from_json(const json& j, CameraIntrinsics& k) {
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  k.validate();
}

// Proper rigid motion. The rotation is checked for orthonormality and unit
// determinant on construction so downstream code can rely on it.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()) {}

  RigidTransform(const Eigen::Matrix3d& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {
    validate_rotation(rotation_);
  }

  static RigidTransform identity() { return RigidTransform(); }

  // Builds from a row-major 4x4 homogeneous matrix.
  static RigidTransform from_matrix(const std::array<std::array<double, 4>, 4>& m) {
    Eigen::Matrix3d r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = m[i][j];
    const Vec3 t{m[0][3], m[1][3], m[2][3]};
    constexpr double kTol = 1e-6;
    if (std::fabs(m[3][0]) > kTol || std::fabs(m[3][1]) > kTol || std::fabs(m[3][2]) > kTol ||
        std::fabs(m[3][3] - 1.0) > kTol)
      throw InvalidTransform("bottom row of homogeneous matrix must be [0,0,0,1]");
    return RigidTransform(r, t);
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  std::array<std::array<double, 4>, 4> matrix() const {
    std::array<std::array<double, 4>, 4> m{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] = rotation_(i, j);
    }
    m[0][3] = translation_.x;
    m[1][3] = translation_.y;
    m[2][3] = translation_.z;
    m[3] = {0.0, 0.0, 0.0, 1.0};
    return m;
  }

 private:
  static void validate_rotation(const Eigen::Matrix3d& r) {
    constexpr double kTol = 1e-6;
    const Eigen::Matrix3d delta = r.transpose() * r - Eigen::Matrix3d::Identity();
    if (delta.cwiseAbs().maxCoeff() > kTol)
      throw InvalidTransform("rotation block is not orthonormal");
    if (std::fabs(r.determinant() - 1.0) > kTol)
      throw InvalidTransform("rotation block must have determinant +1");
  }

  Eigen::Matrix3d rotation_;
  Vec3 translation_;
};

inline void to_json(json& j, const RigidTransform& t) {
  const auto m = t.matrix();
  j = json::array();
  for (const auto& row : m) j.push_back(json::array({row[0], row[1], row[2], row[3]}));
}
inline void from_json(const json& j, RigidTransform& t) {
  if (!j.is_array() || j.size() != 4) throw InvalidTransform("transform must be a 4x4 array");
  std::array<std::array<double, 4>, 4> m{};
  for (int i = 0; i < 4; ++i) {
    if (!j[i].is_array() || j[i].size() != 4)
      throw InvalidTransform("transform must be a 4x4 array");
    for (int k = 0; k < 4; ++k) m[i][k] = j[i][k].get<double>();
  }
  t = RigidTransform::from_matrix(m);
}

inline Vec3 transform_point(const RigidTransform& t, const Vec3& p) {
  const Eigen::Vector3d q = t.rotation() * Eigen::Vector3d(p.x, p.y, p.z);
  return Vec3{q.x(), q.y(), q.z()} + t.translation();
}

// compose(a, b) applies b first, then a (matrix product a*b).
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  const Eigen::Matrix3d r = a.rotation() * b.rotation();
  const Vec3 t = transform_point(a, b.translation());
  return RigidTransform(r, t);
}

inline RigidTransform invert(const RigidTransform& t) {
  const Eigen::Matrix3d rt = t.rotation().transpose();
  const Eigen::Vector3d ti =
      -(rt * Eigen::Vector3d(t.translation().x, t.translation().y, t.translation().z));
  return RigidTransform(rt, Vec3{ti.x(), ti.y(), ti.z()});
}

// Pinhole projection of a camera-frame point. Depth must be strictly positive.
inline Pixel project_point(const CameraIntrinsics& k, const Vec3& p_cam) {
  if (!(p_cam.z > 0.0)) throw NonPositiveDepth("point depth must be positive for projection");
  return Pixel{k.fx * p_cam.x / p_cam.z + k.cx, k.fy * p_cam.y / p_cam.z + k.cy};
}

struct ProjectedPoint {
  std::size_t index = 0;  // index into the source cloud
  Pixel pixel;
};

// Transforms a cloud into the camera frame and projects it. Points behind the
// camera or outside the image bounds are dropped; surviving entries keep their
// source index.
inline std::vector<ProjectedPoint> project_cloud(const CameraIntrinsics& k,
                                                 const RigidTransform& cloud_to_camera,
                                                 std::span<const Vec3> points) {
  k.validate();
  std::vector<ProjectedPoint> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 p = transform_point(cloud_to_camera, points[i]);
    if (!(p.z > 0.0)) continue;
    const Pixel px = project_point(k, p);
    if (px.u < 0.0 || px.u >= k.width || px.v < 0.0 || px.v >= k.height) continue;
    out.push_back({i, px});
  }
  return out;
}

}  // namespace gplan::geometry
