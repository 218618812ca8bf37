#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gplan/jsonio.hpp"
#include "gplan/preprocess.hpp"

namespace gplan::io {

using geometry::CameraIntrinsics;
using geometry::RigidTransform;
using geometry::Vec3;
using preprocess::DepthMap;
using preprocess::LabelMask;
using preprocess::PointCloud;

struct IoError : Error {
  using Error::Error;
};

// Interleaved 8-bit RGB image (PPM P6 on disk).
struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major

  Image() = default;
  Image(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < rgb.size(); i += 3) {
      rgb[i] = r;
      rgb[i + 1] = g;
      rgb[i + 2] = b;
    }
  }

  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  std::uint8_t* pixel(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = pixel(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
};

namespace detail {

struct PnmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  std::size_t data_offset = 0;
};

// Parses a PNM header (magic, width, height, maxval) allowing '#' comments,
// and returns the offset of the first raster byte.
inline PnmHeader parse_pnm_header(const std::string& buf, const std::string& context) {
  PnmHeader h;
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < buf.size()) {
      const char c = buf[pos];
      if (c == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    if (start == pos) throw IoError(context + ": truncated header");
    return buf.substr(start, pos - start);
  };
  h.magic = next_token();
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError(context + ": malformed header field");
  }
  if (pos >= buf.size()) throw IoError(context + ": missing raster data");
  h.data_offset = pos + 1;  // single whitespace separates header from raster
  if (h.width <= 0 || h.height <= 0) throw IoError(context + ": bad image size");
  return h;
}

inline std::string read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_binary_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("short write: " + path.string());
}

}  // namespace detail

inline Image read_ppm(const std::filesystem::path& path) {
  const std::string buf = detail::read_binary_file(path);
  const auto h = detail::parse_pnm_header(buf, path.string());
  if (h.magic != "P6") throw IoError(path.string() + ": expected P6 image");
  if (h.maxval != 255) throw IoError(path.string() + ": expected maxval 255");
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * 3;
  if (buf.size() - h.data_offset < need) throw IoError(path.string() + ": truncated raster");
  Image img;
  img.width = h.width;
  img.height = h.height;
  img.rgb.assign(buf.begin() + h.data_offset, buf.begin() + h.data_offset + need);
  return img;
}

inline void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  detail::write_binary_file(path, out);
}

// Depth is stored as a 16-bit PGM in millimeters, most significant byte
// first; 0 stays the invalid marker.
inline DepthMap read_depth_pgm(const std::filesystem::path& path) {
  const std::string buf = detail::read_binary_file(path);
  const auto h = detail::parse_pnm_header(buf, path.string());
  if (h.magic != "P5") throw IoError(path.string() + ": expected P5 image");
  if (h.maxval != 65535) throw IoError(path.string() + ": expected 16-bit depth (maxval 65535)");
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * 2;
  if (buf.size() - h.data_offset < need) throw IoError(path.string() + ": truncated raster");
  DepthMap d(h.width, h.height);
  for (std::size_t i = 0; i < static_cast<std::size_t>(h.width) * h.height; ++i) {
    const auto hi = static_cast<std::uint8_t>(buf[h.data_offset + 2 * i]);
    const auto lo = static_cast<std::uint8_t>(buf[h.data_offset + 2 * i + 1]);
    d.depth[i] = static_cast<double>((hi << 8) | lo) / 1000.0;
  }
  return d;
}

inline void write_depth_pgm(const std::filesystem::path& path, const DepthMap& d) {
  std::string out = "P5\n" + std::to_string(d.width) + " " + std::to_string(d.height) + "\n65535\n";
  out.reserve(out.size() + d.depth.size() * 2);
  for (double v : d.depth) {
    long mm = std::lround(v * 1000.0);
    mm = std::clamp(mm, 0L, 65535L);
    out.push_back(static_cast<char>((mm >> 8) & 0xff));
    out.push_back(static_cast<char>(mm & 0xff));
  }
  detail::write_binary_file(path, out);
}

inline LabelMask read_mask_pgm(const std::filesystem::path& path) {
  const std::string buf = detail::read_binary_file(path);
  const auto h = detail::parse_pnm_header(buf, path.string());
  if (h.magic != "P5") throw IoError(path.string() + ": expected P5 image");
  if (h.maxval != 255) throw IoError(path.string() + ": expected 8-bit mask (maxval 255)");
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height;
  if (buf.size() - h.data_offset < need) throw IoError(path.string() + ": truncated raster");
  LabelMask m(h.width, h.height);
  for (std::size_t i = 0; i < need; ++i)
    m.labels[i] = static_cast<std::uint8_t>(buf[h.data_offset + i]);
  return m;
}

inline void write_mask_pgm(const std::filesystem::path& path, const LabelMask& m) {
  std::string out = "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
  out.reserve(out.size() + m.labels.size());
  for (std::uint32_t v : m.labels) {
    if (v > 255) throw IoError("mask label exceeds 8-bit range");
    out.push_back(static_cast<char>(v));
  }
  detail::write_binary_file(path, out);
}

// ASCII cloud: one "x y z" line per point; '#' starts a comment; blank lines
// are ignored.
inline PointCloud read_cloud_ascii(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path.string());
  PointCloud c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    double x, y, z;
    if (!(is >> x)) continue;  // blank after comment strip
    if (!(is >> y >> z))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected three coordinates");
    c.points.push_back({x, y, z});
  }
  return c;
}

inline void write_cloud_ascii(const std::filesystem::path& path, const PointCloud& c) {
  std::ostringstream out;
  out.precision(9);
  for (const Vec3& p : c.points) out << p.x << " " << p.y << " " << p.z << "\n";
  detail::write_binary_file(path, out.str());
}

inline constexpr char kCloudMagic[4] = {'P', 'C', '3', 'D'};

// Binary cloud: "PC3D" magic, little-endian uint32 count, then count xyz
// triples as little-endian float32.
inline PointCloud read_cloud_binary(const std::filesystem::path& path) {
  const std::string buf = detail::read_binary_file(path);
  if (buf.size() < 8 || std::memcmp(buf.data(), kCloudMagic, 4) != 0)
    throw IoError(path.string() + ": not a binary cloud file");
  std::uint32_t count;
  std::memcpy(&count, buf.data() + 4, 4);
  const std::size_t need = 8 + static_cast<std::size_t>(count) * 12;
  if (buf.size() < need) throw IoError(path.string() + ": truncated cloud data");
  PointCloud c;
  c.points.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    float xyz[3];
    std::memcpy(xyz, buf.data() + 8 + static_cast<std::size_t>(i) * 12, 12);
    c.points[i] = {xyz[0], xyz[1], xyz[2]};
  }
  return c;
}

inline void write_cloud_binary(const std::filesystem::path& path, const PointCloud& c) {
  std::string out(kCloudMagic, 4);
  const auto count = static_cast<std::uint32_t>(c.points.size());
  out.append(reinterpret_cast<const char*>(&count), 4);
  for (const Vec3& p : c.points) {
    const float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                          static_cast<float>(p.z)};
    out.append(reinterpret_cast<const char*>(xyz), 12);
  }
  detail::write_binary_file(path, out);
}

// Detects the binary magic, falling back to the ASCII reader.
inline PointCloud read_cloud(const std::filesystem::path& path) {
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    char magic[4] = {};
    if (in.read(magic, 4) && std::memcmp(magic, kCloudMagic, 4) == 0)
      return read_cloud_binary(path);
  }
  return read_cloud_ascii(path);
}

struct Calibration {
  CameraIntrinsics intrinsics;
  RigidTransform lidar_to_camera;
};

inline void to_json(json& j, const Calibration& c) {
  j = json{{"intrinsics", c.intrinsics}, {"T_lidar_camera", c.lidar_to_camera}};
}
inline void from_json(const json& j, Calibration& c) {
  j.at("intrinsics").get_to(c.intrinsics);
  j.at("T_lidar_camera").get_to(c.lidar_to_camera);
}

inline Calibration read_calibration(const std::filesystem::path& path) {
  try {
    return read_json_file(path).get<Calibration>();
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void write_calibration(const std::filesystem::path& path, const Calibration& c) {
  write_json_file(path, json(c));
}

}  // namespace gplan::io
