#pragma once

// Colored world-frame point clouds lifted from ERP frames: plane snapping,
// z-buffered splat rendering, PLY export and novel-view camera paths.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "erpgeo/egomotion.hpp"
#include "erpgeo/pose.hpp"
#include "erpgeo/ransac.hpp"
#include "erpgeo/sphere.hpp"
#include "erpgeo/volume.hpp"

namespace erpgeo {

struct CloudPoint {
  Vec3 xyz = Vec3::Zero();
  std::array<float, 3> rgb{0.0f, 0.0f, 0.0f};
  /// Source pixel (frame, row, column).
  std::uint32_t t = 0, h = 0, w = 0;
};

struct PointCloud {
  std::vector<CloudPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Length of the axis-aligned bounding-box diagonal (0 for fewer than 2 points).
  double bbox_diagonal() const {
    if (points.empty()) return 0.0;
    Vec3 lo = points.front().xyz, hi = lo;
    for (const CloudPoint& p : points) {
      lo = lo.cwiseMin(p.xyz);
      hi = hi.cwiseMax(p.xyz);
    }
    return (hi - lo).norm();
  }
};

/// Lifts every stride-th pixel (rows and columns) with finite positive depth.
template <typename Scalar>
PointCloud lift_pointcloud(const Image& frame, const FrameView<Scalar>& depth, const RigidPose& pose,
                           std::size_t stride = 1, std::uint32_t frame_index = 0) {
  require(stride >= 1, "lift_pointcloud: stride must be >= 1");
  require(frame.rows == depth.rows && frame.cols == depth.cols, "lift_pointcloud: frame/depth shape mismatch");
  require(frame.channels == 3, "lift_pointcloud: frame must be RGB");
  PointCloud pc;
  for (std::size_t h = 0; h < frame.rows; h += stride) {
    for (std::size_t w = 0; w < frame.cols; w += stride) {
      const double d = static_cast<double>(depth(h, w));
      if (!std::isfinite(d) || !(d > 0.0)) continue;
      CloudPoint p;
      p.xyz = lift_point(pixel_to_erp(h, w, frame.rows, frame.cols), d, pose);
      for (std::size_t c = 0; c < 3; ++c) p.rgb[c] = frame(h, w, c);
      p.t = frame_index;
      p.h = static_cast<std::uint32_t>(h);
      p.w = static_cast<std::uint32_t>(w);
      pc.points.push_back(p);
    }
  }
  if (pc.empty()) throw ValidationError("lift_pointcloud: no pixel with valid depth");
  return pc;
}

// ---------------------------------------------------------------------------
// Plane snapping

/// Plane n . x + d = 0 with unit normal.
struct Plane {
  Vec3 normal = Vec3::UnitY();
  double offset = 0.0;

  double distance(const Vec3& x) const { return normal.dot(x) + offset; }
};

/// Least-squares plane through a point set (smallest principal axis);
/// nullopt when the points are collinear.
inline std::optional<Plane> fit_plane(std::span<const Vec3> pts) {
  if (pts.size() < 3) return std::nullopt;
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();
  if (!(ev(1) > 1e-12 * ev(2))) return std::nullopt;
  Plane pl;
  pl.normal = eig.eigenvectors().col(0).normalized();
  pl.offset = -pl.normal.dot(mean);
  return pl;
}

struct PlanarOptions {
  /// Snap distance; unset means 0.01 times the bounding-box diagonal.
  std::optional<double> eps;
  std::size_t k_planes = 8;
  std::size_t iterations = 256;
  /// Minimum support as a fraction of the cloud (never below 3 points).
  double min_support = 0.01;
  std::uint64_t seed = 0;
};

struct PlanarResult {
  PointCloud cloud;
  std::vector<Plane> planes;
  /// Plane index per point, -1 for points on no plane.
  std::vector<int> assignment;
};

/// Repeatedly fits a plane to the remaining points, projects its points
/// within eps onto it and removes them from the pool. Points already on the
/// plane to within roundoff keep their coordinates.
inline PlanarResult planar_regularize_detailed(const PointCloud& pc, const PlanarOptions& opt = {}) {
  require(pc.size() >= 3, "planar_regularize: needs at least 3 points");
  const double diag = pc.bbox_diagonal();
  const double eps = opt.eps ? *opt.eps : 0.01 * diag;
  require(eps > 0.0, "planar_regularize: snap distance must be positive");
  const double keep_tol = 1e-10 * std::max(diag, 1.0);

  PlanarResult out;
  out.cloud = pc;
  out.assignment.assign(pc.size(), -1);
  std::vector<std::size_t> pool(pc.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  std::vector<Vec3> pts, sample;

  for (std::size_t k = 0; k < opt.k_planes && pool.size() >= 3; ++k) {
    pts.clear();
    for (std::size_t i : pool) pts.push_back(out.cloud.points[i].xyz);
    RansacOptions ro;
    ro.iterations = opt.iterations;
    ro.threshold = eps;
    ro.min_inliers = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(opt.min_support * static_cast<double>(pc.size()))));
    ro.seed = opt.seed + k;
    auto fit = [&](std::span<const std::size_t> idx) {
      sample.clear();
      for (std::size_t i : idx) sample.push_back(pts[i]);
      return fit_plane(sample);
    };
    auto residual = [&](const Plane& p, std::size_t i) { return std::abs(p.distance(pts[i])); };
    RansacResult<Plane> r;
    try {
      r = ransac<Plane>(pts.size(), 3, ro, fit, residual);
    } catch (const ValidationError&) {
      break;
    }
    const int plane_id = static_cast<int>(out.planes.size());
    out.planes.push_back(r.model);
    std::vector<std::size_t> rest;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      const std::size_t i = pool[j];
      if (!r.inliers[j]) {
        rest.push_back(i);
        continue;
      }
      Vec3& x = out.cloud.points[i].xyz;
      const double dist = r.model.distance(x);
      if (std::abs(dist) > keep_tol) x -= dist * r.model.normal;
      out.assignment[i] = plane_id;
    }
    pool.swap(rest);
  }
  return out;
}

inline PointCloud planar_regularize(const PointCloud& pc, const PlanarOptions& opt = {}) {
  return planar_regularize_detailed(pc, opt).cloud;
}

// ---------------------------------------------------------------------------
// Splat rendering

/// Pinhole view: intrinsics plus world-to-camera pose (camera looks down +z, +y up).
struct PinholeView {
  PinholeIntrinsics intrinsics;
  RigidPose pose;
};

struct SplatConfig {
  int radius_px = 1;
  std::array<float, 3> background{0.0f, 0.0f, 0.0f};
};

struct SplatImage {
  Image rgb;
  /// Radial distance of the winning point per pixel, +inf where uncovered.
  std::vector<double> depth;
};

/// Square splats with a strict-less z-test on radial camera distance; at
/// equal depth the earlier point in input order wins.
inline SplatImage render_pointcloud(const PointCloud& pc, const PinholeView& view, const SplatConfig& cfg = {}) {
  const PinholeIntrinsics& k = view.intrinsics;
  k.validate();
  require(cfg.radius_px >= 0, "splat radius must be >= 0");
  require(static_cast<std::size_t>(cfg.radius_px) <= std::min(k.width, k.height) / 4,
          "splat radius must be <= min(width, height) / 4");
  const auto W = static_cast<long long>(k.width), H = static_cast<long long>(k.height);
  SplatImage out;
  out.rgb = Image(k.height, k.width, 3);
  for (std::size_t i = 0; i < k.height * k.width; ++i)
    for (std::size_t c = 0; c < 3; ++c) out.rgb.values[i * 3 + c] = cfg.background[c];
  out.depth.assign(k.height * k.width, std::numeric_limits<double>::infinity());

  for (const CloudPoint& p : pc.points) {
    const Vec3 x = view.pose.apply(p.xyz);
    const auto px = k.project(x);
    if (!px) continue;
    const double cx = std::floor(px->x()), cy = std::floor(px->y());
    if (!(cx >= 0.0 && cx < static_cast<double>(W) && cy >= 0.0 && cy < static_cast<double>(H))) continue;
    const double z = x.norm();
    const long long c0 = static_cast<long long>(cx), r0 = static_cast<long long>(cy);
    for (long long r = std::max(0LL, r0 - cfg.radius_px); r <= std::min(H - 1, r0 + cfg.radius_px); ++r) {
      for (long long c = std::max(0LL, c0 - cfg.radius_px); c <= std::min(W - 1, c0 + cfg.radius_px); ++c) {
        const std::size_t idx = static_cast<std::size_t>(r * W + c);
        if (z < out.depth[idx]) {
          out.depth[idx] = z;
          for (std::size_t ch = 0; ch < 3; ++ch) out.rgb.values[idx * 3 + ch] = p.rgb[ch];
        }
      }
    }
  }
  return out;
}

/// World-to-camera pose of a perspective crop taken from an ERP frame with
/// pose `erp_pose`.
inline RigidPose crop_pose(const RigidPose& erp_pose, const PerspectiveCamera& cam) {
  RigidPose rot;
  rot.R = cam.rotation().transpose();
  return rot * erp_pose;
}

// ---------------------------------------------------------------------------
// Camera paths

/// Camera-to-world rotation looking from `eye` toward `target` with +y up.
inline Mat3 look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitY()) {
  const Vec3 f = (target - eye).normalized();
  Vec3 r = up.cross(f);
  if (r.norm() < 1e-9) r = Vec3::UnitX().cross(f);
  r.normalize();
  const Vec3 u = f.cross(r);
  Mat3 m;
  m.col(0) = r;
  m.col(1) = u;
  m.col(2) = f;
  return m;
}

enum class PathPreset { kOrbit, kWalk, kFly };

inline PathPreset parse_path_preset(const std::string& name) {
  if (name == "orbit") return PathPreset::kOrbit;
  if (name == "walk") return PathPreset::kWalk;
  if (name == "fly") return PathPreset::kFly;
  throw ValidationError("unknown camera path preset '" + name + "' (expected orbit, walk or fly)");
}

struct PathOptions {
  std::size_t frames = 48;
  /// Orbit radius around the anchor center (metres).
  double radius = 0.5;
  /// Per-frame displacement for walk and fly (metres).
  double step = 0.02;
};

/// Novel-view trajectory around an anchor pose (world-to-camera).
/// orbit: circles the anchor center in the horizontal plane facing one
/// radius ahead; walk: moves along the anchor heading; fly: moves forward
/// while rising and swaying in yaw.
inline PoseSequence camera_path(PathPreset preset, const RigidPose& anchor, const PathOptions& opt = {}) {
  require(opt.frames >= 1, "camera path needs at least one frame");
  const Mat3 c2w = anchor.R.transpose();
  const Vec3 center = anchor.center();
  const Vec3 fwd = c2w.col(2);
  PoseSequence out;
  out.reserve(opt.frames);
  for (std::size_t i = 0; i < opt.frames; ++i) {
    const double s = static_cast<double>(i);
    switch (preset) {
      case PathPreset::kOrbit: {
        const double a = kTwoPi * s / static_cast<double>(opt.frames);
        const Vec3 eye = center + opt.radius * Vec3(std::sin(a), 0.0, std::cos(a) - 1.0);
        const Vec3 target = center + opt.radius * fwd;
        out.push_back(pose_from_center(look_at(eye, target), eye));
        break;
      }
      case PathPreset::kWalk:
        out.push_back(pose_from_center(c2w, center + s * opt.step * fwd));
        break;
      case PathPreset::kFly: {
        const double yaw = 0.3 * std::sin(kTwoPi * s / static_cast<double>(std::max<std::size_t>(opt.frames, 2)));
        const Vec3 eye = center + s * opt.step * (fwd + 0.25 * Vec3::UnitY());
        out.push_back(pose_from_center(yaw_rotation(yaw) * c2w, eye));
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PLY

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

/// ASCII PLY with float x y z and uchar red green blue.
inline void export_ply(const PointCloud& pc, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "ply\nformat ascii 1.0\nelement vertex " << pc.size()
    << "\nproperty float x\nproperty float y\nproperty float z\n"
       "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  char buf[128];
  for (const CloudPoint& p : pc.points) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %u %u %u\n", static_cast<double>(static_cast<float>(p.xyz.x())),
                  static_cast<double>(static_cast<float>(p.xyz.y())), static_cast<double>(static_cast<float>(p.xyz.z())),
                  to_byte(p.rgb[0]), to_byte(p.rgb[1]), to_byte(p.rgb[2]));
    f << buf;
  }
  if (!f) throw IoError("write failed for '" + path + "'");
}

/// Reads PLY files written by export_ply (ASCII, same vertex layout).
inline PointCloud import_ply(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  auto bad = [&](const std::string& why) { return IoError("malformed PLY '" + path + "': " + why); };
  std::string line;
  if (!std::getline(f, line) || line != "ply") throw bad("missing magic");
  std::size_t count = 0;
  bool have_count = false;
  std::vector<std::string> props;
  while (std::getline(f, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw bad("only ascii PLY is supported");
    } else if (kw == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex" || !ls) throw bad("expected a vertex element");
      have_count = true;
    } else if (kw == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(type + " " + name);
    }
  }
  const std::vector<std::string> expected = {"float x", "float y", "float z",
                                             "uchar red", "uchar green", "uchar blue"};
  if (line != "end_header" || !have_count) throw bad("incomplete header");
  if (props != expected) throw bad("unexpected vertex properties");
  PointCloud pc;
  pc.points.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    float x, y, z;
    unsigned r, g, b;
    if (!(f >> x >> y >> z >> r >> g >> b) || r > 255 || g > 255 || b > 255)
      throw bad("vertex " + std::to_string(i) + " unreadable");
    CloudPoint& p = pc.points[i];
    p.xyz = Vec3(x, y, z);
    p.rgb = {static_cast<float>(r) / 255.0f, static_cast<float>(g) / 255.0f, static_cast<float>(b) / 255.0f};
  }
  return pc;
}

}  // namespace erpgeo
