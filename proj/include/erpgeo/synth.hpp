#pragma once

// Procedural room scene with an analytic ERP ray caster: frames, radial depth,
// exact point tracks and camera poses.

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "erpgeo/pose.hpp"
#include "erpgeo/sphere.hpp"
#include "erpgeo/tracks.hpp"
#include "erpgeo/volume.hpp"

namespace erpgeo {

using Rgb = std::array<float, 3>;

struct Checker {
  double cell = 1.0;
  Rgb color_a{0.6f, 0.6f, 0.6f};
  Rgb color_b{0.45f, 0.45f, 0.45f};
};

/// Sphere center over time (t in frames): affine c(t) = origin + velocity * t,
/// or a horizontal circle c(t) = origin + r (cos(w t + phase), 0, sin(w t + phase)).
struct SpherePath {
  enum class Kind { kAffine, kCircular };
  Kind kind = Kind::kCircular;
  Vec3 origin = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double radius = 0.0;
  double rate = 0.0;
  double phase = 0.0;

  Vec3 at(double t) const {
    if (kind == Kind::kAffine) return origin + velocity * t;
    const double a = rate * t + phase;
    return origin + radius * Vec3(std::cos(a), 0.0, std::sin(a));
  }
};

struct DynamicSphere {
  double radius = 0.4;
  SpherePath path;
  Rgb color{0.8f, 0.35f, 0.2f};
};

enum class Face : int { kNegX = 0, kPosX, kNegY, kPosY, kNegZ, kPosZ, kSphere };

struct SceneSpec {
  Vec3 half_extents{3.0, 1.5, 4.0};
  /// Faces in order -x, +x, -y, +y, -z, +z.
  std::array<Checker, 6> faces{};
  std::optional<DynamicSphere> sphere;
  /// World-to-camera keyframes spread evenly over the clip.
  std::vector<RigidPose> keyframes{RigidPose{}};
  std::size_t frames = 93;
  std::size_t rows = 512;
  std::size_t cols = 1024;
  double fps = 16.0;
  std::uint64_t seed = 0;
  /// Amplitude of the seeded per-face color jitter.
  double color_jitter = 0.05;
};

/// Six distinct low-contrast face textures.
inline std::array<Checker, 6> default_faces() {
  const std::array<Rgb, 6> base = {Rgb{0.70f, 0.45f, 0.40f}, Rgb{0.40f, 0.60f, 0.45f}, Rgb{0.55f, 0.50f, 0.40f},
                                   Rgb{0.75f, 0.75f, 0.70f}, Rgb{0.40f, 0.45f, 0.65f}, Rgb{0.65f, 0.60f, 0.35f}};
  std::array<Checker, 6> out;
  for (std::size_t i = 0; i < 6; ++i) {
    out[i].color_a = base[i];
    for (int c = 0; c < 3; ++c) out[i].color_b[c] = 0.75f * base[i][c];
  }
  return out;
}

/// Default clip: a 6 x 3 x 8 m room walked diagonally with a slow yaw.
inline SceneSpec default_scene(std::uint64_t seed = 0) {
  SceneSpec s;
  s.faces = default_faces();
  s.seed = seed;
  s.keyframes = {pose_from_center(yaw_rotation(0.0), Vec3(-1.0, 0.0, -1.5)),
                 pose_from_center(yaw_rotation(0.5) * pitch_rotation(0.1), Vec3(0.0, 0.15, 0.0)),
                 pose_from_center(yaw_rotation(1.0), Vec3(1.0, 0.2, 1.5))};
  return s;
}

/// Default clip plus a sphere circling beside the camera path.
inline SceneSpec default_dynamic_scene(std::uint64_t seed = 0) {
  SceneSpec s = default_scene(seed);
  DynamicSphere sp;
  sp.path.kind = SpherePath::Kind::kCircular;
  sp.path.origin = Vec3(1.6, -0.8, -0.5);
  sp.path.radius = 0.8;
  sp.path.rate = 0.2;
  s.sphere = sp;
  return s;
}

struct RayHit {
  double distance = 0.0;
  Face face = Face::kNegX;
  Vec3 point = Vec3::Zero();
};

/// Scene with seeded texture jitter applied and per-frame camera poses resolved.
class Scene {
 public:
  explicit Scene(const SceneSpec& spec) : spec_(spec) {
    require(spec.frames >= 1, "scene: frames must be >= 1");
    require(spec.rows >= 2 && spec.cols >= 1, "scene: ERP size must be at least 2 x 1");
    require((spec.half_extents.array() > 0.0).all(), "scene: room half extents must be positive");
    require(!spec.keyframes.empty(), "scene: at least one camera keyframe is required");
    for (const Checker& f : spec.faces) require(f.cell > 0.0, "scene: checker cell size must be positive");
    if (spec.sphere) require(spec.sphere->radius > 0.0, "scene: sphere radius must be positive");
    for (const RigidPose& k : spec.keyframes) require(k.is_rotation(1e-6), "scene: keyframe R is not a rotation");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> jitter(-spec.color_jitter, spec.color_jitter);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    faces_ = spec.faces;
    for (std::size_t f = 0; f < 6; ++f) {
      for (int c = 0; c < 3; ++c) {
        const float j = static_cast<float>(jitter(rng));
        faces_[f].color_a[c] = std::clamp(faces_[f].color_a[c] + j, 0.0f, 1.0f);
        faces_[f].color_b[c] = std::clamp(faces_[f].color_b[c] + j, 0.0f, 1.0f);
      }
      phase_[f] = Vec2(unit(rng), unit(rng)) * faces_[f].cell;
    }

    poses_ = interpolate_keyframes(spec.keyframes, spec.frames);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const Vec3 c = poses_[t].center();
      if (!((c.cwiseAbs().array() < spec.half_extents.array()).all()))
        throw ValidationError("scene: camera outside the room at frame " + std::to_string(t));
      if (spec.sphere && (c - sphere_center(t)).norm() <= spec.sphere->radius)
        throw ValidationError("scene: camera inside the sphere at frame " + std::to_string(t));
    }
  }

  const SceneSpec& spec() const { return spec_; }
  const PoseSequence& poses() const { return poses_; }
  /// Largest room half extent, the length unit for pose tolerances.
  double scale() const { return spec_.half_extents.maxCoeff(); }

  Vec3 sphere_center(std::size_t frame) const { return spec_.sphere->path.at(static_cast<double>(frame)); }

  /// Nearest hit of the world ray origin + s * dir (dir unit length, origin inside the room).
  RayHit cast(const Vec3& origin, const Vec3& dir, std::size_t frame) const {
    RayHit hit;
    hit.distance = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (dir(a) == 0.0) continue;
      const double wall = dir(a) > 0.0 ? spec_.half_extents(a) : -spec_.half_extents(a);
      const double s = (wall - origin(a)) / dir(a);
      if (s < hit.distance) {
        hit.distance = s;
        hit.face = static_cast<Face>(2 * a + (dir(a) > 0.0 ? 1 : 0));
      }
    }
    if (spec_.sphere) {
      const Vec3 oc = origin - sphere_center(frame);
      const double b = dir.dot(oc);
      const double c = oc.squaredNorm() - spec_.sphere->radius * spec_.sphere->radius;
      const double disc = b * b - c;
      if (disc >= 0.0) {
        const double s = -b - std::sqrt(disc);
        if (s > 0.0 && s < hit.distance) {
          hit.distance = s;
          hit.face = Face::kSphere;
        }
      }
    }
    hit.point = origin + hit.distance * dir;
    return hit;
  }

  Rgb shade(const RayHit& hit) const {
    if (hit.face == Face::kSphere) return spec_.sphere->color;
    const int f = static_cast<int>(hit.face);
    const int axis = f / 2;
    const int ia = (axis + 1) % 3, ib = (axis + 2) % 3;
    const Checker& ch = faces_[static_cast<std::size_t>(f)];
    const auto ca = static_cast<long long>(std::floor((hit.point(ia) + phase_[f].x()) / ch.cell));
    const auto cb = static_cast<long long>(std::floor((hit.point(ib) + phase_[f].y()) / ch.cell));
    return ((ca + cb) & 1) == 0 ? ch.color_a : ch.color_b;
  }

  /// World direction of an ERP coordinate seen from frame `frame`.
  Vec3 world_ray(ErpCoord c, std::size_t frame) const { return poses_[frame].R.transpose() * erp_to_dir(c); }

  /// Color and radial depth of one ERP frame.
  void render(std::size_t frame, Image& rgb, std::vector<double>* depth_buf) const {
    require(frame < spec_.frames, "render_erp: frame index out of range");
    const std::size_t H = spec_.rows, W = spec_.cols;
    rgb = Image(H, W, 3);
    if (depth_buf) depth_buf->assign(H * W, 0.0);
    const Vec3 origin = poses_[frame].center();
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        const RayHit hit = cast(origin, world_ray(pixel_to_erp(h, w, H, W), frame), frame);
        const Rgb c = shade(hit);
        for (std::size_t k = 0; k < 3; ++k) rgb(h, w, k) = c[k];
        if (depth_buf) (*depth_buf)[h * W + w] = hit.distance;
      }
    }
  }

  static PoseSequence interpolate_keyframes(const std::vector<RigidPose>& keys, std::size_t frames) {
    PoseSequence out(frames);
    if (keys.size() == 1) {
      std::fill(out.begin(), out.end(), keys.front());
      return out;
    }
    const double segs = static_cast<double>(keys.size() - 1);
    for (std::size_t t = 0; t < frames; ++t) {
      const double x = frames == 1 ? 0.0 : segs * static_cast<double>(t) / static_cast<double>(frames - 1);
      const std::size_t k = std::min(static_cast<std::size_t>(x), keys.size() - 2);
      const double s = x - static_cast<double>(k);
      const Eigen::Quaterniond qa(Mat3(keys[k].R.transpose())), qb(Mat3(keys[k + 1].R.transpose()));
      const Mat3 cam_to_world = qa.slerp(s, qb).normalized().toRotationMatrix();
      const Vec3 center = (1.0 - s) * keys[k].center() + s * keys[k + 1].center();
      out[t] = pose_from_center(cam_to_world, center);
    }
    return out;
  }

 private:
  SceneSpec spec_;
  std::array<Checker, 6> faces_{};
  std::array<Vec2, 6> phase_{};
  PoseSequence poses_;
};

struct RenderedFrame {
  Image rgb;
  std::vector<double> depth;  // rows * cols, radial metres
};

inline RenderedFrame render_erp(const Scene& scene, std::size_t frame) {
  RenderedFrame out;
  scene.render(frame, out.rgb, &out.depth);
  return out;
}

/// Direct pinhole ray cast of frame `frame` through a perspective camera
/// mounted at that frame's ERP pose.
inline Image render_pinhole(const Scene& scene, std::size_t frame, const PerspectiveCamera& cam) {
  cam.validate();
  const PinholeIntrinsics k = cam.intrinsics();
  const RigidPose& pose = scene.poses()[frame];
  const Mat3 to_world = pose.R.transpose() * cam.rotation();
  const Vec3 origin = pose.center();
  Image out(cam.height, cam.width, 3);
  for (std::size_t r = 0; r < cam.height; ++r)
    for (std::size_t c = 0; c < cam.width; ++c) {
      const Vec3 d = (to_world * k.ray(static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5)).normalized();
      const Rgb col = scene.shade(scene.cast(origin, d, frame));
      for (std::size_t ch = 0; ch < 3; ++ch) out(r, c, ch) = col[ch];
    }
  return out;
}

/// Whole-clip depth in memory; meant for small test clips.
inline DepthVideo render_depth_video(const Scene& scene) {
  const SceneSpec& s = scene.spec();
  DepthVideo d(s.frames, s.rows, s.cols, 0.0, DepthUnit::kMeters);
  for (std::size_t t = 0; t < s.frames; ++t) {
    const RenderedFrame f = render_erp(scene, t);
    std::copy(f.depth.begin(), f.depth.end(), d.values.begin() + static_cast<std::ptrdiff_t>(t * s.rows * s.cols));
  }
  return d;
}

inline ErpVideo render_video(const Scene& scene) {
  ErpVideo v;
  v.fps = scene.spec().fps;
  for (std::size_t t = 0; t < scene.spec().frames; ++t) v.frames.push_back(render_erp(scene, t).rgb);
  return v;
}

/// Surface point fixed at frame 0 by casting the query ray. Sphere points move
/// with the sphere center (pure translation).
struct TrackQuery {
  ErpCoord uv;
  Vec3 point = Vec3::Zero();
  bool on_sphere = false;
};

inline TrackQuery make_query(const Scene& scene, ErpCoord uv) {
  const RayHit hit = scene.cast(scene.poses()[0].center(), scene.world_ray(uv, 0), 0);
  return {uv, hit.point, hit.face == Face::kSphere};
}

/// Regular gh x gw query grid at cell centers of frame 0.
inline std::vector<TrackQuery> grid_queries(const Scene& scene, std::size_t gh, std::size_t gw) {
  require(gh >= 1 && gw >= 1, "exact_tracks: grid must hold at least one point");
  std::vector<TrackQuery> q;
  q.reserve(gh * gw);
  for (std::size_t j = 0; j < gh; ++j)
    for (std::size_t i = 0; i < gw; ++i)
      q.push_back(make_query(scene, {(static_cast<double>(i) + 0.5) / static_cast<double>(gw),
                                     (static_cast<double>(j) + 0.5) / static_cast<double>(gh)}));
  return q;
}

inline Vec3 query_position(const Scene& scene, const TrackQuery& q, std::size_t frame) {
  if (!q.on_sphere) return q.point;
  return q.point + scene.sphere_center(frame) - scene.sphere_center(0);
}

/// Reprojects each query's surface point into every frame. A sample is
/// visible when the ray toward it reaches it before any other surface.
inline TrackSet exact_tracks(const Scene& scene, const std::vector<TrackQuery>& queries) {
  const std::size_t T = scene.spec().frames;
  TrackSet set;
  set.num_frames = T;
  set.tracks.reserve(queries.size());
  for (std::size_t k = 0; k < queries.size(); ++k) {
    Track tr;
    tr.id = static_cast<std::int64_t>(k);
    tr.uv.resize(T);
    tr.vis.resize(T);
    tr.xyz_world.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      const Vec3 p = query_position(scene, queries[k], t);
      const RigidPose& pose = scene.poses()[t];
      const Vec3 x = pose.apply(p);
      const double r = x.norm();
      tr.xyz_world[t] = p;
      tr.uv[t] = dir_to_erp(x);
      const RayHit hit = scene.cast(pose.center(), pose.R.transpose() * (x / r), t);
      tr.vis[t] = hit.distance >= r - 1e-6 * std::max(1.0, r) ? 1 : 0;
    }
    set.tracks.push_back(std::move(tr));
  }
  return set;
}

inline TrackSet exact_tracks(const Scene& scene, std::size_t gh, std::size_t gw) {
  return exact_tracks(scene, grid_queries(scene, gh, gw));
}

}  // namespace erpgeo
