#pragma once

// Seeded loss fixtures built from synthetic clips (normalized depth, exact
// tracks and poses, a perturbed prediction).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "erpgeo/losses.hpp"
#include "erpgeo/synth.hpp"

namespace erpgeo {

struct LossFixtureOptions {
  std::size_t frames = 6;
  std::size_t rows = 24;
  std::size_t cols = 48;
  std::size_t grid_rows = 6;
  std::size_t grid_cols = 12;
  /// Standard deviation of the Gaussian perturbation of the prediction
  /// (normalized depth units).
  double noise = 0.02;
  bool with_sphere = true;
};

struct LossFixture {
  SceneSpec scene;
  DepthVideo gt;
  DepthVideo pred;
  TrackSet tracks;
  PoseSequence poses;  // translations in normalized depth units
  std::vector<double> row_weights;
  /// Metres per normalized unit.
  double depth_scale = 1.0;
};

/// Scene with a seeded random camera path (two keyframes inside the room).
inline SceneSpec random_scene(std::uint64_t seed, const LossFixtureOptions& opt = {}) {
  SceneSpec s = opt.with_sphere ? default_dynamic_scene(seed) : default_scene(seed);
  s.frames = opt.frames;
  s.rows = opt.rows;
  s.cols = opt.cols;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> ux(-1.4, -0.2), uy(-0.3, 0.4), uz(-1.5, 1.5);
  std::uniform_real_distribution<double> yaw(-kPi, kPi), pitch(-0.2, 0.2), step(-0.4, 0.4);
  const Vec3 a(ux(rng), uy(rng), uz(rng));
  const Vec3 b = a + Vec3(step(rng), 0.5 * step(rng), step(rng));
  const double y0 = yaw(rng);
  s.keyframes = {pose_from_center(yaw_rotation(y0) * pitch_rotation(pitch(rng)), a),
                 pose_from_center(yaw_rotation(y0 + 0.5 * step(rng)) * pitch_rotation(pitch(rng)), b)};
  return s;
}

/// Up to `count` track queries on the sphere's visible cap at frame 0.
inline std::vector<TrackQuery> sphere_queries(const Scene& scene, std::size_t count, std::uint64_t seed) {
  const auto& sphere = scene.spec().sphere;
  require(sphere.has_value(), "sphere_queries: scene has no sphere");
  const RigidPose& pose = scene.poses()[0];
  const Vec3 to_center = pose.R * (scene.sphere_center(0) - pose.center());
  const double dist = to_center.norm();
  const double cap = std::asin(std::min(1.0, sphere->radius / dist));
  const Vec3 axis = to_center / dist;
  const Vec3 side = axis.unitOrthogonal(), up = axis.cross(side);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi), rad(0.0, 1.0);
  std::vector<TrackQuery> out;
  for (std::size_t tries = 0; out.size() < count && tries < 100 * count; ++tries) {
    const double r = 0.8 * cap * std::sqrt(rad(rng)), a = ang(rng);
    const Vec3 d = std::cos(r) * axis + std::sin(r) * (std::cos(a) * side + std::sin(a) * up);
    const TrackQuery q = make_query(scene, dir_to_erp(d));
    if (q.on_sphere) out.push_back(q);
  }
  return out;
}

/// Static grid queries plus sphere queries making up `sphere_fraction` of the total.
inline std::vector<TrackQuery> mixed_queries(const Scene& scene, std::size_t gh, std::size_t gw,
                                             double sphere_fraction, std::uint64_t seed) {
  std::vector<TrackQuery> q;
  for (const TrackQuery& g : grid_queries(scene, gh, gw))
    if (!g.on_sphere) q.push_back(g);
  const auto movers = static_cast<std::size_t>(
      std::llround(sphere_fraction * static_cast<double>(q.size()) / (1.0 - sphere_fraction)));
  const auto s = sphere_queries(scene, movers, seed);
  require(s.size() == movers, "mixed_queries: sphere cap too small for the requested tracks");
  q.insert(q.end(), s.begin(), s.end());
  return q;
}

inline LossFixture make_loss_fixture(std::uint64_t seed, const LossFixtureOptions& opt = {}) {
  LossFixture fx;
  fx.scene = random_scene(seed, opt);
  const Scene scene(fx.scene);
  fx.gt = render_depth_video(scene);
  fx.depth_scale = *std::max_element(fx.gt.values.begin(), fx.gt.values.end());
  for (double& d : fx.gt.values) d /= fx.depth_scale;
  fx.gt.unit = DepthUnit::kNormalized;
  fx.poses = scene.poses();
  for (RigidPose& p : fx.poses) p.t /= fx.depth_scale;
  fx.tracks = exact_tracks(scene, opt.grid_rows, opt.grid_cols);
  for (Track& tr : fx.tracks.tracks)
    for (auto& x : tr.xyz_world)
      if (x) *x /= fx.depth_scale;
  fx.row_weights = area_weights(opt.rows);

  fx.pred = fx.gt;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, opt.noise);
  for (double& d : fx.pred.values) d = std::max(1e-3, d + n(rng));
  return fx;
}

}  // namespace erpgeo
