#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "erpgeo/metrics.hpp"
#include "erpgeo/oracle.hpp"
#include "erpgeo/synth.hpp"

using namespace erpgeo;

namespace {

// Independent intersection oracle: slab exit distance of the box and the
// geometric (closest-approach) form of the sphere hit.
double oracle_distance(const SceneSpec& s, const Vec3& o, const Vec3& d, std::size_t frame) {
  double far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d(a)) < 1e-300) continue;
    const double s0 = (-s.half_extents(a) - o(a)) / d(a);
    const double s1 = (s.half_extents(a) - o(a)) / d(a);
    far = std::min(far, std::max(s0, s1));
  }
  if (s.sphere) {
    const Vec3 c = s.sphere->path.at(static_cast<double>(frame));
    const double along = (c - o).dot(d);
    const double miss2 = (c - o).squaredNorm() - along * along;
    const double r2 = s.sphere->radius * s.sphere->radius;
    if (along > 0.0 && miss2 <= r2) {
      const double hit = along - std::sqrt(r2 - miss2);
      if (hit > 0.0) far = std::min(far, hit);
    }
  }
  return far;
}

SceneSpec cube_room(std::size_t rows, std::size_t cols) {
  SceneSpec s;
  s.half_extents = Vec3(1, 1, 1);
  s.frames = 1;
  s.rows = rows;
  s.cols = cols;
  return s;
}

}  // namespace

TEST(Render, UnitRoomDistances) {
  const Scene scene(cube_room(9, 16));
  const RenderedFrame f = render_erp(scene, 0);
  // Row 4 is the equator, column 8 faces +z.
  EXPECT_NEAR(f.depth[4 * 16 + 8], 1.0, 1e-15);
  EXPECT_NEAR(f.depth[4 * 16 + 12], 1.0, 1e-15);
  EXPECT_NEAR(f.depth[0], 1.0, 1e-15);
  const RayHit corner = scene.cast(Vec3::Zero(), Vec3(1, 1, 1).normalized(), 0);
  EXPECT_NEAR(corner.distance, std::sqrt(3.0), 1e-15);
  const RayHit down = scene.cast(Vec3::Zero(), Vec3(-1, -1, 1).normalized(), 0);
  EXPECT_NEAR(down.distance, std::sqrt(3.0), 1e-15);
}

TEST(Render, DepthMatchesIntersectionOracle) {
  for (bool dynamic : {false, true}) {
    SceneSpec s = dynamic ? default_dynamic_scene(2) : default_scene(2);
    s.frames = 5;
    s.rows = 64;
    s.cols = 128;
    const Scene scene(s);
    for (std::size_t t = 0; t < s.frames; t += 2) {
      const RenderedFrame f = render_erp(scene, t);
      const RigidPose& pose = scene.poses()[t];
      double worst = 0.0;
      for (std::size_t h = 0; h < s.rows; ++h)
        for (std::size_t w = 0; w < s.cols; ++w) {
          const Vec3 d = pose.R.transpose() * erp_to_dir(pixel_to_erp(h, w, s.rows, s.cols));
          worst = std::max(worst, std::abs(f.depth[h * s.cols + w] - oracle_distance(s, pose.center(), d, t)));
        }
      EXPECT_LT(worst, 1e-6);
    }
  }
}

TEST(Render, YawHalfTurnSymmetry) {
  SceneSpec a = cube_room(17, 32);
  a.half_extents = Vec3(2.0, 1.0, 3.0);
  SceneSpec b = a;
  b.keyframes = {pose_from_center(yaw_rotation(kPi), Vec3::Zero())};
  const auto da = render_erp(Scene(a), 0).depth, db = render_erp(Scene(b), 0).depth;
  for (std::size_t h = 0; h < 17; ++h)
    for (std::size_t w = 0; w < 32; ++w) EXPECT_NEAR(db[h * 32 + w], da[h * 32 + (w + 16) % 32], 1e-12);
}

TEST(Render, DeterministicForSeed) {
  SceneSpec s = default_dynamic_scene(7);
  s.frames = 2;
  s.rows = 32;
  s.cols = 64;
  const Scene a(s), b(s);
  EXPECT_EQ(render_erp(a, 1).rgb.values, render_erp(b, 1).rgb.values);
  s.seed = 8;
  EXPECT_NE(render_erp(a, 1).rgb.values, render_erp(Scene(s), 1).rgb.values);
}

TEST(SceneSpec, RejectsInvalidCameras) {
  SceneSpec s = default_scene(0);
  s.keyframes = {pose_from_center(Mat3::Identity(), Vec3(5, 0, 0))};
  EXPECT_THROW(Scene{s}, ValidationError);
  s = default_dynamic_scene(0);
  s.keyframes = {pose_from_center(Mat3::Identity(), s.sphere->path.at(0.0))};
  EXPECT_THROW(Scene{s}, ValidationError);
  s = default_scene(0);
  s.frames = 0;
  EXPECT_THROW(Scene{s}, ValidationError);
  s = default_scene(0);
  EXPECT_THROW(render_erp(Scene(s), 93), ValidationError);
}

TEST(ExactTracks, StaticCameraIsConstant) {
  SceneSpec s = default_scene(1);
  s.keyframes = {pose_from_center(yaw_rotation(0.4), Vec3(0.3, 0.2, -0.1))};
  s.frames = 6;
  s.rows = 32;
  s.cols = 64;
  const TrackSet ts = exact_tracks(Scene(s), 5, 10);
  ASSERT_EQ(ts.size(), 50u);
  for (const Track& tr : ts.tracks)
    for (std::size_t t = 0; t < 6; ++t) {
      EXPECT_EQ(tr.vis[t], 1);
      EXPECT_NEAR(tr.uv[t].u, tr.uv[0].u, 1e-12);
      EXPECT_NEAR(tr.uv[t].v, tr.uv[0].v, 1e-12);
    }
  EXPECT_EQ(smooth3d(ts), 0.0);
}

TEST(ExactTracks, GridQueriesAreCellCentres) {
  SceneSpec s = cube_room(8, 16);
  const TrackSet ts = exact_tracks(Scene(s), 2, 4);
  EXPECT_NEAR(ts.tracks[0].uv[0].u, 0.125, 1e-12);
  EXPECT_NEAR(ts.tracks[0].uv[0].v, 0.25, 1e-12);
  EXPECT_NEAR(ts.tracks[7].uv[0].u, 0.875, 1e-12);
  EXPECT_NEAR(ts.tracks[7].uv[0].v, 0.75, 1e-12);
}

TEST(ExactTracks, ApproachingWallShrinksDepth) {
  SceneSpec s = default_scene(0);
  s.keyframes = {pose_from_center(Mat3::Identity(), Vec3(0, 0, -2)),
                 pose_from_center(Mat3::Identity(), Vec3(0, 0, 2))};
  s.frames = 10;
  s.rows = 32;
  s.cols = 64;
  const Scene scene(s);
  const TrackSet ts = exact_tracks(scene, {make_query(scene, {0.5, 0.5}), make_query(scene, {0.55, 0.45})});
  for (const Track& tr : ts.tracks) {
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < s.frames; ++t) {
      const double d = (*tr.xyz_world[t] - scene.poses()[t].center()).norm();
      EXPECT_LT(d, prev);
      prev = d;
    }
  }
}

TEST(ExactTracks, SphereOcclusionInterval) {
  SceneSpec s = default_scene(0);
  s.keyframes = {RigidPose::identity()};
  DynamicSphere sp;
  sp.radius = 0.4;
  sp.path.kind = SpherePath::Kind::kAffine;
  sp.path.origin = Vec3(-2.05, 0.0, 2.0);
  sp.path.velocity = Vec3(0.2, 0.0, 0.0);
  s.sphere = sp;
  s.frames = 21;
  s.rows = 32;
  s.cols = 64;
  const Scene scene(s);
  const TrackQuery q = make_query(scene, {0.5, 0.5});
  ASSERT_FALSE(q.on_sphere);
  EXPECT_NEAR((q.point - Vec3(0, 0, 4)).norm(), 0.0, 1e-12);
  const Track tr = exact_tracks(scene, {q}).tracks[0];
  // Line of sight is the z axis; the sphere covers it while |x(t)| < 0.4, i.e. 8.25 < t < 12.25.
  for (std::size_t t = 0; t < s.frames; ++t) {
    const double x = sp.path.at(static_cast<double>(t)).x();
    EXPECT_EQ(tr.vis[t], std::abs(x) < 0.4 ? 0 : 1) << "frame " << t;
  }
}

TEST(ExactTracks, SpherePointsFollowThePath) {
  SceneSpec s = default_dynamic_scene(3);
  s.keyframes = {pose_from_center(yaw_rotation(1.2), Vec3(-1.0, 0.0, -1.0))};
  s.frames = 12;
  s.rows = 64;
  s.cols = 128;
  const Scene scene(s);
  const auto queries = sphere_queries(scene, 10, 4);
  ASSERT_EQ(queries.size(), 10u);
  const TrackSet ts = exact_tracks(scene, queries);
  for (std::size_t k = 0; k < ts.size(); ++k)
    for (std::size_t t = 0; t < s.frames; ++t)
      EXPECT_LT((*ts.tracks[k].xyz_world[t] - (queries[k].point + scene.sphere_center(t) - scene.sphere_center(0))).norm(),
                1e-12);
  // Static camera: second difference of a circular path has norm 2 r (1 - cos w).
  const auto& path = s.sphere->path;
  const double expect = 2.0 * path.radius * (1.0 - std::cos(path.rate));
  TrackSet all_visible = ts;
  for (Track& tr : all_visible.tracks) tr.vis.assign(s.frames, 1);
  EXPECT_NEAR(smooth3d(all_visible), expect, 1e-12);
  const double visible = smooth3d(ts);
  EXPECT_NEAR(visible, expect, 1e-12);
}

TEST(Keyframes, InterpolationHitsKeysAndStaysRotations) {
  const SceneSpec s = default_scene(0);
  const PoseSequence p = Scene::interpolate_keyframes(s.keyframes, 93);
  EXPECT_LT((p.front().center() - s.keyframes.front().center()).norm(), 1e-12);
  EXPECT_LT((p[46].center() - s.keyframes[1].center()).norm(), 1e-12);
  EXPECT_LT((p.back().center() - s.keyframes.back().center()).norm(), 1e-12);
  EXPECT_LT(rotation_angle(p.back().R, s.keyframes.back().R), 1e-7);
  for (const RigidPose& x : p) EXPECT_TRUE(x.is_rotation());
}

TEST(Render, PinholeMatchesErpCenterRay) {
  SceneSpec s = default_scene(5);
  s.frames = 1;
  const Scene scene(s);
  const PerspectiveCamera cam{90.0, 0.0, 0.0, 33, 33};
  const Image p = render_pinhole(scene, 0, cam);
  const RayHit hit = scene.cast(scene.poses()[0].center(), scene.world_ray({0.5, 0.5}, 0), 0);
  const Rgb c = scene.shade(hit);
  for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(p(16, 16, ch), c[ch]);
}
