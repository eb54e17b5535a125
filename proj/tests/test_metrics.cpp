#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

#include "erpgeo/metrics.hpp"
#include "erpgeo/oracle.hpp"
#include "erpgeo/synth.hpp"

using namespace erpgeo;

namespace {

Eigen::MatrixXd random_set(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double shift = 0.0) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng) + shift * static_cast<double>(j % 3);
  return m;
}

Eigen::MatrixXd column(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

TrackSet parabola_tracks(std::size_t frames) {
  TrackSet ts;
  ts.num_frames = frames;
  Track tr;
  for (std::size_t t = 0; t < frames; ++t) {
    const double x = static_cast<double>(t);
    tr.uv.push_back({0.5, 0.5});
    tr.vis.push_back(1);
    tr.xyz_world.emplace_back(Vec3(0, 0, 0.5 * x * x));
  }
  ts.tracks.push_back(tr);
  return ts;
}

// Brute-force 1-D Gaussian Fréchet distance with divide-by-N variance.
double frechet_1d(const std::vector<double>& a, const std::vector<double>& b) {
  auto stats = [](const std::vector<double>& v) {
    double m = 0.0, s = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, s / static_cast<double>(v.size())};
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  return (ma - mb) * (ma - mb) + va + vb - 2.0 * std::sqrt(va * vb);
}

}  // namespace

TEST(Sqrtm, ClosedForms) {
  EXPECT_LT((sqrtm_psd(Eigen::MatrixXd::Identity(5, 5)) - Eigen::MatrixXd::Identity(5, 5)).norm(), 1e-14);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 9;
  const Eigen::MatrixXd s = sqrtm_psd(d);
  EXPECT_NEAR(s(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(s(1, 1), 3.0, 1e-14);
  EXPECT_NEAR(s(0, 1), 0.0, 1e-14);
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 0, 1;
  try {
    sqrtm_psd(a);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "sqrtm_psd: matrix is not symmetric");
  }
}

TEST(Sqrtm, ReconstructsRandomPsd) {
  std::mt19937_64 rng(1);
  for (Eigen::Index n : {1, 3, 17, 64, 128}) {
    const Eigen::MatrixXd a = random_set(rng, n + 5, n);
    const Eigen::MatrixXd m = a.transpose() * a;
    const Eigen::MatrixXd s = sqrtm_psd(m);
    EXPECT_LT((s * s - m).norm() / m.norm(), 1e-6) << n;
    EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  }
  // Rank-deficient input: clamped eigenvalues keep the root real.
  const Eigen::MatrixXd low = random_set(rng, 3, 10);
  const Eigen::MatrixXd m = low.transpose() * low;
  const Eigen::MatrixXd s = sqrtm_psd(m);
  EXPECT_TRUE(s.allFinite());
  EXPECT_LT((s * s - m).norm() / m.norm(), 1e-6);
}

TEST(Frechet, OneDimensionalClosedForms) {
  EXPECT_NEAR(frechet(column({-1, 1}), column({0, 2})), 1.0, 1e-12);
  EXPECT_NEAR(frechet(column({-1, 1}), column({-2, 2})), 1.0, 1e-12);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20; ++k) {
    std::vector<double> a(7), b(11);
    for (double& x : a) x = g(rng);
    for (double& x : b) x = 2.0 * g(rng) + 0.5;
    Eigen::MatrixXd ma(7, 1), mb(11, 1);
    for (int i = 0; i < 7; ++i) ma(i, 0) = a[i];
    for (int i = 0; i < 11; ++i) mb(i, 0) = b[i];
    EXPECT_NEAR(frechet(ma, mb), frechet_1d(a, b), 1e-10);
  }
}

TEST(Frechet, SelfSymmetryAndAffineInvariance) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd a = random_set(rng, 200, 16), b = random_set(rng, 150, 16, 0.5);
  EXPECT_LT(frechet(a, a), 1e-9);
  EXPECT_NEAR(frechet(a, b), frechet(b, a), 1e-9);
  EXPECT_GT(frechet(a, b), 0.1);

  std::normal_distribution<double> g;
  Eigen::MatrixXd q = Eigen::MatrixXd::NullaryExpr(16, 16, [&] { return g(rng); });
  q = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ();
  Eigen::RowVectorXd shift = Eigen::RowVectorXd::NullaryExpr(16, [&] { return 3.0 * g(rng); });
  const Eigen::MatrixXd ta = (a * q.transpose()).rowwise() + shift;
  const Eigen::MatrixXd tb = (b * q.transpose()).rowwise() + shift;
  EXPECT_NEAR(frechet(ta, tb), frechet(a, b), 1e-6);
}

TEST(Frechet, Errors) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(frechet(random_set(rng, 5, 3), random_set(rng, 5, 4)), ValidationError);
  EXPECT_THROW(frechet(random_set(rng, 1, 3), random_set(rng, 5, 3)), ValidationError);
  Eigen::MatrixXd bad = random_set(rng, 5, 3);
  bad(2, 1) = std::nan("");
  EXPECT_THROW(frechet(bad, random_set(rng, 5, 3)), ValidationError);
}

TEST(ClipT, CosineAggregation) {
  Eigen::VectorXd text(3);
  text << 1, 2, 2;
  Eigen::MatrixXd same(4, 3);
  for (int i = 0; i < 4; ++i) same.row(i) = (i + 1.0) * text.transpose();
  EXPECT_NEAR(clip_t(same, text), 1.0, 1e-15);
  Eigen::MatrixXd orth(2, 3);
  orth << 2, -1, 0, 0, 1, -1;
  EXPECT_NEAR(clip_t(orth, text), 0.0, 1e-15);
  Eigen::MatrixXd split(4, 3);
  split << text.transpose(), -text.transpose(), 2 * text.transpose(), -3 * text.transpose();
  EXPECT_NEAR(clip_t(split, text), 0.0, 1e-15);
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 3);
  try {
    clip_t(zero, text);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "clip_t: zero-norm embedding");
  }
  EXPECT_THROW(clip_t(same, Eigen::VectorXd::Zero(3)), ValidationError);
}

TEST(Median, EvenAndOdd) {
  EXPECT_EQ(detail::median({3, 1, 2}), 2.0);
  EXPECT_EQ(detail::median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(detail::median({5}), 5.0);
  EXPECT_THROW(detail::median({}), ValidationError);
}

TEST(Smooth3d, ClosedForms) {
  EXPECT_NEAR(smooth3d(parabola_tracks(10)), 1.0, 1e-12);
  TrackSet lin = parabola_tracks(10);
  for (std::size_t t = 0; t < 10; ++t) lin.tracks[0].xyz_world[t] = Vec3(1, 2, 3) + static_cast<double>(t) * Vec3(0.1, -0.2, 0.3);
  EXPECT_NEAR(smooth3d(lin), 0.0, 1e-15);
  TrackSet still = parabola_tracks(5);
  for (auto& x : still.tracks[0].xyz_world) x = Vec3(1, 2, 3);
  EXPECT_EQ(smooth3d(still), 0.0);
}

TEST(Smooth3d, VisibilityGating) {
  TrackSet ts = parabola_tracks(6);
  ts.tracks[0].vis = {1, 1, 0, 1, 1, 0};
  try {
    smooth3d(ts);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "smooth3d: insufficient visibility");
  }
  ts.tracks[0].vis = {1, 1, 1, 0, 0, 0};
  EXPECT_NEAR(smooth3d(ts), 1.0, 1e-12);
}

TEST(Smooth3d, RigidInvariantAndScaleLinear) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  TrackSet ts;
  ts.num_frames = 12;
  for (int k = 0; k < 30; ++k) {
    Track tr;
    for (std::size_t t = 0; t < 12; ++t) {
      tr.uv.push_back({0.5, 0.5});
      tr.vis.push_back(1);
      tr.xyz_world.emplace_back(Vec3(g(rng), g(rng), g(rng)));
    }
    ts.tracks.push_back(tr);
  }
  const double base = smooth3d(ts);
  const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  TrackSet moved = ts, scaled = ts;
  for (Track& tr : moved.tracks)
    for (auto& x : tr.xyz_world) x = r * *x + Vec3(10, -4, 2);
  for (Track& tr : scaled.tracks)
    for (auto& x : tr.xyz_world) x = 3.0 * *x;
  EXPECT_NEAR(smooth3d(moved), base, 1e-12 * base);
  EXPECT_NEAR(smooth3d(scaled), 3.0 * base, 1e-12 * base);
}

TEST(DepthSigma, ClosedForms) {
  DepthVideo alt(2, 3, 4);
  for (std::size_t i = 0; i < 12; ++i) {
    alt.values[i] = 1.0;
    alt.values[12 + i] = 3.0;
  }
  EXPECT_EQ(depth_sigma(alt), 0.5);
  const DepthVideo still(5, 3, 4, 2.7);
  EXPECT_EQ(depth_sigma(still), 0.0);
  DepthVideo partial = alt;
  partial.values[0] = 0.0;  // pixel excluded
  partial.values[13] = std::nan("");
  EXPECT_EQ(depth_sigma(partial), 0.5);
  EXPECT_THROW(depth_sigma(DepthVideo(1, 2, 2, 1.0)), ValidationError);
  EXPECT_THROW(depth_sigma(DepthVideo(3, 2, 2, 0.0)), ValidationError);
}

TEST(DepthSigma, ScaleInvariant) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.5, 4.0);
  DepthVideo d(7, 8, 9);
  for (double& x : d.values) x = u(rng);
  const double base = depth_sigma(d);
  for (double s : {2.0, 0.25, 1024.0}) {
    DepthVideo scaled = d;
    for (double& x : scaled.values) x *= s;
    EXPECT_EQ(depth_sigma(scaled), base);
  }
  DepthVideo ten = d;
  for (double& x : ten.values) x *= 10.0;
  EXPECT_NEAR(depth_sigma(ten), base, 1e-14);
  EXPECT_EQ(depth_sigma(d.cast<float>()), depth_sigma(d.cast<float>()));
}

TEST(TrackLife, Fractions) {
  TrackSet ts;
  ts.num_frames = 4;
  Track a, b;
  a.uv = b.uv = std::vector<ErpCoord>(4);
  a.vis = {1, 1, 0, 0};
  b.vis = {1, 1, 1, 1};
  ts.tracks = {a, b};
  EXPECT_EQ(track_life(ts), 0.75);
  std::swap(ts.tracks[0], ts.tracks[1]);
  EXPECT_EQ(track_life(ts), 0.75);
  EXPECT_EQ(track_life(circular_shift(ts, 3, 8)), 0.75);
  for (Track& tr : ts.tracks) tr.vis.assign(4, 1);
  EXPECT_EQ(track_life(ts), 1.0);
  for (Track& tr : ts.tracks) tr.vis.assign(4, 0);
  EXPECT_EQ(track_life(ts), 0.0);
}

TEST(TrackLife, HalfDurationAfterResampling) {
  TrackSet ts;
  ts.num_frames = 93;
  Track tr;
  tr.uv.assign(93, {});
  tr.vis.assign(93, 0);
  for (std::size_t t = 0; t < 47; ++t) tr.vis[t] = 1;
  ts.tracks.push_back(tr);
  EXPECT_NEAR(track_life(ts, 80), 0.5, 1.0 / 80.0);
}

namespace {

ClipData oracle_side(const Scene& scene, double depth_noise, std::uint64_t seed, bool with_xyz) {
  ClipData c;
  c.num_frames = scene.spec().frames;
  DepthVideo d = render_depth_video(scene);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, depth_noise);
  if (depth_noise > 0.0)
    for (double& x : d.values) x = std::max(1e-3, x * (1.0 + g(rng)));
  c.depth = d.cast<float>();
  c.tracks = exact_tracks(scene, 6, 12);
  if (!with_xyz)
    for (Track& tr : c.tracks->tracks) tr.xyz_world.clear();
  c.poses = scene.poses();
  return c;
}

SceneSpec small_scene(std::uint64_t seed, std::size_t frames = 12) {
  SceneSpec s = default_scene(seed);
  s.frames = frames;
  s.rows = 32;
  s.cols = 64;
  return s;
}

}  // namespace

TEST(EvaluateClip, SelfComparison) {
  const Scene scene(small_scene(1));
  ClipData gt = oracle_side(scene, 0.0, 0, true);
  std::mt19937_64 rng(7);
  gt.embeddings["fvd"] = random_set(rng, 6, 8);
  gt.embeddings["fid"] = random_set(rng, 12, 8);
  const ClipData pred = gt;
  EvalOptions opt;
  opt.t_eval = 10;
  const MetricRow row = evaluate_clip("c1", "habitat", pred, gt, opt);
  EXPECT_LT(*row[Metric::kFvd], 1e-9);
  EXPECT_LT(*row[Metric::kFid], 1e-9);
  EXPECT_FALSE(row[Metric::kFaed].has_value());
  EXPECT_EQ(row.notes.at("faed"), "not computed: embeddings absent");
  EXPECT_FALSE(row[Metric::kClipT].has_value());
  EXPECT_NEAR(*row[Metric::kSmooth3d], 0.0, 1e-12);
  EXPECT_EQ(*row[Metric::kDepthSigma], depth_sigma(resample_temporal(*gt.depth, 10)));
  EXPECT_EQ(*row[Metric::kTrLife], track_life(*gt.tracks, 10));
}

TEST(EvaluateClip, LiftsTracksWithoutPositions) {
  const Scene scene(small_scene(2));
  const ClipData pred = oracle_side(scene, 0.0, 0, false);
  EvalOptions opt;
  opt.t_eval = 12;
  const MetricRow row = evaluate_clip("c", "argus", pred, pred, opt);
  // Static scene points lifted through exact depth and poses barely move.
  EXPECT_LT(*row[Metric::kSmooth3d], 0.02);
}

TEST(EvaluateClip, DepthNoiseRaisesDepthSigma) {
  const Scene scene(small_scene(3));
  EvalOptions opt;
  opt.t_eval = 12;
  double prev = -1.0;
  for (double level : {0.0, 0.02, 0.05}) {
    const ClipData pred = oracle_side(scene, level, 9, true);
    const double v = *evaluate_clip("c", "habitat", pred, pred, opt)[Metric::kDepthSigma];
    EXPECT_GT(v, prev) << level;
    prev = v;
  }
}

TEST(EvaluateClip, MissingInputsAreItemized) {
  ClipData pred, gt;
  try {
    evaluate_clip("clip_42", "habitat", pred, gt);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("clip_42"), std::string::npos);
    EXPECT_NE(msg.find("pred depth"), std::string::npos);
    EXPECT_NE(msg.find("pred tracks"), std::string::npos);
  }
}

TEST(EvaluateClip, CaptionAlignment) {
  const Scene scene(small_scene(4, 6));
  ClipData pred = oracle_side(scene, 0.0, 0, true);
  Eigen::VectorXd text(4);
  text << 1, 0, 0, 0;
  Eigen::MatrixXd frames = Eigen::MatrixXd::Zero(6, 4);
  frames.col(0).setOnes();
  pred.embeddings["clip"] = frames;
  EvalOptions opt;
  opt.t_eval = 6;
  EXPECT_NEAR(*evaluate_clip("c", "habitat", pred, pred, opt, text)[Metric::kClipT], 1.0, 1e-15);
}

TEST(FrechetRows, FidModes) {
  ClipData c;
  c.num_frames = 10;
  std::mt19937_64 rng(8);
  c.embeddings["fid"] = random_set(rng, 10, 4);
  EvalOptions opt;
  opt.t_eval = 5;
  EXPECT_EQ(frechet_rows(c, Metric::kFid, opt)->rows(), 5);
  opt.fid_mode = FidMode::kClipMean;
  const auto mean = frechet_rows(c, Metric::kFid, opt);
  ASSERT_EQ(mean->rows(), 1);
  EXPECT_FALSE(frechet_rows(c, Metric::kFvd, opt).has_value());
}

TEST(Aggregate, MeansPerSourceAndAll) {
  std::vector<MetricRow> rows(3);
  rows[0].clip_id = "b";
  rows[0].source = "argus";
  rows[0][Metric::kTrLife] = 0.5;
  rows[1].clip_id = "a";
  rows[1].source = "argus";
  rows[1][Metric::kTrLife] = 1.0;
  rows[1][Metric::kDepthSigma] = 0.2;
  rows[2].clip_id = "c";
  rows[2].source = "habitat";
  rows[2][Metric::kTrLife] = 0.0;
  const auto aggs = aggregate(rows);
  ASSERT_EQ(aggs.size(), 3u);
  EXPECT_EQ(aggs[0].source, "argus");
  EXPECT_EQ(aggs[0].clips, 2u);
  EXPECT_EQ(*aggs[0].mean[static_cast<std::size_t>(Metric::kTrLife)], 0.75);
  EXPECT_EQ(*aggs[0].mean[static_cast<std::size_t>(Metric::kDepthSigma)], 0.2);
  EXPECT_EQ(aggs[0].count[static_cast<std::size_t>(Metric::kDepthSigma)], 1u);
  EXPECT_EQ(aggs[1].source, "habitat");
  EXPECT_EQ(aggs[2].source, "all");
  EXPECT_EQ(*aggs[2].mean[static_cast<std::size_t>(Metric::kTrLife)], 0.5);
  EXPECT_FALSE(aggs[2].mean[0].has_value());

  const std::string table = format_table(aggs);
  EXPECT_NE(table.find("3D-Smooth"), std::string::npos);
  EXPECT_NE(table.find("0.750"), std::string::npos);
  EXPECT_LT(table.find("FVD"), table.find("Tr-Life"));
}

TEST(Aggregate, PooledFrechet) {
  std::mt19937_64 rng(9);
  PooledRows rows;
  rows.pred = {random_set(rng, 1, 3), random_set(rng, 1, 3)};
  rows.gt = {random_set(rng, 1, 3)};
  EXPECT_FALSE(pooled_frechet(rows).has_value());
  rows.gt.push_back(random_set(rng, 1, 3));
  ASSERT_TRUE(pooled_frechet(rows).has_value());
  Eigen::MatrixXd a(2, 3), b(2, 3);
  a << rows.pred[0], rows.pred[1];
  b << rows.gt[0], rows.gt[1];
  EXPECT_EQ(*pooled_frechet(rows), frechet(a, b));
}
