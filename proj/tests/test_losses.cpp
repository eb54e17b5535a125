#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "erpgeo/gradcheck.hpp"
#include "erpgeo/losses.hpp"
#include "erpgeo/oracle.hpp"

using namespace erpgeo;

namespace {

// Independent depth-loss oracle: straight loops, no trimming (callers keep N < 50
// or disable trimming), plain summation.
double depth_loss_oracle(const DepthVideo& pred, const DepthVideo& gt, const std::vector<double>& w, double c) {
  auto in_m = [&](std::size_t t, std::size_t h, std::size_t x) {
    const double g = gt(t, h, x);
    return g > 0.01 && g < 0.95;
  };
  double sa = 0.0, sh = 0.0, sw = 0.0;
  std::size_t na = 0, nh = 0, nw = 0;
  for (std::size_t t = 0; t < gt.frames; ++t)
    for (std::size_t h = 0; h < gt.rows; ++h)
      for (std::size_t x = 0; x < gt.cols; ++x) {
        if (!in_m(t, h, x)) continue;
        sa += w[h] * std::abs(pred(t, h, x) - gt(t, h, x));
        ++na;
        if (h + 1 < gt.rows && in_m(t, h + 1, x)) {
          sh += std::abs((pred(t, h + 1, x) - pred(t, h, x)) - (gt(t, h + 1, x) - gt(t, h, x)));
          ++nh;
        }
        const std::size_t xr = (x + 1) % gt.cols;
        if (gt.cols > 1 && in_m(t, h, xr)) {
          sw += std::abs((pred(t, h, xr) - pred(t, h, x)) - (gt(t, h, xr) - gt(t, h, x)));
          ++nw;
        }
      }
  return c * (sa / static_cast<double>(na) + 0.5 * ((nh ? sh / static_cast<double>(nh) : 0.0) +
                                                     (nw ? sw / static_cast<double>(nw) : 0.0)));
}

DepthVideo random_depth(std::size_t t, std::size_t h, std::size_t w, std::uint64_t seed) {
  DepthVideo d(t, h, w);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& x : d.values) x = u(rng);
  return d;
}

PoseSequence yaw_compensated(const PoseSequence& poses, double theta) {
  PoseSequence out = poses;
  const Mat3 r = yaw_rotation(-theta);
  for (RigidPose& p : out) {
    p.R = r * p.R;
    p.t = r * p.t;
  }
  return out;
}

}  // namespace

TEST(Confidence, ScheduleValues) {
  EXPECT_EQ(confidence({0.0, 3.0}), 1.0);
  EXPECT_EQ(confidence({3.0, 3.0}), 0.0);
  EXPECT_EQ(confidence({1.5, 3.0}), 0.25);
  EXPECT_EQ(confidence({7.0, 3.0}), 0.0);
  EXPECT_THROW(confidence({-1.0, 3.0}), ValidationError);
  EXPECT_THROW(confidence({1.0, 0.0}), ValidationError);
}

TEST(Confidence, MonotoneAndContinuousAtCutoff) {
  double prev = 1.0;
  for (int i = 0; i <= 4000; ++i) {
    const double c = confidence({i * 1e-3, 3.0});
    EXPECT_LE(c, prev);
    prev = c;
  }
  EXPECT_LT(confidence({3.0 - 1e-9, 3.0}), 1e-18);
}

TEST(CleanEstimate, RecoversCleanLatent) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<double> z0(64), eps(64);
  for (auto& x : z0) x = n(rng);
  for (auto& x : eps) x = n(rng);
  for (double sigma : {0.0, 0.3, 0.9}) {
    const LatentTriple tr = LatentTriple::forward(z0, eps, sigma);
    std::vector<double> v(64);
    for (std::size_t i = 0; i < 64; ++i) v[i] = eps[i] - z0[i];
    const auto est = clean_estimate(tr.z_sigma, sigma, v);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(est[i], z0[i], 1e-14);
    const auto same = clean_estimate(tr.z_sigma, sigma, std::vector<double>(64, 0.0));
    EXPECT_EQ(same, tr.z_sigma);
  }
  EXPECT_EQ(clean_estimate(std::vector<double>{1, 2}, 0.0, std::vector<double>{5, 6}), (std::vector<double>{1, 2}));
  EXPECT_THROW(clean_estimate(std::vector<double>{1}, 0.1, std::vector<double>{1, 2}), ValidationError);
}

TEST(VelocityLoss, MatchesMeanSquareOracle) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  std::vector<double> z0(257), eps(257), v(257);
  for (auto& x : z0) x = n(rng);
  for (auto& x : eps) x = n(rng);
  for (auto& x : v) x = n(rng);
  const LatentTriple tr = LatentTriple::forward(z0, eps, 0.4);
  double oracle = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) oracle += std::pow(v[i] - eps[i] + z0[i], 2);
  oracle /= static_cast<double>(v.size());
  EXPECT_NEAR(velocity_loss(v, tr), oracle, 1e-12);

  std::vector<double> exact(257), off(257);
  for (std::size_t i = 0; i < 257; ++i) {
    exact[i] = eps[i] - z0[i];
    off[i] = exact[i] + 1.0;
  }
  EXPECT_EQ(velocity_loss(exact, tr), 0.0);
  EXPECT_NEAR(velocity_loss(off, tr), 1.0, 1e-12);
  EXPECT_THROW(velocity_loss(std::vector<double>(3), tr), ValidationError);
}

TEST(SampleSigma, LognormalCoverage) {
  std::mt19937_64 rng(2024);
  std::vector<double> s(1000000);
  for (double& x : s) x = sample_sigma(rng);
  std::size_t below = 0;
  for (double x : s) below += x < 3.0;
  const double phi_ln3 = 0.5 * std::erfc(-std::log(3.0) / std::sqrt(2.0));
  EXPECT_NEAR(phi_ln3, 0.864, 0.001);
  EXPECT_NEAR(static_cast<double>(below) / 1e6, phi_ln3, 0.002);
  std::nth_element(s.begin(), s.begin() + 500000, s.end());
  EXPECT_NEAR(s[500000], 1.0, 0.01);

  std::mt19937_64 a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_sigma(a), sample_sigma(b));
}

TEST(DepthLoss, HandComputedColumn) {
  DepthVideo gt(1, 3, 1), pred(1, 3, 1);
  gt.values = {0.2, 0.5, 0.8};
  pred.values = {0.2, 0.6, 0.8};
  const auto w = area_weights(3);
  const auto r = depth_loss(pred, gt, {0.0, 3.0}, w);
  EXPECT_NEAR(r.value, 0.1 / 3.0 + 0.05, 1e-12);
  EXPECT_NEAR(r.value, 0.083333333333, 1e-11);
}

TEST(DepthLoss, ZeroAtIdentity) {
  const DepthVideo gt = random_depth(2, 8, 16, 1);
  const auto r = depth_loss(gt, gt, {0.5, 3.0}, area_weights(8));
  EXPECT_EQ(r.value, 0.0);
  for (double g : r.gradient) EXPECT_EQ(g, 0.0);
}

TEST(DepthLoss, NoSupervisablePixels) {
  const DepthVideo gt(1, 4, 4, 0.99), pred(1, 4, 4, 0.5);
  try {
    depth_loss(pred, gt, {0.0, 3.0}, area_weights(4));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "no supervisable pixels");
  }
  EXPECT_THROW(depth_loss(DepthVideo(1, 4, 5), gt, {0.0, 3.0}, area_weights(4)), ValidationError);
}

TEST(DepthLoss, MatchesLoopOracleWithoutTrimming) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DepthVideo gt = random_depth(2, 5, 4, seed), pred = random_depth(2, 5, 4, seed + 100);
    const auto w = area_weights(5);
    const double got = depth_loss(pred, gt, {0.7, 3.0}, w).value;
    EXPECT_NEAR(got, depth_loss_oracle(pred, gt, w, confidence({0.7, 3.0})), 1e-13);
  }
}

TEST(DepthLoss, TrimmingDropsLargestResiduals) {
  // 50 valid pixels in the middle row, two of them with large residuals.
  DepthVideo gt(1, 3, 50, 0.5), pred(1, 3, 50, 0.5);
  for (std::size_t w = 0; w < 50; ++w) gt(0, 0, w) = gt(0, 2, w) = 0.0;  // pole rows masked out
  pred(0, 1, 10) = 0.9;
  pred(0, 1, 30) = 0.9;
  const auto w3 = area_weights(3);
  DepthLossConfig none;
  none.trim_frac = 0.0;
  const double trimmed = depth_loss(pred, gt, {0.0, 3.0}, w3).value;
  const double full = depth_loss(pred, gt, {0.0, 3.0}, w3, none).value;
  EXPECT_EQ(detail::trim_count(50, 0.02, 50), 1u);
  EXPECT_EQ(detail::trim_count(100, 0.02, 50), 2u);
  EXPECT_EQ(detail::trim_count(49, 0.02, 50), 0u);
  EXPECT_EQ(detail::trim_count(51, 0.02, 50), 2u);
  // Absolute term: |M| = 50, drop 1 of the two 0.4 residuals.
  const double abs_trim = 0.4 / 49.0, abs_full = 0.8 / 50.0;
  const double edges = 0.5 * (4 * 0.4 / 50.0);
  EXPECT_NEAR(trimmed, abs_trim + edges, 1e-12);
  EXPECT_NEAR(full, abs_full + edges, 1e-12);
  EXPECT_LE(trimmed, full);
}

TEST(DepthLoss, TrimmingIsMonotone) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const DepthVideo gt = random_depth(2, 9, 12, seed), pred = random_depth(2, 9, 12, seed + 500);
    DepthLossConfig none;
    none.trim_frac = 0.0;
    const auto w = area_weights(9);
    EXPECT_LE(depth_loss(pred, gt, {0.2, 3.0}, w).value, depth_loss(pred, gt, {0.2, 3.0}, w, none).value);
  }
}

TEST(DepthLoss, LinearInConfidence) {
  const DepthVideo gt = random_depth(2, 9, 12, 3), pred = random_depth(2, 9, 12, 4);
  const auto w = area_weights(9);
  const double a = depth_loss(pred, gt, {0.3, 3.0}, w).value;
  const double b = depth_loss(pred, gt, {1.9, 3.0}, w).value;
  EXPECT_NEAR(a / b, confidence({0.3, 3.0}) / confidence({1.9, 3.0}), 1e-12);
  EXPECT_EQ(depth_loss(pred, gt, {1.5, 3.0}, w).value * 4.0, depth_loss(pred, gt, {0.0, 3.0}, w).value);
}

TEST(DepthLoss, CircularShiftInvariant) {
  const DepthVideo gt = random_depth(3, 10, 20, 5), pred = random_depth(3, 10, 20, 6);
  const auto w = area_weights(10);
  const double base = depth_loss(pred, gt, {0.4, 3.0}, w).value;
  for (std::size_t k : {1u, 7u, 19u})
    EXPECT_EQ(depth_loss(circular_shift(pred, k), circular_shift(gt, k), {0.4, 3.0}, w).value, base);
}

TEST(DepthLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LossFixture fx = make_loss_fixture(seed);
    GradCheckOptions opt;
    opt.max_coords = 300;
    opt.seed = seed;
    const auto res = verify_depth_loss_gradient(fx.pred, fx.gt, {0.5, 3.0}, fx.row_weights, {}, opt);
    EXPECT_GT(res.checked, 100u);
    EXPECT_LT(res.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(DepthLoss, KinkMarginFlagsZeroResiduals) {
  DepthVideo gt(1, 3, 1), pred(1, 3, 1);
  gt.values = {0.2, 0.5, 0.8};
  pred.values = {0.2, 0.6, 0.8};
  const auto m = depth_loss_kink_margin(pred, gt, area_weights(3));
  EXPECT_EQ(m[0], 0.0);
  EXPECT_EQ(m[2], 0.0);
  EXPECT_NEAR(m[1], 0.1, 1e-12);
}

TEST(AugmentState, ClosedForms) {
  const std::vector<Vec3> still(5, Vec3(1, 2, 3));
  for (const State9& s : augment_state(still, 0.5, 0.25)) {
    EXPECT_EQ(s.segment<3>(0), Vec3(1, 2, 3));
    EXPECT_EQ(s.segment<6>(3), (Eigen::Matrix<double, 6, 1>::Zero()));
  }
  std::vector<Vec3> line, para;
  for (int t = 0; t < 6; ++t) {
    line.emplace_back(t, 0, 0);
    para.emplace_back(0, 0, 0.5 * t * t);
  }
  const auto xl = augment_state(line, 0.5, 0.25);
  for (int t = 0; t < 5; ++t) {
    EXPECT_EQ(xl[t].segment<3>(3), Vec3(0.5, 0, 0));
    if (t < 4) {
      EXPECT_EQ(xl[t].segment<3>(6), Vec3::Zero());
    }
  }
  EXPECT_EQ(xl[5].segment<3>(3), Vec3::Zero());
  const auto xp = augment_state(para, 0.5, 0.25);
  for (int t = 0; t < 4; ++t) EXPECT_EQ(xp[t].segment<3>(6), Vec3(0, 0, 0.25));
  EXPECT_EQ(xp[4].segment<3>(6), Vec3::Zero());
  EXPECT_EQ(xp[5].segment<3>(6), Vec3::Zero());
  EXPECT_THROW(augment_state({}, 0.5, 0.25), ValidationError);
}

TEST(AugmentState, PresenceGatesDifferences) {
  std::vector<Vec3> x;
  for (int t = 0; t < 4; ++t) x.emplace_back(t, t, t);
  const std::vector<std::uint8_t> present = {1, 0, 1, 1};
  const auto xi = augment_state(x, 0.5, 0.25, present);
  EXPECT_EQ(xi[0].segment<3>(3), Vec3::Zero());
  EXPECT_EQ(xi[1], State9::Zero());
  EXPECT_EQ(xi[2].segment<3>(3), Vec3(0.5, 0.5, 0.5));
}

TEST(TrackLoss, ZeroForMatchingData) {
  const LossFixture fx = make_loss_fixture(3);
  const TrackStates gt = gt_states_from_depth(fx.tracks, fx.gt, fx.poses);
  const auto r = track_loss(fx.tracks, fx.gt, fx.poses, gt, {0.0, 3.0});
  EXPECT_EQ(r.value, 0.0);
}

TEST(TrackLoss, GroundTruthXyzMatchesLiftedDepth) {
  // Exact tracks and exact depth lift to nearly the same points; residual is
  // the bilinear depth read between pixel centres.
  LossFixtureOptions opt;
  opt.rows = 96;
  opt.cols = 192;
  const LossFixture fx = make_loss_fixture(1, opt);
  const TrackStates gt = gt_states_from_xyz(fx.tracks);
  const double l = track_loss(fx.tracks, fx.gt, fx.poses, gt, {0.0, 3.0}).value;
  EXPECT_LT(l, 0.05);
}

TEST(TrackLoss, SingleStaticEquatorTrack) {
  const std::size_t T = 3;
  TrackSet ts;
  ts.num_frames = T;
  Track tr;
  tr.uv.assign(T, ErpCoord{0.5, 0.5});
  tr.vis.assign(T, 1);
  tr.xyz_world.assign(T, Vec3(0, 0, 0.4));
  ts.tracks.push_back(tr);
  const PoseSequence poses(T);
  const TrackStates gt = gt_states_from_xyz(ts);
  const double delta = 0.125;
  const DepthVideo pred(T, 5, 8, 0.4 + delta);
  EXPECT_NEAR(track_loss(ts, pred, poses, gt, {0.0, 3.0}).value, delta, 1e-15);
  EXPECT_NEAR(track_loss(ts, pred, poses, gt, {1.5, 3.0}).value, 0.25 * delta, 1e-15);

  ts.tracks[0].vis.assign(T, 0);
  try {
    track_loss(ts, pred, poses, gt, {0.0, 3.0});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "no visible weighted samples");
  }
}

TEST(TrackLoss, PoleSamplesCarryNoWeight) {
  const std::size_t T = 2;
  TrackSet ts;
  ts.num_frames = T;
  Track tr;
  tr.uv.assign(T, ErpCoord{0.3, 0.0});
  tr.vis.assign(T, 1);
  tr.xyz_world.assign(T, Vec3(0, 1, 0));
  ts.tracks.push_back(tr);
  EXPECT_THROW(track_loss(ts, DepthVideo(T, 4, 8, 0.5), PoseSequence(T), gt_states_from_xyz(ts), {0.0, 3.0}),
               ValidationError);
}

TEST(TrackLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LossFixture fx = make_loss_fixture(seed);
    const TrackStates gt = gt_states_from_xyz(fx.tracks);
    const auto res = verify_track_loss_gradient(fx.tracks, fx.pred, fx.poses, gt, {0.5, 3.0});
    EXPECT_GT(res.checked, 20u);
    EXPECT_LT(res.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(TrackLoss, LatentRateGradient) {
  const LossFixture fx = make_loss_fixture(9, {8, 24, 48, 6, 12, 0.2, true});
  TrackLossConfig cfg;
  cfg.depth_frame_stride = 4;
  DepthVideo latent(2, fx.pred.rows, fx.pred.cols);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto src = fx.pred.frame(4 * t).values;
    std::copy(src.begin(), src.end(), latent.frame_span(t).begin());
  }
  const TrackStates gt = gt_states_from_xyz(fx.tracks, cfg);
  const auto res = verify_track_loss_gradient(fx.tracks, latent, fx.poses, gt, {0.0, 3.0}, cfg);
  EXPECT_GT(res.checked, 10u);
  EXPECT_LT(res.max_rel_error, 1e-4);
}

TEST(TrackLoss, CircularShiftInvariantWithYawCompensation) {
  const LossFixture fx = make_loss_fixture(6);
  const TrackStates gt = gt_states_from_xyz(fx.tracks);
  const double base = track_loss(fx.tracks, fx.pred, fx.poses, gt, {0.2, 3.0}).value;
  for (std::size_t k : {5u, 24u, 47u}) {
    const double theta = kTwoPi * static_cast<double>(k) / static_cast<double>(fx.pred.cols);
    const double shifted = track_loss(circular_shift(fx.tracks, k, fx.pred.cols), circular_shift(fx.pred, k),
                                      yaw_compensated(fx.poses, theta), gt, {0.2, 3.0})
                               .value;
    EXPECT_NEAR(shifted, base, 1e-10 * std::max(1.0, base));
  }
}

TEST(TrackLoss, JitterIncreasesLossForStaticTracks) {
  LossFixtureOptions opt;
  opt.with_sphere = false;
  opt.noise = 0.0;
  LossFixture fx = make_loss_fixture(2, opt);
  // Static camera: every GT track is a fixed world point.
  SceneSpec s = fx.scene;
  s.keyframes = {s.keyframes.front()};
  const Scene scene(s);
  DepthVideo gt = render_depth_video(scene);
  for (double& d : gt.values) d /= fx.depth_scale;
  PoseSequence poses = scene.poses();
  for (RigidPose& p : poses) p.t /= fx.depth_scale;
  TrackSet tracks = exact_tracks(scene, opt.grid_rows, opt.grid_cols);
  const TrackStates gts = gt_states_from_depth(tracks, gt, poses);
  DepthVideo biased = gt;
  for (double& d : biased.values) d *= 1.03;
  const double base = track_loss(tracks, biased, poses, gts, {0.0, 3.0}).value;
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DepthVideo noisy = biased;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.01);
    for (double& d : noisy.values) d += n(rng);
    mean += track_loss(tracks, noisy, poses, gts, {0.0, 3.0}).value / 100.0;
  }
  EXPECT_GT(mean, base);
}

TEST(TotalLoss, WarmupRamp) {
  const LossWeights w;
  EXPECT_NEAR(total_loss(1.0, 0.5, 0.5, w, 1000).l_total, 1.18, 1e-12);
  EXPECT_NEAR(total_loss(1.0, 0.5, 0.5, w, 5000).l_total, 1.18, 1e-12);
  EXPECT_NEAR(total_loss(1.0, 0.5, 0.5, w, 500).l_total, 1.09, 1e-12);
  EXPECT_EQ(total_loss(1.0, 0.5, 0.5, w, 0).l_total, 1.0);
  EXPECT_EQ(total_loss(0.7, 0.0, 0.0, w, 2000).l_total, 0.7);
  LossWeights bad;
  bad.lambda_d = -1.0;
  EXPECT_THROW(total_loss(1.0, 0.5, 0.5, bad, 10), ValidationError);
}
