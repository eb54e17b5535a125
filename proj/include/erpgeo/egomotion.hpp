#pragma once

// Lifting ERP tracks to 3D and estimating camera ego-motion between frames.

#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "erpgeo/pose.hpp"
#include "erpgeo/ransac.hpp"
#include "erpgeo/sphere.hpp"
#include "erpgeo/tracks.hpp"

namespace erpgeo {

/// X = R^T (depth * dir(u) - t). Depth is radial distance along the ray.
inline Vec3 lift_point(ErpCoord u, double depth, const RigidPose& pose) {
  if (!(depth > 0.0)) throw ValidationError("lift_point: depth must be > 0");
  return pose.R.transpose() * (depth * erp_to_dir(u) - pose.t);
}

// ---------------------------------------------------------------------------
// Closed-form alignment

struct Alignment {
  RigidPose pose;
  double scale = 1.0;
};

/// Least-squares alignment dst ~ scale * R * src + t (Umeyama). Rigid unless
/// `with_scale`, which exists for diagnostics. Throws on fewer than 3 pairs or
/// a cross-covariance of rank < 2.
inline Alignment umeyama_align(std::span<const Vec3> src, std::span<const Vec3> dst,
                               bool with_scale = false) {
  if (src.size() != dst.size()) throw ValidationError("umeyama: src/dst size mismatch");
  if (src.size() < 3) throw ValidationError("degenerate correspondence set");
  const double n = static_cast<double>(src.size());
  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Mat3 cov = Mat3::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 ds = src[i] - mu_s;
    cov += (dst[i] - mu_d) * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cov /= n;
  var_s /= n;

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-10 * sv(0) || !(var_s > 0.0))
    throw ValidationError("degenerate correspondence set");

  Vec3 d = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d(2) = -1.0;
  Alignment out;
  out.pose.R = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  if (with_scale) out.scale = sv.dot(d) / var_s;
  out.pose.t = mu_d - out.scale * out.pose.R * mu_s;
  return out;
}

inline RigidPose umeyama(std::span<const Vec3> src, std::span<const Vec3> dst) {
  return umeyama_align(src, dst, false).pose;
}

struct RigidRansacResult {
  RigidPose pose;
  std::vector<std::uint8_t> inliers;
  std::size_t inlier_count = 0;
};

/// Robust rigid fit: minimal 3-point Umeyama hypotheses scored by the number
/// of pairs with ||dst - (R src + t)|| < threshold.
inline RigidRansacResult ransac_rigid(std::span<const Vec3> src, std::span<const Vec3> dst,
                                      const RansacOptions& opt) {
  if (src.size() != dst.size()) throw ValidationError("ransac_rigid: src/dst size mismatch");
  if (src.size() < 3) throw ValidationError("no consensus: fewer than 3 correspondences");
  std::vector<Vec3> s, d;
  auto fit = [&](std::span<const std::size_t> idx) -> std::optional<RigidPose> {
    s.clear();
    d.clear();
    for (std::size_t i : idx) {
      s.push_back(src[i]);
      d.push_back(dst[i]);
    }
    try {
      return umeyama(s, d);
    } catch (const ValidationError&) {
      return std::nullopt;
    }
  };
  auto residual = [&](const RigidPose& p, std::size_t i) { return (dst[i] - p.apply(src[i])).norm(); };
  auto r = ransac<RigidPose>(src.size(), 3, opt, fit, residual);
  return {r.model, std::move(r.inliers), r.inlier_count};
}

// ---------------------------------------------------------------------------
// Trajectory estimation

struct EgoMotionOptions {
  std::size_t iterations = 256;
  /// Absolute inlier threshold in scene units; when unset it is
  /// relative_threshold times the median lifted depth of the frame pair.
  std::optional<double> threshold;
  double relative_threshold = 0.02;
  std::size_t min_inliers = 6;
  std::uint64_t seed = 0;
};

/// Camera-frame point of a track sample read through bilinear depth; nullopt
/// where the interpolated depth is not finite and positive.
template <typename Scalar>
std::optional<Vec3> lift_camera_sample(ErpCoord u, const FrameView<Scalar>& depth) {
  const double d = sample_erp(depth, u);
  if (!std::isfinite(d) || !(d > 0.0)) return std::nullopt;
  return d * erp_to_dir(u);
}

/// Per-frame world-to-camera poses with frame 0 as the world frame, chained
/// from pairwise robust rigid fits of co-visible tracks.
template <typename Scalar>
PoseSequence estimate_trajectory(const TrackSet& tracks, const Volume<Scalar>& depth,
                                 const EgoMotionOptions& opt = {}) {
  tracks.validate();
  require(depth.frames == tracks.num_frames, "estimate_trajectory: depth/track frame count mismatch");
  require(tracks.num_frames >= 1, "estimate_trajectory: no frames");
  PoseSequence poses(tracks.num_frames);

  std::vector<Vec3> src, dst;
  std::vector<double> depths;
  for (std::size_t t = 1; t < tracks.num_frames; ++t) {
    src.clear();
    dst.clear();
    depths.clear();
    const auto prev = depth.frame(t - 1);
    const auto cur = depth.frame(t);
    for (const Track& tr : tracks.tracks) {
      if (!tr.visible(t - 1) || !tr.visible(t)) continue;
      const auto a = lift_camera_sample(tr.uv[t - 1], prev);
      const auto b = lift_camera_sample(tr.uv[t], cur);
      if (!a || !b) continue;
      src.push_back(*a);
      dst.push_back(*b);
      depths.push_back(a->norm());
      depths.push_back(b->norm());
    }
    const std::string where = " (frames " + std::to_string(t - 1) + " -> " + std::to_string(t) + ")";
    if (src.size() < std::max<std::size_t>(opt.min_inliers, 3))
      throw ValidationError("no consensus: too few co-visible tracks" + where);

    RansacOptions ro;
    ro.iterations = opt.iterations;
    ro.min_inliers = opt.min_inliers;
    ro.seed = opt.seed + t;
    if (opt.threshold) {
      ro.threshold = *opt.threshold;
    } else {
      auto mid = depths.begin() + static_cast<std::ptrdiff_t>(depths.size() / 2);
      std::nth_element(depths.begin(), mid, depths.end());
      ro.threshold = opt.relative_threshold * *mid;
    }
    try {
      const RigidPose rel = ransac_rigid(src, dst, ro).pose;
      poses[t] = rel * poses[t - 1];
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + where);
    }
  }
  return poses;
}

/// Fills xyz_world of every visible sample by lifting through depth and
/// pose; invisible samples (and samples without valid depth) stay absent.
template <typename Scalar>
TrackSet compensate(const TrackSet& tracks, const Volume<Scalar>& depth, const PoseSequence& poses) {
  tracks.validate();
  require(poses.size() >= tracks.num_frames, "compensate: poses do not cover all frames");
  require(depth.frames == tracks.num_frames, "compensate: depth/track frame count mismatch");
  TrackSet out = tracks;
  for (Track& tr : out.tracks) {
    tr.xyz_world.assign(tracks.num_frames, std::nullopt);
    for (std::size_t t = 0; t < tracks.num_frames; ++t) {
      if (!tr.visible(t)) continue;
      const double d = sample_erp(depth.frame(t), tr.uv[t]);
      if (std::isfinite(d) && d > 0.0) tr.xyz_world[t] = lift_point(tr.uv[t], d, poses[t]);
    }
  }
  return out;
}

}  // namespace erpgeo
