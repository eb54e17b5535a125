#pragma once

// Geometry-aware training objectives as pure array operators: noise-adaptive
// confidence, rectified-flow velocity loss, the area-weighted masked L1 depth
// loss with an edge term, the lifted-trajectory loss on augmented states
// [X; alpha*dX; beta*d2X], and the warm-up-ramped total.
//
// Depth and track losses return the L1 subgradient with respect to the
// predicted depth video (0 at exactly-zero residuals).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "erpgeo/egomotion.hpp"
#include "erpgeo/pose.hpp"
#include "erpgeo/sphere.hpp"
#include "erpgeo/tracks.hpp"
#include "erpgeo/volume.hpp"

namespace erpgeo {

struct NoiseLevel {
  double sigma = 0.0;
  double sigma_max = 3.0;

  void validate() const {
    require(sigma >= 0.0, "noise level sigma must be >= 0");
    require(sigma_max > 0.0, "noise level sigma_max must be > 0");
  }
};

/// c(sigma) = 1[sigma < sigma_max] * (1 - sigma/sigma_max)_+^2
inline double confidence(const NoiseLevel& n) {
  n.validate();
  if (!(n.sigma < n.sigma_max)) return 0.0;
  const double r = 1.0 - n.sigma / n.sigma_max;
  return r * r;
}

/// Noise levels sigma = exp(g), g ~ N(0, 1). P(sigma < 3) = Phi(ln 3) ~ 0.864.
template <typename Rng>
double sample_sigma(Rng& rng) {
  return std::lognormal_distribution<double>(0.0, 1.0)(rng);
}

struct LatentTriple {
  std::vector<double> z0;
  std::vector<double> eps;
  std::vector<double> z_sigma;

  /// z_sigma = (1 - sigma) z0 + sigma eps
  static LatentTriple forward(std::vector<double> z0, std::vector<double> eps, double sigma) {
    require(z0.size() == eps.size(), "latent triple: shape mismatch");
    std::vector<double> zs(z0.size());
    for (std::size_t i = 0; i < zs.size(); ++i) zs[i] = (1.0 - sigma) * z0[i] + sigma * eps[i];
    return {std::move(z0), std::move(eps), std::move(zs)};
  }
};

/// One-step clean estimate z0_hat = z_sigma - sigma * v.
inline std::vector<double> clean_estimate(std::span<const double> z_sigma, double sigma,
                                          std::span<const double> v) {
  require(z_sigma.size() == v.size(), "clean_estimate: shape mismatch");
  std::vector<double> out(z_sigma.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = z_sigma[i] - sigma * v[i];
  return out;
}

/// Unweighted mean squared error between v_pred and the target eps - z0.
inline double velocity_loss(std::span<const double> v_pred, const LatentTriple& triple) {
  require(v_pred.size() == triple.z0.size() && v_pred.size() == triple.eps.size(),
          "velocity_loss: shape mismatch");
  require(!v_pred.empty(), "velocity_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < v_pred.size(); ++i) {
    const double d = v_pred[i] - (triple.eps[i] - triple.z0[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(v_pred.size());
}

struct LossWithGradient {
  double value = 0.0;
  std::vector<double> gradient;  // same layout as the predicted depth video
};

namespace detail {

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Sum of nonnegative terms evaluated in ascending order, so the result does
/// not depend on the order the terms were produced in.
inline double ordered_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0, comp = 0.0;
  for (double x : terms) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

/// Number of largest residuals discarded from n samples.
inline std::size_t trim_count(std::size_t n, double trim_frac, std::size_t min_count) {
  if (n < min_count || trim_frac <= 0.0) return 0;
  const double raw = trim_frac * static_cast<double>(n);
  // guard against 0.02 * 100 evaluating to 2.0000000000000004
  const std::size_t drop = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::min(drop, n - 1);
}

/// Marks the `keep` smallest residuals (ties by position). Returns the largest
/// kept and smallest dropped residual (the latter +inf when nothing is dropped).
inline std::pair<double, double> keep_smallest(std::span<const double> residual, std::size_t keep,
                                               std::vector<std::uint8_t>& kept) {
  const std::size_t n = residual.size();
  kept.assign(n, 0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    return residual[a] < residual[b] || (residual[a] == residual[b] && a < b);
  };
  double last_kept = 0.0, first_dropped = std::numeric_limits<double>::infinity();
  if (keep < n) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), less);
    first_dropped = residual[order[keep]];
  }
  for (std::size_t k = 0; k < keep; ++k) {
    kept[order[k]] = 1;
    last_kept = std::max(last_kept, residual[order[k]]);
  }
  return {last_kept, first_dropped};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Depth consistency loss

struct DepthLossConfig {
  double valid_lo = 0.01;
  double valid_hi = 0.95;
  double trim_frac = 0.02;
  std::size_t min_trim_count = 50;
};

namespace detail {

// Everything the depth loss, its gradient and the kink margins derive from.
struct DepthLossState {
  std::vector<std::uint8_t> in_mask;  // M
  std::vector<std::uint8_t> kept;     // M_q, indexed like the video
  std::vector<double> residual;       // pred - gt on M
  std::vector<double> pair_h;         // (p, p+down) edge residual, NaN when not in M_h
  std::vector<double> pair_w;         // (p, p+right) edge residual, NaN when not in M_w
  std::size_t kept_count = 0, count_h = 0, count_w = 0;
  double last_kept = 0.0, first_dropped = 0.0;
  bool trimmed = false;
  double term_abs = 0.0, term_h = 0.0, term_w = 0.0;
};

inline DepthLossState depth_loss_state(const DepthVideo& pred, const DepthVideo& gt,
                                       std::span<const double> row_weights,
                                       const DepthLossConfig& cfg) {
  require(pred.same_shape(gt), "depth_loss: pred/gt shape mismatch");
  require(row_weights.size() == gt.rows, "depth_loss: row weight count must equal H");
  const std::size_t n = gt.size(), rows = gt.rows, cols = gt.cols, plane = gt.frame_size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  DepthLossState s;
  s.in_mask.assign(n, 0);
  s.residual.assign(n, 0.0);
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gt.values[i];
    if (g > cfg.valid_lo && g < cfg.valid_hi) {
      s.in_mask[i] = 1;
      s.residual[i] = pred.values[i] - g;
      valid.push_back(i);
    }
  }
  if (valid.empty()) throw ValidationError("no supervisable pixels");

  std::vector<double> abs_res(valid.size());
  for (std::size_t k = 0; k < valid.size(); ++k) abs_res[k] = std::abs(s.residual[valid[k]]);
  const std::size_t drop = trim_count(valid.size(), cfg.trim_frac, cfg.min_trim_count);
  s.trimmed = drop > 0;
  s.kept_count = valid.size() - drop;
  std::vector<std::uint8_t> kept_local;
  std::tie(s.last_kept, s.first_dropped) = keep_smallest(abs_res, s.kept_count, kept_local);
  s.kept.assign(n, 0);
  std::vector<double> terms;
  terms.reserve(s.kept_count);
  for (std::size_t k = 0; k < valid.size(); ++k) {
    if (!kept_local[k]) continue;
    s.kept[valid[k]] = 1;
    terms.push_back(row_weights[(valid[k] / cols) % rows] * abs_res[k]);
  }
  s.term_abs = ordered_sum(terms) / static_cast<double>(s.kept_count);

  s.pair_h.assign(n, nan);
  s.pair_w.assign(n, nan);
  std::vector<double> th, tw;
  for (std::size_t t = 0; t < gt.frames; ++t) {
    for (std::size_t h = 0; h < rows; ++h) {
      for (std::size_t w = 0; w < cols; ++w) {
        const std::size_t p = t * plane + h * cols + w;
        if (!s.in_mask[p]) continue;
        if (h + 1 < rows) {
          const std::size_t q = p + cols;
          if (s.in_mask[q]) {
            s.pair_h[p] = (pred.values[q] - pred.values[p]) - (gt.values[q] - gt.values[p]);
            th.push_back(std::abs(s.pair_h[p]));
          }
        }
        if (cols > 1) {
          const std::size_t q = t * plane + h * cols + (w + 1) % cols;
          if (s.in_mask[q]) {
            s.pair_w[p] = (pred.values[q] - pred.values[p]) - (gt.values[q] - gt.values[p]);
            tw.push_back(std::abs(s.pair_w[p]));
          }
        }
      }
    }
  }
  s.count_h = th.size();
  s.count_w = tw.size();
  s.term_h = th.empty() ? 0.0 : ordered_sum(th) / static_cast<double>(th.size());
  s.term_w = tw.empty() ? 0.0 : ordered_sum(tw) / static_cast<double>(tw.size());
  return s;
}

}  // namespace detail

/// L = c(sigma) * [ sum_{M_q} w_h |r| / |M_q| + 1/2 sum_a sum_{M_a} |grad_a r| / |M_a| ].
/// Width differences wrap around the seam (for W > 1).
inline LossWithGradient depth_loss(const DepthVideo& pred, const DepthVideo& gt, const NoiseLevel& noise,
                                   std::span<const double> row_weights, const DepthLossConfig& cfg = {},
                                   bool with_gradient = true) {
  const double c = confidence(noise);
  const detail::DepthLossState s = detail::depth_loss_state(pred, gt, row_weights, cfg);
  LossWithGradient out;
  out.value = c * (s.term_abs + 0.5 * (s.term_h + s.term_w));
  if (!with_gradient) return out;

  const std::size_t rows = gt.rows, cols = gt.cols, plane = gt.frame_size();
  const double k_abs = c / static_cast<double>(s.kept_count);
  const double k_h = s.count_h ? 0.5 * c / static_cast<double>(s.count_h) : 0.0;
  const double k_w = s.count_w ? 0.5 * c / static_cast<double>(s.count_w) : 0.0;
  auto pair_sign = [](double r) { return std::isnan(r) ? 0.0 : detail::sign(r); };
  out.gradient.assign(gt.size(), 0.0);
  for (std::size_t t = 0; t < gt.frames; ++t) {
    for (std::size_t h = 0; h < rows; ++h) {
      for (std::size_t w = 0; w < cols; ++w) {
        const std::size_t p = t * plane + h * cols + w;
        if (!s.in_mask[p]) continue;
        const double g_abs = s.kept[p] ? k_abs * row_weights[h] * detail::sign(s.residual[p]) : 0.0;
        const double up = h > 0 ? pair_sign(s.pair_h[p - cols]) : 0.0;
        const double g_h = k_h * (up - pair_sign(s.pair_h[p]));
        double g_w = 0.0;
        if (cols > 1) {
          const double left = pair_sign(s.pair_w[t * plane + h * cols + (w + cols - 1) % cols]);
          g_w = k_w * (left - pair_sign(s.pair_w[p]));
        }
        out.gradient[p] = g_abs + g_h + g_w;
      }
    }
  }
  return out;
}

/// Per-pixel distance to the nearest non-differentiable point of the depth
/// loss when only that pixel moves: zero residuals, zero edge residuals and
/// the trimming boundary. +inf for pixels the loss does not read.
inline std::vector<double> depth_loss_kink_margin(const DepthVideo& pred, const DepthVideo& gt,
                                                  std::span<const double> row_weights,
                                                  const DepthLossConfig& cfg = {}) {
  const detail::DepthLossState s = detail::depth_loss_state(pred, gt, row_weights, cfg);
  const std::size_t rows = gt.rows, cols = gt.cols, plane = gt.frame_size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> margin(gt.size(), inf);
  auto pair_margin = [&](double r) { return std::isnan(r) ? inf : std::abs(r); };
  for (std::size_t t = 0; t < gt.frames; ++t)
    for (std::size_t h = 0; h < rows; ++h)
      for (std::size_t w = 0; w < cols; ++w) {
        const std::size_t p = t * plane + h * cols + w;
        if (!s.in_mask[p]) continue;
        const double a = std::abs(s.residual[p]);
        double m = s.kept[p] ? a : inf;
        if (s.trimmed) m = std::min(m, s.kept[p] ? s.first_dropped - a : a - s.last_kept);
        m = std::min(m, pair_margin(s.pair_h[p]));
        if (h > 0) m = std::min(m, pair_margin(s.pair_h[p - cols]));
        if (cols > 1) {
          m = std::min(m, pair_margin(s.pair_w[p]));
          m = std::min(m, pair_margin(s.pair_w[t * plane + h * cols + (w + cols - 1) % cols]));
        }
        margin[p] = m;
      }
  return margin;
}

// ---------------------------------------------------------------------------
// Augmented track states and the trajectory loss

using State9 = Eigen::Matrix<double, 9, 1>;
/// Indexed [track][frame].
using TrackStates = std::vector<std::vector<State9>>;

/// xi_t = [X_t; alpha*(X_{t+1}-X_t); beta*(X_{t+2}-2X_{t+1}+X_t)] with forward
/// differences zero-padded at the trailing frames. When `present` is given a
/// difference is also zero unless every frame it touches is present, and the
/// position block is zero at absent frames.
inline std::vector<State9> augment_state(std::span<const Vec3> x, double alpha, double beta,
                                         std::span<const std::uint8_t> present = {}) {
  require(!x.empty(), "augment_state: needs at least one frame");
  require(present.empty() || present.size() == x.size(), "augment_state: presence mask length mismatch");
  const std::size_t n = x.size();
  auto has = [&](std::size_t t) { return present.empty() || present[t] != 0; };
  std::vector<State9> xi(n, State9::Zero());
  for (std::size_t t = 0; t < n; ++t) {
    if (!has(t)) continue;
    xi[t].segment<3>(0) = x[t];
    if (t + 1 < n && has(t + 1)) xi[t].segment<3>(3) = alpha * (x[t + 1] - x[t]);
    if (t + 2 < n && has(t + 1) && has(t + 2))
      xi[t].segment<3>(6) = beta * (x[t + 2] - 2.0 * x[t + 1] + x[t]);
  }
  return xi;
}

struct TrackLossConfig {
  double alpha = 0.5;
  double beta = 0.25;
  double trim_frac = 0.02;
  std::size_t min_trim_count = 50;
  /// 1: track frame t reads depth frame t. 4: latent-rate depth, frame t/4.
  std::size_t depth_frame_stride = 1;
};

/// cos(latitude) of a track coordinate, exactly 0 at both poles.
inline double latitude_weight(ErpCoord c) {
  const double v = c.canonical().v;
  return std::sin(kPi * std::min(v, 1.0 - v));
}

inline std::size_t depth_frame_for(std::size_t t, std::size_t stride, std::size_t depth_frames) {
  return std::min(t / std::max<std::size_t>(stride, 1), depth_frames - 1);
}

namespace detail {

struct LiftedSample {
  Vec3 x = Vec3::Zero();
  Vec3 dx_dd = Vec3::Zero();  // dX / d(depth) = R^T dir(u)
  BilinearTaps taps;
  std::size_t depth_frame = 0;
};

inline void check_track_inputs(const TrackSet& tracks, const DepthVideo& depth, const PoseSequence& poses,
                               std::size_t stride) {
  tracks.validate();
  require(poses.size() >= tracks.num_frames, "track lift: poses do not cover all frames");
  require(depth.frames >= 1 && depth.rows >= 2 && depth.cols >= 1, "track lift: empty depth video");
  if (stride <= 1)
    require(depth.frames == tracks.num_frames, "track lift: depth/track frame count mismatch");
}

inline std::vector<std::vector<LiftedSample>> lift_samples(const TrackSet& tracks, const DepthVideo& depth,
                                                           const PoseSequence& poses, std::size_t stride) {
  check_track_inputs(tracks, depth, poses, stride);
  std::vector<std::vector<LiftedSample>> out(tracks.size());
  for (std::size_t p = 0; p < tracks.size(); ++p) {
    const Track& tr = tracks.tracks[p];
    out[p].resize(tracks.num_frames);
    for (std::size_t t = 0; t < tracks.num_frames; ++t) {
      if (!tr.visible(t)) continue;
      LiftedSample& s = out[p][t];
      s.depth_frame = depth_frame_for(t, stride, depth.frames);
      s.taps = erp_taps(tr.uv[t], depth.rows, depth.cols);
      const double d = s.taps.apply(depth.frame(s.depth_frame).values);
      const Mat3 rt = poses[t].R.transpose();
      s.dx_dd = rt * erp_to_dir(tr.uv[t]);
      s.x = rt * (d * erp_to_dir(tr.uv[t]) - poses[t].t);
    }
  }
  return out;
}

}  // namespace detail

/// World-frame positions of every visible track sample lifted through a depth
/// video (zero at invisible samples). Depth is not required to be positive.
inline std::vector<std::vector<Vec3>> lift_tracks(const TrackSet& tracks, const DepthVideo& depth,
                                                  const PoseSequence& poses, std::size_t depth_frame_stride = 1) {
  const auto samples = detail::lift_samples(tracks, depth, poses, depth_frame_stride);
  std::vector<std::vector<Vec3>> x(tracks.size());
  for (std::size_t p = 0; p < tracks.size(); ++p)
    for (const auto& s : samples[p]) x[p].push_back(s.x);
  return x;
}

/// Augmented states of lifted positions; visibility decides presence.
inline TrackStates track_states(const TrackSet& tracks, const std::vector<std::vector<Vec3>>& x,
                                double alpha, double beta) {
  require(x.size() == tracks.size(), "track_states: position/track count mismatch");
  TrackStates out(tracks.size());
  for (std::size_t p = 0; p < tracks.size(); ++p)
    out[p] = augment_state(x[p], alpha, beta, tracks.tracks[p].vis);
  return out;
}

/// Pseudo ground-truth states: tracks lifted through the annotation depth and
/// poses, exactly as the prediction is lifted inside track_loss.
inline TrackStates gt_states_from_depth(const TrackSet& tracks, const DepthVideo& gt_depth,
                                        const PoseSequence& poses, const TrackLossConfig& cfg = {}) {
  return track_states(tracks, lift_tracks(tracks, gt_depth, poses, cfg.depth_frame_stride), cfg.alpha,
                      cfg.beta);
}

/// Ground-truth states from the tracks' own world positions; samples without
/// a position count as absent.
inline TrackStates gt_states_from_xyz(const TrackSet& tracks, const TrackLossConfig& cfg = {}) {
  tracks.validate();
  TrackStates out(tracks.size());
  for (std::size_t p = 0; p < tracks.size(); ++p) {
    const Track& tr = tracks.tracks[p];
    require(tr.has_xyz(), "gt_states_from_xyz: track " + std::to_string(tr.id) + " has no xyz_world");
    std::vector<Vec3> x(tracks.num_frames, Vec3::Zero());
    std::vector<std::uint8_t> present(tracks.num_frames, 0);
    for (std::size_t t = 0; t < tracks.num_frames; ++t) {
      if (tr.visible(t) && tr.xyz_world[t]) {
        x[t] = *tr.xyz_world[t];
        present[t] = 1;
      }
    }
    out[p] = augment_state(x, cfg.alpha, cfg.beta, present);
  }
  return out;
}

namespace detail {

struct TrackLossState {
  std::vector<std::vector<LiftedSample>> lifted;
  struct Sample {
    std::size_t track = 0, frame = 0;
    double weight = 0.0;
    State9 residual = State9::Zero();
    double norm = 0.0;
    bool kept = false;
  };
  std::vector<Sample> samples;
  std::vector<double> norms;
  double weight_sum = 0.0;
  double weighted_sum = 0.0;
  double last_kept = 0.0, first_dropped = 0.0;
  bool trimmed = false;
};

inline TrackLossState track_loss_state(const TrackSet& tracks, const DepthVideo& pred, const PoseSequence& poses,
                                       const TrackStates& gt, const TrackLossConfig& cfg) {
  TrackLossState s;
  s.lifted = lift_samples(tracks, pred, poses, cfg.depth_frame_stride);
  require(gt.size() == tracks.size(), "track_loss: GT state/track count mismatch");
  std::vector<Vec3> x(tracks.num_frames);
  for (std::size_t p = 0; p < tracks.size(); ++p) {
    const Track& tr = tracks.tracks[p];
    require(gt[p].size() == tracks.num_frames, "track_loss: GT states do not cover all frames");
    for (std::size_t t = 0; t < tracks.num_frames; ++t) x[t] = s.lifted[p][t].x;
    const std::vector<State9> xi = augment_state(x, cfg.alpha, cfg.beta, tr.vis);
    for (std::size_t t = 0; t < tracks.num_frames; ++t) {
      if (!tr.visible(t)) continue;
      const double w = latitude_weight(tr.uv[t]);
      if (!(w > 0.0)) continue;
      TrackLossState::Sample smp;
      smp.track = p;
      smp.frame = t;
      smp.weight = w;
      smp.residual = xi[t] - gt[p][t];
      smp.norm = smp.residual.lpNorm<1>();
      s.samples.push_back(smp);
    }
  }
  if (s.samples.empty()) throw ValidationError("no visible weighted samples");

  s.norms.resize(s.samples.size());
  for (std::size_t k = 0; k < s.samples.size(); ++k) s.norms[k] = s.samples[k].norm;
  const std::size_t drop = trim_count(s.samples.size(), cfg.trim_frac, cfg.min_trim_count);
  s.trimmed = drop > 0;
  std::vector<std::uint8_t> kept;
  std::tie(s.last_kept, s.first_dropped) = keep_smallest(s.norms, s.samples.size() - drop, kept);
  std::vector<double> wt, wr;
  for (std::size_t k = 0; k < s.samples.size(); ++k) {
    s.samples[k].kept = kept[k] != 0;
    if (!s.samples[k].kept) continue;
    wt.push_back(s.samples[k].weight);
    wr.push_back(s.samples[k].weight * s.samples[k].norm);
  }
  s.weight_sum = ordered_sum(wt);
  s.weighted_sum = ordered_sum(wr);
  if (!(s.weight_sum > 0.0)) throw ValidationError("no visible weighted samples");
  return s;
}

}  // namespace detail

/// L = c(sigma) * sum w_pt ||xi_pred - xi_gt||_1 / sum w_pt over visible,
/// untrimmed samples with w_pt = v_pt cos(phi_pt). The gradient flows through
/// the bilinear depth read and the spherical lift.
inline LossWithGradient track_loss(const TrackSet& tracks, const DepthVideo& pred, const PoseSequence& poses,
                                   const TrackStates& gt, const NoiseLevel& noise, const TrackLossConfig& cfg = {},
                                   bool with_gradient = true) {
  const double c = confidence(noise);
  const detail::TrackLossState s = detail::track_loss_state(tracks, pred, poses, gt, cfg);
  LossWithGradient out;
  out.value = c * s.weighted_sum / s.weight_sum;
  if (!with_gradient) return out;

  // dL/dX per track and frame
  std::vector<std::vector<Vec3>> gx(tracks.size(), std::vector<Vec3>(tracks.num_frames, Vec3::Zero()));
  for (const auto& smp : s.samples) {
    if (!smp.kept) continue;
    const double k = c * smp.weight / s.weight_sum;
    State9 sg;
    for (int i = 0; i < 9; ++i) sg(i) = detail::sign(smp.residual(i));
    const std::size_t t = smp.frame;
    const auto& vis = tracks.tracks[smp.track].vis;
    auto& g = gx[smp.track];
    const std::size_t n = tracks.num_frames;
    g[t] += k * sg.segment<3>(0);
    if (t + 1 < n && vis[t + 1]) {
      const Vec3 gv = k * cfg.alpha * sg.segment<3>(3);
      g[t + 1] += gv;
      g[t] -= gv;
    }
    if (t + 2 < n && vis[t + 1] && vis[t + 2]) {
      const Vec3 ga = k * cfg.beta * sg.segment<3>(6);
      g[t + 2] += ga;
      g[t + 1] -= 2.0 * ga;
      g[t] += ga;
    }
  }
  out.gradient.assign(pred.size(), 0.0);
  const std::size_t plane = pred.frame_size();
  for (std::size_t p = 0; p < tracks.size(); ++p) {
    for (std::size_t t = 0; t < tracks.num_frames; ++t) {
      if (!tracks.tracks[p].visible(t)) continue;
      const auto& ls = s.lifted[p][t];
      const double gd = gx[p][t].dot(ls.dx_dd);
      if (gd == 0.0) continue;
      for (int k = 0; k < 4; ++k)
        out.gradient[ls.depth_frame * plane + ls.taps.index[k]] += gd * ls.taps.weight[k];
    }
  }
  return out;
}

/// Per-pixel distance to the nearest kink of the trajectory loss (zero
/// residual components of any state the pixel feeds, or the trimming
/// boundary). +inf for pixels no visible sample reads.
inline std::vector<double> track_loss_kink_margin(const TrackSet& tracks, const DepthVideo& pred,
                                                  const PoseSequence& poses, const TrackStates& gt,
                                                  const TrackLossConfig& cfg = {}) {
  const detail::TrackLossState s = detail::track_loss_state(tracks, pred, poses, gt, cfg);
  std::vector<double> margin(pred.size(), std::numeric_limits<double>::infinity());
  const std::size_t plane = pred.frame_size();
  for (const auto& smp : s.samples) {
    // Zero-padded blocks do not depend on the depth and are not kinks.
    const auto& vis = tracks.tracks[smp.track].vis;
    const std::size_t t0 = smp.frame, n = tracks.num_frames;
    int blocks = 1;
    if (t0 + 1 < n && vis[t0 + 1]) blocks = 2;
    if (blocks == 2 && t0 + 2 < n && vis[t0 + 2]) blocks = 3;
    double m = smp.residual.head(3 * blocks).cwiseAbs().minCoeff();
    if (s.trimmed) m = std::min(m, smp.kept ? s.first_dropped - smp.norm : smp.norm - s.last_kept);
    for (std::size_t dt = 0; dt < 3 && smp.frame + dt < tracks.num_frames; ++dt) {
      const std::size_t t = smp.frame + dt;
      if (!tracks.tracks[smp.track].visible(t)) break;
      const auto& ls = s.lifted[smp.track][t];
      for (int k = 0; k < 4; ++k) {
        if (ls.taps.weight[k] == 0.0) continue;
        double& slot = margin[ls.depth_frame * plane + ls.taps.index[k]];
        slot = std::min(slot, m);
      }
    }
  }
  return margin;
}

// ---------------------------------------------------------------------------
// Combined objective

struct LossWeights {
  double lambda_d = 0.3;
  double lambda_tau = 0.06;
  std::size_t warmup_iters = 1000;
};

struct LossReport {
  double l_visual = 0.0;
  double l_depth = 0.0;
  double l_track = 0.0;
  double l_total = 0.0;
  double sigma = 0.0;
  std::size_t iter = 0;
  double ramp = 1.0;
};

/// l_total = l_visual + ramp * (lambda_d l_depth + lambda_tau l_track),
/// ramp = min(1, iter / warmup_iters).
inline LossReport total_loss(double l_visual, double l_depth, double l_track, const LossWeights& cfg,
                             std::size_t iter, double sigma = 0.0) {
  require(cfg.lambda_d >= 0.0 && cfg.lambda_tau >= 0.0, "total_loss: weights must be >= 0");
  LossReport r;
  r.l_visual = l_visual;
  r.l_depth = l_depth;
  r.l_track = l_track;
  r.sigma = sigma;
  r.iter = iter;
  r.ramp = cfg.warmup_iters == 0
               ? 1.0
               : std::min(1.0, static_cast<double>(iter) / static_cast<double>(cfg.warmup_iters));
  r.l_total = l_visual + r.ramp * (cfg.lambda_d * l_depth + cfg.lambda_tau * l_track);
  return r;
}

}  // namespace erpgeo
