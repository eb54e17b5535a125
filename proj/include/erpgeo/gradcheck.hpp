#pragma once

// Central finite-difference verification of the analytic loss gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "erpgeo/losses.hpp"

namespace erpgeo {

struct GradCheckOptions {
  double step = 1e-4;
  /// Coordinates closer than kink_guard * step to a kink are not checked.
  double kink_guard = 10.0;
  std::size_t max_coords = 1000;
  std::uint64_t seed = 0;
  /// Relative errors use max(|analytic|, |numeric|, rel_floor * max|analytic|)
  /// as denominator so exactly cancelling gradients do not divide roundoff by 0.
  double rel_floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t candidates = 0;
};

/// Compares `analytic` with central differences of `loss()` while perturbing
/// x in place. `margin[i]` is the distance of coordinate i to the nearest
/// kink (+inf for coordinates the loss does not read; those are skipped).
template <typename LossFn>
GradCheckResult check_gradient(std::vector<double>& x, std::span<const double> analytic,
                               std::span<const double> margin, LossFn&& loss,
                               const GradCheckOptions& opt = {}) {
  require(analytic.size() == x.size() && margin.size() == x.size(), "check_gradient: size mismatch");
  std::vector<std::size_t> coords;
  double scale = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(margin[i]) && margin[i] > opt.kink_guard * opt.step) {
      coords.push_back(i);
      scale = std::max(scale, std::abs(analytic[i]));
    }
  }
  GradCheckResult res;
  res.candidates = coords.size();
  std::mt19937_64 rng(opt.seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  if (coords.size() > opt.max_coords) coords.resize(opt.max_coords);
  std::sort(coords.begin(), coords.end());

  const double floor = opt.rel_floor * scale;
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + opt.step;
    const double up = loss();
    x[i] = saved - opt.step;
    const double down = loss();
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * opt.step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = denom > 0.0 ? std::abs(analytic[i] - numeric) / denom : 0.0;
    res.max_rel_error = std::max(res.max_rel_error, rel);
    ++res.checked;
  }
  return res;
}

inline GradCheckResult verify_depth_loss_gradient(const DepthVideo& pred, const DepthVideo& gt,
                                                  const NoiseLevel& noise, std::span<const double> row_weights,
                                                  const DepthLossConfig& cfg = {},
                                                  const GradCheckOptions& opt = {}) {
  const LossWithGradient ref = depth_loss(pred, gt, noise, row_weights, cfg);
  const std::vector<double> margin = depth_loss_kink_margin(pred, gt, row_weights, cfg);
  DepthVideo work = pred;
  auto f = [&] { return depth_loss(work, gt, noise, row_weights, cfg, false).value; };
  return check_gradient(work.values, ref.gradient, margin, f, opt);
}

inline GradCheckResult verify_track_loss_gradient(const TrackSet& tracks, const DepthVideo& pred,
                                                  const PoseSequence& poses, const TrackStates& gt,
                                                  const NoiseLevel& noise, const TrackLossConfig& cfg = {},
                                                  const GradCheckOptions& opt = {}) {
  const LossWithGradient ref = track_loss(tracks, pred, poses, gt, noise, cfg);
  const std::vector<double> margin = track_loss_kink_margin(tracks, pred, poses, gt, cfg);
  DepthVideo work = pred;
  auto f = [&] { return track_loss(tracks, work, poses, gt, noise, cfg, false).value; };
  return check_gradient(work.values, ref.gradient, margin, f, opt);
}

}  // namespace erpgeo
