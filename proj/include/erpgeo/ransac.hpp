#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "erpgeo/error.hpp"

namespace erpgeo {

struct RansacOptions {
  std::size_t iterations = 256;
  double threshold = 0.02;
  std::size_t min_inliers = 6;
  std::uint64_t seed = 0;
};

template <typename Model>
struct RansacResult {
  Model model;
  std::vector<std::uint8_t> inliers;
  std::size_t inlier_count = 0;
};

/// Hypothesize-and-verify loop shared by the rigid and plane estimators.
///
/// `fit(indices)` returns a model or nullopt for degenerate samples;
/// `residual(model, i)` is the distance of datum i. A datum is an inlier when
/// its residual is strictly below the threshold. The best hypothesis (first
/// to reach the maximal count) is refit on its inliers and the mask is
/// recomputed under the refit model. Throws ValidationError("no consensus")
/// when fewer than min_inliers support the best hypothesis.
template <typename Model, typename Fit, typename Residual>
RansacResult<Model> ransac(std::size_t n, std::size_t sample_size, const RansacOptions& opt,
                           Fit&& fit, Residual&& residual) {
  if (opt.iterations < 1 || !(opt.threshold > 0.0))
    throw ValidationError("ransac: iterations must be >= 1 and threshold > 0");
  if (n < sample_size) throw ValidationError("no consensus: too few data");

  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> sample(sample_size);

  auto score = [&](const Model& m, std::vector<std::uint8_t>& mask) {
    std::size_t count = 0;
    mask.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (residual(m, i) < opt.threshold) {
        mask[i] = 1;
        ++count;
      }
    }
    return count;
  };

  std::optional<Model> best;
  std::vector<std::uint8_t> best_mask, mask;
  std::size_t best_count = 0;
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    for (std::size_t k = 0; k < sample_size; ++k) {
      std::size_t idx;
      do {
        idx = pick(rng);
      } while (std::find(sample.begin(), sample.begin() + k, idx) != sample.begin() + k);
      sample[k] = idx;
    }
    std::optional<Model> hyp = fit(std::span<const std::size_t>(sample));
    if (!hyp) continue;
    const std::size_t count = score(*hyp, mask);
    if (count > best_count) {
      best_count = count;
      best = std::move(hyp);
      best_mask.swap(mask);
    }
  }
  if (!best || best_count < opt.min_inliers) throw ValidationError("no consensus");

  std::vector<std::size_t> support;
  support.reserve(best_count);
  for (std::size_t i = 0; i < n; ++i)
    if (best_mask[i]) support.push_back(i);

  RansacResult<Model> out{*best, best_mask, best_count};
  if (std::optional<Model> refit = fit(std::span<const std::size_t>(support))) {
    const std::size_t count = score(*refit, mask);
    if (count >= opt.min_inliers) out = {*refit, mask, count};
  }
  return out;
}

}  // namespace erpgeo
