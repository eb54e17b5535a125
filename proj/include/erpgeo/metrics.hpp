#pragma once

// Evaluation panel: Fréchet distance on embedding sets, caption alignment and
// the geometric self-consistency scores, plus per-source aggregation.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "erpgeo/egomotion.hpp"
#include "erpgeo/error.hpp"
#include "erpgeo/tracks.hpp"
#include "erpgeo/volume.hpp"

namespace erpgeo {

/// N x D embeddings, one row per sample.
using EmbeddingSet = Eigen::MatrixXd;

inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m, double sym_tol = 1e-8) {
  require(m.rows() == m.cols(), "sqrtm_psd: matrix must be square");
  if (m.size() == 0) return m;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > sym_tol * scale)
    throw ValidationError("sqrtm_psd: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // divide-by-N
};

inline GaussianFit fit_gaussian(const EmbeddingSet& set) {
  require(set.rows() >= 2, "embedding set needs at least 2 rows");
  require(set.allFinite(), "embedding set has non-finite entries");
  GaussianFit g;
  g.mean = set.colwise().mean().transpose();
  const Eigen::MatrixXd centered = set.rowwise() - g.mean.transpose();
  g.cov = centered.transpose() * centered / static_cast<double>(set.rows());
  return g;
}

inline double frechet(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.cols() != b.cols())
    throw ValidationError("frechet: dimension mismatch (" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.cols()) + ")");
  const GaussianFit fa = fit_gaussian(a);
  const GaussianFit fb = fit_gaussian(b);
  const Eigen::MatrixXd sa = sqrtm_psd(fa.cov);
  Eigen::MatrixXd mid = sa * fb.cov * sa;
  mid = 0.5 * (mid + mid.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mid, Eigen::EigenvaluesOnly);
  const double tr_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (fa.mean - fb.mean).squaredNorm() + fa.cov.trace() + fb.cov.trace() - 2.0 * tr_sqrt;
  return std::max(d, 0.0);
}

inline double clip_t(const EmbeddingSet& frames, const Eigen::VectorXd& text) {
  require(frames.rows() >= 1, "clip_t: no frame embeddings");
  if (frames.cols() != text.size()) throw ValidationError("clip_t: dimension mismatch");
  const double tn = text.norm();
  if (!(tn > 0.0)) throw ValidationError("clip_t: zero-norm embedding");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    const double fn = frames.row(i).norm();
    if (!(fn > 0.0)) throw ValidationError("clip_t: zero-norm embedding");
    sum += frames.row(i).dot(text) / (fn * tn);
  }
  return sum / static_cast<double>(frames.rows());
}

namespace detail {
/// Median; even-sized inputs average the two middle values.
inline double median(std::vector<double> v) {
  require(!v.empty(), "median of empty set");
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double hi = *mid;
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}
}  // namespace detail

/// Median second-difference norm over fully visible triples. Needs xyz_world.
inline double smooth3d(const TrackSet& tracks) {
  tracks.validate();
  std::vector<double> acc;
  for (const Track& tr : tracks.tracks) {
    if (!tr.has_xyz()) continue;
    for (std::size_t t = 1; t + 1 < tracks.num_frames; ++t) {
      if (!tr.visible(t - 1) || !tr.visible(t) || !tr.visible(t + 1)) continue;
      const auto& a = tr.xyz_world[t - 1];
      const auto& b = tr.xyz_world[t];
      const auto& c = tr.xyz_world[t + 1];
      if (!a || !b || !c) continue;
      acc.push_back((*a - 2.0 * *b + *c).norm());
    }
  }
  if (acc.empty()) throw ValidationError("smooth3d: insufficient visibility");
  return detail::median(std::move(acc));
}

inline double smooth3d(const TrackSet& tracks, std::size_t t_eval) {
  return smooth3d(resample_temporal(tracks, t_eval));
}

template <typename Scalar>
double depth_sigma(const Volume<Scalar>& depth) {
  require(depth.frames >= 2, "depth_sigma: needs at least 2 frames");
  const std::size_t n = depth.rows * depth.cols;
  const double T = static_cast<double>(depth.frames);
  std::vector<double> ratios;
  std::vector<double> d(depth.frames);
  for (std::size_t p = 0; p < n; ++p) {
    bool ok = true;
    for (std::size_t t = 0; t < depth.frames && ok; ++t) {
      d[t] = static_cast<double>(depth.values[t * n + p]);
      ok = std::isfinite(d[t]) && d[t] > 0.0;
    }
    if (!ok) continue;
    // Deviations are taken relative to the first sample so constant pixels give exactly 0.
    double s = 0.0, mean = 0.0;
    for (double x : d) {
      s += x - d[0];
      mean += x;
    }
    const double m = s / T;
    double var = 0.0;
    for (double x : d) var += ((x - d[0]) - m) * ((x - d[0]) - m);
    ratios.push_back(std::sqrt(var / T) / (mean / T));
  }
  if (ratios.empty()) throw ValidationError("depth_sigma: no pixel has valid depth in every frame");
  return detail::median(std::move(ratios));
}

inline double track_life(const TrackSet& tracks) {
  tracks.validate();
  require(tracks.size() >= 1, "track_life: no tracks");
  require(tracks.num_frames >= 1, "track_life: no frames");
  double sum = 0.0;
  for (const Track& tr : tracks.tracks) {
    std::size_t v = 0;
    for (std::uint8_t x : tr.vis) v += x;
    sum += static_cast<double>(v) / static_cast<double>(tracks.num_frames);
  }
  return sum / static_cast<double>(tracks.size());
}

inline double track_life(const TrackSet& tracks, std::size_t t_eval) {
  return track_life(resample_temporal(tracks, t_eval));
}

// ---------------------------------------------------------------------------
// Per-clip evaluation

enum class Metric : std::size_t { kFvd = 0, kFaed, kFid, kClipT, kSmooth3d, kDepthSigma, kTrLife };
inline constexpr std::size_t kNumMetrics = 7;
inline constexpr std::array<const char*, kNumMetrics> kMetricNames = {
    "fvd", "faed", "fid", "clip_t", "smooth3d", "depth_sigma", "tr_life"};
inline constexpr std::array<const char*, kNumMetrics> kMetricHeaders = {
    "FVD", "FAED", "FID", "CLIP-T", "3D-Smooth", "Depth-sigma", "Tr-Life"};
inline constexpr std::array<Metric, 3> kFrechetMetrics = {Metric::kFvd, Metric::kFaed, Metric::kFid};

/// How per-frame FID features form samples: every frame is a sample, or each
/// clip contributes the mean of its frames.
enum class FidMode { kPerFrame, kClipMean };

struct EvalOptions {
  std::size_t t_eval = 80;
  FidMode fid_mode = FidMode::kPerFrame;
};

/// In-memory inputs of one side of a clip. Embedding keys: "fvd", "faed",
/// "fid" (per-frame) and "clip" (per-frame image embeddings).
struct ClipData {
  std::size_t num_frames = 0;
  std::optional<DepthVideoF> depth;
  std::optional<TrackSet> tracks;
  std::optional<PoseSequence> poses;
  std::map<std::string, EmbeddingSet> embeddings;
};

struct MetricRow {
  std::string clip_id;
  std::string source;
  std::array<std::optional<double>, kNumMetrics> values{};
  /// Reason per metric left empty ("not computed: ...").
  std::map<std::string, std::string> notes;

  std::optional<double>& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
  const std::optional<double>& operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
};

inline const char* metric_name(Metric m) { return kMetricNames[static_cast<std::size_t>(m)]; }

namespace detail {
inline EmbeddingSet resample_rows(const EmbeddingSet& e, std::size_t t_eval) {
  const auto idx = resample_indices(static_cast<std::size_t>(e.rows()), t_eval);
  EmbeddingSet out(static_cast<Eigen::Index>(idx.size()), e.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = e.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline bool frame_level(const std::string& key) { return key == "fid" || key == "clip"; }
}  // namespace detail

/// Embedding rows that one clip side contributes to a Fréchet fit. Per-frame
/// sets with one row per source frame are put on the evaluation grid first.
inline std::optional<EmbeddingSet> frechet_rows(const ClipData& clip, Metric m, const EvalOptions& opt) {
  const std::string key = metric_name(m);
  auto it = clip.embeddings.find(key);
  if (it == clip.embeddings.end() || it->second.rows() == 0) return std::nullopt;
  EmbeddingSet rows = it->second;
  if (detail::frame_level(key) && clip.num_frames > 0 && static_cast<std::size_t>(rows.rows()) == clip.num_frames)
    rows = detail::resample_rows(rows, opt.t_eval);
  if (m == Metric::kFid && opt.fid_mode == FidMode::kClipMean) rows = rows.colwise().mean().eval();
  return rows;
}

/// Lifted positions for 3D-Smooth: positions carried by the track file when
/// present, else tracks lifted through the depth (and poses, if given).
template <typename Scalar>
TrackSet positioned_tracks(const TrackSet& tracks, const Volume<Scalar>& depth,
                           const std::optional<PoseSequence>& poses) {
  bool has = false;
  for (const Track& tr : tracks.tracks) has = has || tr.has_xyz();
  if (has) return tracks;
  const PoseSequence p = poses ? *poses : PoseSequence(tracks.num_frames);
  return compensate(tracks, depth, p);
}

inline MetricRow evaluate_clip(const std::string& clip_id, const std::string& source, const ClipData& pred,
                               const ClipData& gt, const EvalOptions& opt = {},
                               const std::optional<Eigen::VectorXd>& caption = std::nullopt) {
  std::vector<std::string> missing;
  if (pred.num_frames == 0) missing.push_back("pred frames");
  if (gt.num_frames == 0) missing.push_back("gt frames");
  if (!pred.depth) missing.push_back("pred depth");
  if (!pred.tracks) missing.push_back("pred tracks");
  if (!missing.empty()) {
    std::string msg = "clip " + clip_id + ": missing inputs:";
    for (const auto& m : missing) msg += " " + m + ";";
    msg.pop_back();
    throw ValidationError(msg);
  }
  require(pred.depth->frames == pred.tracks->num_frames,
          "clip " + clip_id + ": pred depth and tracks disagree on frame count");

  MetricRow row;
  row.clip_id = clip_id;
  row.source = source;

  for (Metric m : kFrechetMetrics) {
    const auto a = frechet_rows(pred, m, opt);
    const auto b = frechet_rows(gt, m, opt);
    if (!a || !b) {
      row.notes[metric_name(m)] = "not computed: embeddings absent";
    } else if (a->rows() < 2 || b->rows() < 2) {
      row.notes[metric_name(m)] = "not computed: fewer than 2 rows per side (pooled only)";
    } else {
      row[m] = frechet(*a, *b);
    }
  }

  auto clip_it = pred.embeddings.find("clip");
  if (clip_it == pred.embeddings.end() || !caption) {
    row.notes["clip_t"] = "not computed: embeddings absent";
  } else {
    EmbeddingSet frames = clip_it->second;
    if (static_cast<std::size_t>(frames.rows()) == pred.num_frames) frames = detail::resample_rows(frames, opt.t_eval);
    row[Metric::kClipT] = clip_t(frames, *caption);
  }

  const TrackSet tracks = resample_temporal(*pred.tracks, opt.t_eval);
  const DepthVideoF depth = resample_temporal(*pred.depth, opt.t_eval);
  std::optional<PoseSequence> poses;
  if (pred.poses) {
    require(pred.poses->size() == pred.tracks->num_frames, "clip " + clip_id + ": pose count mismatch");
    poses = resample_temporal(*pred.poses, opt.t_eval);
  }
  try {
    row[Metric::kSmooth3d] = smooth3d(positioned_tracks(tracks, depth, poses));
  } catch (const ValidationError& e) {
    row.notes["smooth3d"] = std::string("not computed: ") + e.what();
  }
  try {
    row[Metric::kDepthSigma] = depth_sigma(depth);
  } catch (const ValidationError& e) {
    row.notes["depth_sigma"] = std::string("not computed: ") + e.what();
  }
  if (tracks.size() > 0) {
    row[Metric::kTrLife] = track_life(tracks);
  } else {
    row.notes["tr_life"] = "not computed: no tracks";
  }
  return row;
}

// ---------------------------------------------------------------------------
// Aggregation

inline constexpr const char* kAllSources = "all";

struct SourceAggregate {
  std::string source;
  std::size_t clips = 0;
  /// Mean of the per-clip values that were computed.
  std::array<std::optional<double>, kNumMetrics> mean{};
  std::array<std::size_t, kNumMetrics> count{};
  /// Fréchet on embeddings pooled over the bucket (fvd, faed, fid).
  std::array<std::optional<double>, 3> pooled{};
};

/// Per-source means in source order followed by the "all" bucket.
inline std::vector<SourceAggregate> aggregate(const std::vector<MetricRow>& rows) {
  std::map<std::string, std::vector<const MetricRow*>> by_source;
  for (const MetricRow& r : rows) by_source[r.source].push_back(&r);
  std::vector<std::pair<std::string, std::vector<const MetricRow*>>> buckets(by_source.begin(), by_source.end());
  std::vector<const MetricRow*> all;
  for (const MetricRow& r : rows) all.push_back(&r);
  buckets.emplace_back(kAllSources, std::move(all));

  std::vector<SourceAggregate> out;
  for (auto& [source, members] : buckets) {
    std::sort(members.begin(), members.end(),
              [](const MetricRow* a, const MetricRow* b) { return a->clip_id < b->clip_id; });
    SourceAggregate agg;
    agg.source = source;
    agg.clips = members.size();
    for (std::size_t k = 0; k < kNumMetrics; ++k) {
      double sum = 0.0;
      for (const MetricRow* r : members)
        if (r->values[k]) {
          sum += *r->values[k];
          ++agg.count[k];
        }
      if (agg.count[k] > 0) agg.mean[k] = sum / static_cast<double>(agg.count[k]);
    }
    out.push_back(std::move(agg));
  }
  return out;
}

/// Pooled embedding rows of one bucket for one Fréchet metric.
struct PooledRows {
  std::vector<EmbeddingSet> pred;
  std::vector<EmbeddingSet> gt;
};

inline std::optional<double> pooled_frechet(const PooledRows& rows) {
  auto stack = [](const std::vector<EmbeddingSet>& parts) {
    Eigen::Index n = 0, d = parts.empty() ? 0 : parts.front().cols();
    for (const auto& p : parts) {
      require(p.cols() == d, "pooled embeddings disagree on dimension");
      n += p.rows();
    }
    EmbeddingSet out(n, d);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      out.middleRows(r, p.rows()) = p;
      r += p.rows();
    }
    return out;
  };
  const EmbeddingSet a = stack(rows.pred), b = stack(rows.gt);
  if (a.rows() < 2 || b.rows() < 2) return std::nullopt;
  return frechet(a, b);
}

inline std::string format_table(const std::vector<SourceAggregate>& aggs) {
  std::string out;
  char buf[64];
  auto cell = [&](const std::optional<double>& v, int prec) {
    if (!v) return std::string("-");
    std::snprintf(buf, sizeof buf, "%.*f", prec, *v);
    return std::string(buf);
  };
  std::snprintf(buf, sizeof buf, "%-18s %6s", "Source", "Clips");
  out += buf;
  for (const char* h : kMetricHeaders) {
    std::snprintf(buf, sizeof buf, " %12s", h);
    out += buf;
  }
  out += "\n";
  for (const SourceAggregate& a : aggs) {
    std::snprintf(buf, sizeof buf, "%-18s %6zu", a.source.c_str(), a.clips);
    out += buf;
    for (std::size_t k = 0; k < kNumMetrics; ++k) {
      // Distributional columns prefer the bucket-level fit.
      std::optional<double> v = k < 3 && a.pooled[k] ? a.pooled[k] : a.mean[k];
      std::snprintf(buf, sizeof buf, " %12s", cell(v, k < 3 ? 2 : 3).c_str());
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace erpgeo
