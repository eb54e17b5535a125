#pragma once

// Equirectangular (ERP) conventions and projections.
//
// Axes: +z forward (u = 0.5, v = 0.5), +y up (v = 0), +x right (u = 0.75).
// Longitude lambda = 2*pi*(u - 0.5), latitude phi = pi*(0.5 - v).
// Pixel (h, w) of an H x W panorama sits at u = w / W, v = h / (H - 1), so the
// first and last rows are the poles and column W wraps onto column 0.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "erpgeo/volume.hpp"

namespace erpgeo {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double wrap_unit(double u) {
  double w = u - std::floor(u);
  return w >= 1.0 ? 0.0 : w;
}

struct ErpCoord {
  double u = 0.5;
  double v = 0.5;

  /// u wrapped into [0,1), v clamped into [0,1].
  ErpCoord canonical() const { return {wrap_unit(u), std::clamp(v, 0.0, 1.0)}; }
  double longitude() const { return kTwoPi * (canonical().u - 0.5); }
  double latitude() const { return kPi * (0.5 - canonical().v); }
};

inline Vec3 erp_to_dir(ErpCoord c) {
  const double lon = c.longitude();
  const double lat = c.latitude();
  const double cl = std::cos(lat);
  return {cl * std::sin(lon), std::sin(lat), cl * std::cos(lon)};
}

/// Inverse of erp_to_dir. Poles map to u = 0.5.
inline ErpCoord dir_to_erp(const Vec3& d) {
  const double n = d.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("degenerate direction");
  const Vec3 k = d / n;
  const double horizontal = std::hypot(k.x(), k.z());
  const double lat = std::atan2(k.y(), horizontal);
  double u = 0.5;
  if (horizontal > 0.0) u = wrap_unit(std::atan2(k.x(), k.z()) / kTwoPi + 0.5);
  return {u, std::clamp(0.5 - lat / kPi, 0.0, 1.0)};
}

/// Normalized coordinate of ERP pixel (h, w).
inline ErpCoord pixel_to_erp(std::size_t h, std::size_t w, std::size_t rows, std::size_t cols) {
  return {static_cast<double>(w) / static_cast<double>(cols),
          rows > 1 ? static_cast<double>(h) / static_cast<double>(rows - 1) : 0.5};
}

/// Latitude of row h: pi*h/(H-1) - pi/2 (row 0 is a pole).
inline double row_latitude(std::size_t h, std::size_t rows) {
  return kPi * static_cast<double>(h) / static_cast<double>(rows - 1) - 0.5 * kPi;
}

// ---------------------------------------------------------------------------
// Bilinear sampling with horizontal wrap and vertical clamp

/// Four weighted taps of a bilinear read; indices are into an H*W frame.
struct BilinearTaps {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};

  template <typename Scalar>
  double apply(std::span<const Scalar> frame) const {
    return weight[0] * frame[index[0]] + weight[1] * frame[index[1]] +
           weight[2] * frame[index[2]] + weight[3] * frame[index[3]];
  }
};

inline BilinearTaps erp_taps(ErpCoord c, std::size_t rows, std::size_t cols) {
  c = c.canonical();
  const double x = c.u * static_cast<double>(cols);
  const double y = rows > 1 ? c.v * static_cast<double>(rows - 1) : 0.0;
  const double x0 = std::floor(x);
  const double y0 = std::min(std::floor(y), static_cast<double>(rows - 1));
  const double fx = x - x0;
  const double fy = y - y0;
  const std::size_t c0 = static_cast<std::size_t>(x0) % cols;
  const std::size_t c1 = (c0 + 1) % cols;
  const std::size_t r0 = static_cast<std::size_t>(y0);
  const std::size_t r1 = std::min(r0 + 1, rows - 1);
  BilinearTaps taps;
  taps.index = {r0 * cols + c0, r0 * cols + c1, r1 * cols + c0, r1 * cols + c1};
  taps.weight = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
  return taps;
}

template <typename Scalar>
double sample_erp(const FrameView<Scalar>& frame, ErpCoord c) {
  return erp_taps(c, frame.rows, frame.cols).apply(frame.values);
}

inline void sample_erp(const Image& pano, ErpCoord c, float* out) {
  const BilinearTaps taps = erp_taps(c, pano.rows, pano.cols);
  for (std::size_t ch = 0; ch < pano.channels; ++ch) {
    double acc = 0.0;
    for (int k = 0; k < 4; ++k)
      acc += taps.weight[k] * pano.values[taps.index[k] * pano.channels + ch];
    out[ch] = static_cast<float>(acc);
  }
}

/// Bilinear read of a planar image at continuous pixel coordinates where the
/// center of pixel (r, c) is (c + 0.5, r + 0.5); borders are clamped.
inline void sample_planar(const Image& img, double px, double py, float* out) {
  const double x = std::clamp(px - 0.5, 0.0, static_cast<double>(img.cols - 1));
  const double y = std::clamp(py - 0.5, 0.0, static_cast<double>(img.rows - 1));
  const std::size_t c0 = static_cast<std::size_t>(x);
  const std::size_t r0 = static_cast<std::size_t>(y);
  const std::size_t c1 = std::min(c0 + 1, img.cols - 1);
  const std::size_t r1 = std::min(r0 + 1, img.rows - 1);
  const double fx = x - static_cast<double>(c0);
  const double fy = y - static_cast<double>(r0);
  for (std::size_t ch = 0; ch < img.channels; ++ch) {
    const double top = (1.0 - fx) * img(r0, c0, ch) + fx * img(r0, c1, ch);
    const double bottom = (1.0 - fx) * img(r1, c0, ch) + fx * img(r1, c1, ch);
    out[ch] = static_cast<float>((1.0 - fy) * top + fy * bottom);
  }
}

// ---------------------------------------------------------------------------
// Pinhole cameras

/// Rotation about +y; yaw = pi/2 turns the forward axis onto +x.
inline Mat3 yaw_rotation(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

/// Rotation about +x; positive pitch tilts the forward axis toward +y.
inline Mat3 pitch_rotation(double pitch) {
  const double c = std::cos(pitch), s = std::sin(pitch);
  Mat3 r;
  r << 1, 0, 0, 0, c, s, 0, -s, c;
  return r;
}

/// Pinhole intrinsics derived from a horizontal field of view.
struct PinholeIntrinsics {
  double fov_deg = 90.0;
  std::size_t width = 256;
  std::size_t height = 256;

  void validate() const {
    require(width >= 2 && height >= 2, "camera width and height must be >= 2");
    require(fov_deg > 0.0 && fov_deg < 180.0, "camera fov must lie in (0, 180) degrees");
  }
  double focal() const {
    return 0.5 * static_cast<double>(width) / std::tan(0.5 * fov_deg * kPi / 180.0);
  }
  double vertical_fov_deg() const {
    return 2.0 * std::atan(0.5 * static_cast<double>(height) / focal()) * 180.0 / kPi;
  }
  /// Camera-frame ray (z = 1) through continuous pixel position (px, py).
  Vec3 ray(double px, double py) const {
    const double f = focal();
    return {(px - 0.5 * static_cast<double>(width)) / f,
            -(py - 0.5 * static_cast<double>(height)) / f, 1.0};
  }
  /// Continuous pixel position of a camera-frame point; nullopt behind the camera.
  std::optional<Vec2> project(const Vec3& p) const {
    if (!(p.z() > 0.0)) return std::nullopt;
    const double f = focal();
    return Vec2(0.5 * static_cast<double>(width) + f * p.x() / p.z(),
                0.5 * static_cast<double>(height) - f * p.y() / p.z());
  }
  bool inside(const Vec2& px) const {
    return px.x() >= 0.0 && px.x() <= static_cast<double>(width) && px.y() >= 0.0 &&
           px.y() <= static_cast<double>(height);
  }
};

/// Perspective view from the panorama center. Roll is fixed to zero.
struct PerspectiveCamera {
  double fov_deg = 90.0;
  double yaw_rad = 0.0;
  double pitch_rad = 0.0;
  std::size_t width = 256;
  std::size_t height = 256;

  PinholeIntrinsics intrinsics() const { return {fov_deg, width, height}; }
  void validate() const { intrinsics().validate(); }
  /// Camera-to-panorama rotation R_yaw * R_pitch.
  Mat3 rotation() const { return yaw_rotation(yaw_rad) * pitch_rotation(pitch_rad); }
};

/// Random conditioning view: fov uniform in [30, 120] deg, yaw uniform over the
/// full circle, pitch uniform in [-30, 30] deg.
template <typename Rng>
PerspectiveCamera random_conditioning_camera(Rng& rng, std::size_t width, std::size_t height) {
  std::uniform_real_distribution<double> fov(30.0, 120.0);
  std::uniform_real_distribution<double> yaw(-kPi, kPi);
  std::uniform_real_distribution<double> pitch(-kPi / 6.0, kPi / 6.0);
  PerspectiveCamera cam;
  cam.fov_deg = fov(rng);
  cam.yaw_rad = yaw(rng);
  cam.pitch_rad = pitch(rng);
  cam.width = width;
  cam.height = height;
  return cam;
}

/// Renders a perspective crop of an ERP frame by bilinear lookup.
inline Image sample_perspective(const Image& pano, const PerspectiveCamera& cam) {
  cam.validate();
  require(pano.rows >= 2 && pano.cols >= 1, "panorama must have at least 2 rows");
  const PinholeIntrinsics k = cam.intrinsics();
  const Mat3 rot = cam.rotation();
  Image out(cam.height, cam.width, pano.channels);
  for (std::size_t r = 0; r < cam.height; ++r) {
    for (std::size_t c = 0; c < cam.width; ++c) {
      const Vec3 d = rot * k.ray(static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5);
      sample_erp(pano, dir_to_erp(d), &out.values[(r * cam.width + c) * pano.channels]);
    }
  }
  return out;
}

struct FillPolicy {
  enum class Kind { kConstant, kGaussian };
  Kind kind = Kind::kConstant;
  double value = 0.0;  // constant fill, or mean of the Gaussian fill
  double scale = 1.0;  // Gaussian standard deviation
  std::uint64_t seed = 0;

  static FillPolicy constant(double v) { return {Kind::kConstant, v, 1.0, 0}; }
  static FillPolicy gaussian(double scale, std::uint64_t seed, double mean = 0.0) {
    return {Kind::kGaussian, mean, scale, seed};
  }
};

struct Composite {
  Image erp;
  MaskVideo mask;  // one frame, 1 where the perspective view was pasted
};

/// Pastes a perspective frame onto an ERP canvas of the given size.
inline Composite composite_to_erp(const Image& persp, const PerspectiveCamera& cam,
                                  std::size_t erp_rows, std::size_t erp_cols,
                                  const FillPolicy& fill = {}) {
  cam.validate();
  require(persp.rows == cam.height && persp.cols == cam.width,
          "perspective frame does not match camera size");
  require(erp_rows >= 2 && erp_cols >= 1, "ERP canvas must have at least 2 rows");
  const PinholeIntrinsics k = cam.intrinsics();
  const Mat3 to_cam = cam.rotation().transpose();
  Composite out{Image(erp_rows, erp_cols, persp.channels), MaskVideo(1, erp_rows, erp_cols)};
  std::mt19937_64 rng(fill.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t h = 0; h < erp_rows; ++h) {
    for (std::size_t w = 0; w < erp_cols; ++w) {
      float* px = &out.erp.values[(h * erp_cols + w) * persp.channels];
      const Vec3 d = to_cam * erp_to_dir(pixel_to_erp(h, w, erp_rows, erp_cols));
      const auto p = k.project(d);
      if (p && k.inside(*p)) {
        sample_planar(persp, p->x(), p->y(), px);
        out.mask(0, h, w) = 1;
        continue;
      }
      for (std::size_t ch = 0; ch < persp.channels; ++ch) {
        px[ch] = fill.kind == FillPolicy::Kind::kConstant
                     ? static_cast<float>(fill.value)
                     : static_cast<float>(fill.value + fill.scale * noise(rng));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Latitude-aware positions, area weights, wrap-around augmentation

struct LatitudePositions {
  std::vector<double> rows;  // pos_h
  std::vector<double> cols;  // pos_w
};

/// pos_h[h] = (H-1)/2 * (sin(pi*h/(H-1) - pi/2) + 1), pos_w[w] = w.
inline LatitudePositions latitude_positions(std::size_t rows, std::size_t cols) {
  require(rows >= 2, "latitude_positions needs H >= 2");
  require(cols >= 1, "latitude_positions needs W >= 1");
  LatitudePositions pos;
  pos.rows.resize(rows);
  pos.cols.resize(cols);
  const double half = 0.5 * static_cast<double>(rows - 1);
  for (std::size_t h = 0; h < rows; ++h)
    pos.rows[h] = half * (std::sin(row_latitude(h, rows)) + 1.0);
  for (std::size_t w = 0; w < cols; ++w) pos.cols[w] = static_cast<double>(w);
  return pos;
}

/// Per-row weights cos(phi(h)). Evaluated as sin(pi*k/(H-1)) with k the
/// distance to the nearest pole row so that w_h == w_{H-1-h} bit for bit.
inline std::vector<double> area_weights(std::size_t rows) {
  require(rows >= 2, "area_weights needs H >= 2");
  std::vector<double> w(rows);
  for (std::size_t h = 0; h < rows; ++h) {
    const std::size_t k = std::min(h, rows - 1 - h);
    w[h] = std::sin(kPi * static_cast<double>(k) / static_cast<double>(rows - 1));
  }
  return w;
}

/// Column w of the result is column (w + offset) mod W of the input.
inline Image circular_shift(const Image& img, std::size_t offset) {
  require(img.cols == 0 || offset < img.cols, "shift offset must be < W");
  Image out(img.rows, img.cols, img.channels);
  for (std::size_t h = 0; h < img.rows; ++h)
    for (std::size_t w = 0; w < img.cols; ++w) {
      const std::size_t src = (w + offset) % img.cols;
      for (std::size_t c = 0; c < img.channels; ++c) out(h, w, c) = img(h, src, c);
    }
  return out;
}

inline ErpVideo circular_shift(const ErpVideo& video, std::size_t offset) {
  ErpVideo out;
  out.fps = video.fps;
  out.frames.reserve(video.size());
  for (const Image& f : video.frames) out.frames.push_back(circular_shift(f, offset));
  return out;
}

template <typename Scalar>
Volume<Scalar> circular_shift(const Volume<Scalar>& vol, std::size_t offset) {
  require(vol.cols == 0 || offset < vol.cols, "shift offset must be < W");
  Volume<Scalar> out = vol;
  for (std::size_t t = 0; t < vol.frames; ++t)
    for (std::size_t h = 0; h < vol.rows; ++h)
      for (std::size_t w = 0; w < vol.cols; ++w)
        out(t, h, w) = vol(t, h, (w + offset) % vol.cols);
  return out;
}

/// mask * observed + (1 - mask) * generated for a binary mask.
inline Image masked_blend(const Image& observed, const Image& generated, const FrameView<std::uint8_t>& mask) {
  require(observed.same_shape(generated), "masked_blend: frame shape mismatch");
  require(mask.rows == observed.rows && mask.cols == observed.cols,
          "masked_blend: mask shape mismatch");
  Image out = generated;
  for (std::size_t h = 0; h < observed.rows; ++h)
    for (std::size_t w = 0; w < observed.cols; ++w) {
      const std::uint8_t m = mask(h, w);
      require(m <= 1, "masked_blend: mask must be binary");
      if (m == 1)
        for (std::size_t c = 0; c < observed.channels; ++c) out(h, w, c) = observed(h, w, c);
    }
  return out;
}

inline ErpVideo masked_blend(const ErpVideo& observed, const ErpVideo& generated,
                             const MaskVideo& mask) {
  require(observed.size() == generated.size() && observed.size() == mask.frames,
          "masked_blend: frame count mismatch");
  ErpVideo out;
  out.fps = observed.fps;
  for (std::size_t t = 0; t < observed.size(); ++t)
    out.frames.push_back(masked_blend(observed.frames[t], generated.frames[t], mask.frame(t)));
  return out;
}

// ---------------------------------------------------------------------------
// Temporal resampling

/// Nearest-index source frames: round(i * (T-1) / (t_eval-1)), endpoints kept.
inline std::vector<std::size_t> resample_indices(std::size_t frames, std::size_t t_eval) {
  require(frames >= 1, "resample_temporal: empty input");
  require(t_eval >= 1, "resample_temporal: t_eval must be >= 1");
  std::vector<std::size_t> idx(t_eval, 0);
  if (t_eval == 1) return idx;
  const std::size_t num = frames - 1, den = t_eval - 1;
  // round-half-up in exact integer arithmetic
  for (std::size_t i = 0; i < t_eval; ++i) idx[i] = (2 * i * num + den) / (2 * den);
  return idx;
}

template <typename T>
std::vector<T> resample_temporal(const std::vector<T>& seq, std::size_t t_eval) {
  std::vector<T> out;
  out.reserve(t_eval);
  for (std::size_t i : resample_indices(seq.size(), t_eval)) out.push_back(seq[i]);
  return out;
}

template <typename Scalar>
Volume<Scalar> resample_temporal(const Volume<Scalar>& vol, std::size_t t_eval) {
  const auto idx = resample_indices(vol.frames, t_eval);
  Volume<Scalar> out(t_eval, vol.rows, vol.cols, Scalar{0}, vol.unit);
  for (std::size_t i = 0; i < t_eval; ++i) {
    const auto src = vol.frame(idx[i]).values;
    std::copy(src.begin(), src.end(), out.frame_span(i).begin());
  }
  return out;
}

inline ErpVideo resample_temporal(const ErpVideo& video, std::size_t t_eval) {
  ErpVideo out;
  out.fps = video.fps;
  out.frames = resample_temporal(video.frames, t_eval);
  return out;
}

}  // namespace erpgeo
