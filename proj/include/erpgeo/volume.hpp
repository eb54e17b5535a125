#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "erpgeo/error.hpp"

namespace erpgeo {

enum class DepthUnit : std::uint8_t { kNormalized = 0, kMeters = 1 };

/// Read-only view of one H x W scalar frame stored row-major.
template <typename Scalar>
struct FrameView {
  std::span<const Scalar> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  Scalar operator()(std::size_t h, std::size_t w) const { return values[h * cols + w]; }
};

/// T x H x W scalar field in (t, h, w) row-major order. Holds depth videos
/// (predicted, pseudo-label or re-annotated) and per-pixel masks.
template <typename Scalar>
struct Volume {
  std::size_t frames = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  DepthUnit unit = DepthUnit::kNormalized;
  std::vector<Scalar> values;

  Volume() = default;
  Volume(std::size_t t, std::size_t h, std::size_t w, Scalar fill = Scalar{0},
         DepthUnit u = DepthUnit::kNormalized)
      : frames(t), rows(h), cols(w), unit(u), values(t * h * w, fill) {}

  std::size_t frame_size() const { return rows * cols; }
  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }

  std::size_t index(std::size_t t, std::size_t h, std::size_t w) const {
    return (t * rows + h) * cols + w;
  }
  Scalar& operator()(std::size_t t, std::size_t h, std::size_t w) { return values[index(t, h, w)]; }
  Scalar operator()(std::size_t t, std::size_t h, std::size_t w) const {
    return values[index(t, h, w)];
  }

  FrameView<Scalar> frame(std::size_t t) const {
    return {std::span<const Scalar>(values).subspan(t * frame_size(), frame_size()), rows, cols};
  }
  std::span<Scalar> frame_span(std::size_t t) {
    return std::span<Scalar>(values).subspan(t * frame_size(), frame_size());
  }

  bool same_shape(const Volume& other) const {
    return frames == other.frames && rows == other.rows && cols == other.cols;
  }

  template <typename Other>
  Volume<Other> cast() const {
    Volume<Other> out;
    out.frames = frames;
    out.rows = rows;
    out.cols = cols;
    out.unit = unit;
    out.values.assign(values.begin(), values.end());
    return out;
  }
};

using DepthVideo = Volume<double>;
using DepthVideoF = Volume<float>;
using MaskVideo = Volume<std::uint8_t>;

/// H x W x C image with float samples in [0,1], row-major, channels interleaved.
struct Image {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 3;
  std::vector<float> values;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c = 3, float fill = 0.0f)
      : rows(h), cols(w), channels(c), values(h * w * c, fill) {}

  float& operator()(std::size_t h, std::size_t w, std::size_t c) {
    return values[(h * cols + w) * channels + c];
  }
  float operator()(std::size_t h, std::size_t w, std::size_t c) const {
    return values[(h * cols + w) * channels + c];
  }
  bool same_shape(const Image& o) const {
    return rows == o.rows && cols == o.cols && channels == o.channels;
  }
};

/// Equirectangular frame sequence. Column 0 and column W-1 are adjacent on
/// the sphere; canonical panoramas have W = 2H.
struct ErpVideo {
  std::vector<Image> frames;
  double fps = 16.0;

  std::size_t size() const { return frames.size(); }
  std::size_t rows() const { return frames.empty() ? 0 : frames.front().rows; }
  std::size_t cols() const { return frames.empty() ? 0 : frames.front().cols; }
  bool canonical_aspect() const { return cols() == 2 * rows(); }
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ValidationError(message);
}
inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace erpgeo
