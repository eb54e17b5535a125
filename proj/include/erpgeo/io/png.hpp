#pragma once

// 8-bit PNG codec for RGB frames and single-channel masks (libpng simplified API).

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "erpgeo/error.hpp"
#include "erpgeo/volume.hpp"

namespace erpgeo::io {

inline std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline void write_png_bytes(const std::string& path, const std::uint8_t* data, std::size_t rows,
                            std::size_t cols, bool rgb) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(cols);
  img.height = static_cast<png_uint_32>(rows);
  img.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot write PNG '" + path + "': " + msg);
  }
}

/// Reads a PNG converted to 8-bit RGB (rgb) or gray.
inline std::vector<std::uint8_t> read_png_bytes(const std::string& path, std::size_t& rows, std::size_t& cols,
                                                bool rgb) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw IoError("cannot read PNG '" + path + "': " + std::string(img.message));
  img.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG '" + path + "': " + msg);
  }
  rows = img.height;
  cols = img.width;
  return buf;
}

inline void write_png(const std::string& path, const Image& im) {
  require(im.channels == 3, "write_png: image must be RGB");
  std::vector<std::uint8_t> bytes(im.values.size());
  std::transform(im.values.begin(), im.values.end(), bytes.begin(), quantize);
  write_png_bytes(path, bytes.data(), im.rows, im.cols, true);
}

inline Image read_png(const std::string& path) {
  std::size_t rows = 0, cols = 0;
  const auto bytes = read_png_bytes(path, rows, cols, true);
  Image im(rows, cols, 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) im.values[i] = static_cast<float>(bytes[i]) / 255.0f;
  return im;
}

/// Mask frame as 0/255 gray.
inline void write_mask_png(const std::string& path, const FrameView<std::uint8_t>& mask) {
  std::vector<std::uint8_t> bytes(mask.values.size());
  std::transform(mask.values.begin(), mask.values.end(), bytes.begin(),
                 [](std::uint8_t m) { return static_cast<std::uint8_t>(m ? 255 : 0); });
  write_png_bytes(path, bytes.data(), mask.rows, mask.cols, false);
}

/// Mask frame as 0/1 (any gray value >= 128 is set).
inline MaskVideo read_mask_png(const std::string& path) {
  std::size_t rows = 0, cols = 0;
  const auto bytes = read_png_bytes(path, rows, cols, false);
  MaskVideo m(1, rows, cols);
  for (std::size_t i = 0; i < bytes.size(); ++i) m.values[i] = bytes[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace erpgeo::io
