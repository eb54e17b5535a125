#pragma once

// Little-endian containers: FDM1 depth videos and FEM1 embedding sets.

#include <Eigen/Core>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "erpgeo/error.hpp"
#include "erpgeo/volume.hpp"

namespace erpgeo::io {

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32s(std::ostream& os, std::span<const float> v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
  } else {
    for (float f : v) put_u32(os, std::bit_cast<std::uint32_t>(f));
  }
}

inline void get_f32s(std::istream& is, std::span<float> out) {
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size() * 4));
  if constexpr (std::endian::native != std::endian::little) {
    for (float& f : out) {
      unsigned char b[4];
      std::memcpy(b, &f, 4);
      f = std::bit_cast<float>(get_u32(b));
    }
  }
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  require(v <= 0xffffffffu, std::string(what) + " exceeds the 32-bit header field");
  return static_cast<std::uint32_t>(v);
}
}  // namespace detail

/// Streams an FDM1 file frame by frame so long clips never sit in memory.
class DepthWriter {
 public:
  DepthWriter(const std::string& path, std::size_t frames, std::size_t rows, std::size_t cols, DepthUnit unit)
      : path_(path), frame_size_(rows * cols), frames_(frames), os_(path, std::ios::binary) {
    if (!os_) throw IoError("cannot open '" + path + "' for writing");
    os_.write("FDM1", 4);
    detail::put_u32(os_, detail::checked_u32(frames, "frame count"));
    detail::put_u32(os_, detail::checked_u32(rows, "row count"));
    detail::put_u32(os_, detail::checked_u32(cols, "column count"));
    const char tail[4] = {static_cast<char>(unit), 0, 0, 0};
    os_.write(tail, 4);
  }

  template <typename Scalar>
  void write_frame(std::span<const Scalar> values) {
    require(values.size() == frame_size_, "depth frame size mismatch for '" + path_ + "'");
    require(written_ < frames_, "too many depth frames for '" + path_ + "'");
    buf_.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) buf_[i] = static_cast<float>(values[i]);
    detail::put_f32s(os_, buf_);
    ++written_;
  }

  void close() {
    if (written_ != frames_) throw IoError("'" + path_ + "': wrote " + std::to_string(written_) + " of " +
                                           std::to_string(frames_) + " depth frames");
    os_.close();
    if (!os_) throw IoError("write failed for '" + path_ + "'");
  }

 private:
  std::string path_;
  std::size_t frame_size_;
  std::size_t frames_;
  std::size_t written_ = 0;
  std::ofstream os_;
  std::vector<float> buf_;
};

template <typename Scalar>
void write_depth(const std::string& path, const Volume<Scalar>& depth) {
  DepthWriter w(path, depth.frames, depth.rows, depth.cols, depth.unit);
  for (std::size_t t = 0; t < depth.frames; ++t) w.write_frame<Scalar>(depth.frame(t).values);
  w.close();
}

inline DepthVideoF read_depth(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open depth file '" + path + "'");
  unsigned char hdr[20];
  is.read(reinterpret_cast<char*>(hdr), 20);
  if (!is || std::memcmp(hdr, "FDM1", 4) != 0) throw IoError("'" + path + "' is not an FDM1 depth file");
  const std::uint32_t T = detail::get_u32(hdr + 4), H = detail::get_u32(hdr + 8), W = detail::get_u32(hdr + 12);
  if (hdr[16] > 1) throw IoError("'" + path + "': unknown depth unit " + std::to_string(hdr[16]));
  DepthVideoF d(T, H, W, 0.0f, static_cast<DepthUnit>(hdr[16]));
  detail::get_f32s(is, d.values);
  if (!is) throw IoError("'" + path + "': truncated depth payload");
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("'" + path + "': trailing bytes after depth payload");
  return d;
}

inline void write_embeddings(const std::string& path, const Eigen::MatrixXd& e) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write("FEM1", 4);
  detail::put_u32(os, detail::checked_u32(static_cast<std::size_t>(e.rows()), "embedding rows"));
  detail::put_u32(os, detail::checked_u32(static_cast<std::size_t>(e.cols()), "embedding dims"));
  std::vector<float> row(static_cast<std::size_t>(e.cols()));
  for (Eigen::Index r = 0; r < e.rows(); ++r) {
    for (Eigen::Index c = 0; c < e.cols(); ++c) row[static_cast<std::size_t>(c)] = static_cast<float>(e(r, c));
    detail::put_f32s(os, row);
  }
  if (!os) throw IoError("write failed for '" + path + "'");
}

inline Eigen::MatrixXd read_embeddings(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open embedding file '" + path + "'");
  unsigned char hdr[12];
  is.read(reinterpret_cast<char*>(hdr), 12);
  if (!is || std::memcmp(hdr, "FEM1", 4) != 0) throw IoError("'" + path + "' is not an FEM1 embedding file");
  const std::uint32_t N = detail::get_u32(hdr + 4), D = detail::get_u32(hdr + 8);
  std::vector<float> vals(static_cast<std::size_t>(N) * D);
  detail::get_f32s(is, vals);
  if (!is) throw IoError("'" + path + "': truncated embedding payload");
  Eigen::MatrixXd e(N, D);
  for (std::uint32_t r = 0; r < N; ++r)
    for (std::uint32_t c = 0; c < D; ++c) e(r, c) = vals[static_cast<std::size_t>(r) * D + c];
  if (!e.allFinite()) throw ValidationError("'" + path + "': non-finite embedding entries");
  return e;
}

}  // namespace erpgeo::io
