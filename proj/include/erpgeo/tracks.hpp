#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "erpgeo/sphere.hpp"

namespace erpgeo {

/// One point trajectory: normalized ERP coordinates and visibility per frame,
/// optionally with world-frame positions (absent entries are nullopt).
struct Track {
  std::int64_t id = 0;
  std::vector<ErpCoord> uv;
  std::vector<std::uint8_t> vis;
  std::vector<std::optional<Vec3>> xyz_world;  // empty when the file carries none

  bool has_xyz() const { return !xyz_world.empty(); }
  bool visible(std::size_t t) const { return vis[t] != 0; }
};

struct TrackSet {
  std::size_t num_frames = 0;
  std::vector<Track> tracks;

  std::size_t size() const { return tracks.size(); }

  void validate() const {
    for (const Track& tr : tracks) {
      require(tr.uv.size() == num_frames && tr.vis.size() == num_frames,
              "track " + std::to_string(tr.id) + " does not cover num_frames samples");
      require(!tr.has_xyz() || tr.xyz_world.size() == num_frames,
              "track " + std::to_string(tr.id) + " xyz_world length mismatch");
      for (std::uint8_t v : tr.vis)
        require(v <= 1, "track " + std::to_string(tr.id) + " visibility must be 0 or 1");
    }
  }
};

inline TrackSet resample_temporal(const TrackSet& set, std::size_t t_eval) {
  const auto idx = resample_indices(set.num_frames, t_eval);
  TrackSet out;
  out.num_frames = t_eval;
  out.tracks.reserve(set.size());
  for (const Track& tr : set.tracks) {
    Track r;
    r.id = tr.id;
    for (std::size_t i : idx) {
      r.uv.push_back(tr.uv[i]);
      r.vis.push_back(tr.vis[i]);
      if (tr.has_xyz()) r.xyz_world.push_back(tr.xyz_world[i]);
    }
    out.tracks.push_back(std::move(r));
  }
  return out;
}

/// Track coordinates matching circular_shift(image, offset): a feature at
/// column c moves to column c - offset.
inline TrackSet circular_shift(const TrackSet& set, std::size_t offset, std::size_t cols) {
  TrackSet out = set;
  const double du = static_cast<double>(offset) / static_cast<double>(cols);
  for (Track& tr : out.tracks)
    for (ErpCoord& c : tr.uv) c.u = wrap_unit(c.u - du);
  return out;
}

}  // namespace erpgeo
