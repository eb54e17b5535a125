#pragma once

// Writes an oracle clip to disk: PNG frames, FDM1 depth, tracks, poses, manifest.

#include <filesystem>
#include <string>
#include <system_error>

#include "erpgeo/io/binary.hpp"
#include "erpgeo/io/json.hpp"
#include "erpgeo/io/png.hpp"
#include "erpgeo/synth.hpp"

namespace erpgeo::io {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

struct OracleClipFiles {
  std::string frames_dir = "frames";
  std::string depth_file = "depth.fdm";
  std::string tracks_file = "tracks.json";
  std::string poses_file = "poses.json";
  std::string manifest_file = "manifest.json";
};

struct OracleClip {
  OracleClipFiles files;
  PoseSequence poses;
  TrackSet tracks;
};

/// Renders and writes a clip frame by frame. Paths in the manifest are
/// relative to `out`.
inline OracleClip generate_clip(const SynthConfig& cfg, const std::string& out) {
  const Scene scene(cfg.scene);
  const SceneSpec& s = scene.spec();
  const std::filesystem::path root(out);
  OracleClip clip;
  ensure_dir(root / clip.files.frames_dir);

  DepthWriter depth((root / clip.files.depth_file).string(), s.frames, s.rows, s.cols, DepthUnit::kMeters);
  for (std::size_t t = 0; t < s.frames; ++t) {
    const RenderedFrame f = render_erp(scene, t);
    write_png((root / clip.files.frames_dir / frame_name(t)).string(), f.rgb);
    depth.write_frame<double>(f.depth);
  }
  depth.close();
  write_video_info((root / clip.files.frames_dir).string(), {s.fps, s.cols, s.rows, s.frames});

  clip.poses = scene.poses();
  clip.tracks = exact_tracks(scene, cfg.grid_rows, cfg.grid_cols);
  write_tracks((root / clip.files.tracks_file).string(), clip.tracks);
  write_poses((root / clip.files.poses_file).string(), clip.poses);

  OrderedJson m;
  m["paths"] = {{"frames_dir", clip.files.frames_dir},
                {"depth_file", clip.files.depth_file},
                {"tracks_file", clip.files.tracks_file},
                {"poses_file", clip.files.poses_file}};
  m["num_frames"] = s.frames;
  m["num_tracks"] = clip.tracks.size();
  m["seed"] = s.seed;
  m["scene"] = synth_config_to_json(cfg);
  write_json((root / clip.files.manifest_file).string(), m);
  return clip;
}

}  // namespace erpgeo::io
