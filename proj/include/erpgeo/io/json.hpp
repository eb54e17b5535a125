#pragma once

// JSON formats: tracks, poses, loss reports, video sidecars and scene specs.

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "erpgeo/error.hpp"
#include "erpgeo/losses.hpp"
#include "erpgeo/pose.hpp"
#include "erpgeo/synth.hpp"
#include "erpgeo/tracks.hpp"

namespace erpgeo::io {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

inline Json read_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ValidationError("'" + path + "': invalid JSON: " + e.what());
  }
}

template <typename J>
void write_json(const std::string& path, const J& j, int indent = 2) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << j.dump(indent) << "\n";
  if (!os) throw IoError("write failed for '" + path + "'");
}

namespace detail {
/// Wraps JSON type errors into validation errors naming the file.
template <typename F>
auto parse_guard(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

inline Vec3 vec3(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline OrderedJson vec3_json(const Vec3& v) { return OrderedJson::array({v.x(), v.y(), v.z()}); }
}  // namespace detail

// ---------------------------------------------------------------------------
// Tracks

inline OrderedJson tracks_to_json(const TrackSet& set) {
  OrderedJson j;
  j["num_tracks"] = set.size();
  j["num_frames"] = set.num_frames;
  OrderedJson arr = OrderedJson::array();
  for (const Track& tr : set.tracks) {
    OrderedJson t;
    t["id"] = tr.id;
    OrderedJson uv = OrderedJson::array();
    for (const ErpCoord& c : tr.uv) uv.push_back({c.u, c.v});
    t["uv"] = std::move(uv);
    t["vis"] = tr.vis;
    if (tr.has_xyz()) {
      OrderedJson xyz = OrderedJson::array();
      for (const auto& p : tr.xyz_world) xyz.push_back(p ? detail::vec3_json(*p) : OrderedJson(nullptr));
      t["xyz_world"] = std::move(xyz);
    }
    arr.push_back(std::move(t));
  }
  j["tracks"] = std::move(arr);
  return j;
}

inline TrackSet tracks_from_json(const Json& j, const std::string& what = "tracks") {
  return detail::parse_guard(what, [&] {
    TrackSet set;
    set.num_frames = j.at("num_frames").get<std::size_t>();
    const Json& arr = j.at("tracks");
    if (j.contains("num_tracks") && j["num_tracks"].get<std::size_t>() != arr.size())
      throw ValidationError(what + ": num_tracks does not match the track list");
    for (const Json& t : arr) {
      Track tr;
      tr.id = t.at("id").get<std::int64_t>();
      for (const Json& c : t.at("uv")) {
        if (!c.is_array() || c.size() != 2) throw ValidationError(what + ": uv entries must be [u, v]");
        tr.uv.push_back({c[0].get<double>(), c[1].get<double>()});
      }
      for (const Json& v : t.at("vis")) tr.vis.push_back(static_cast<std::uint8_t>(v.get<int>()));
      if (t.contains("xyz_world") && !t["xyz_world"].is_null())
        for (const Json& p : t["xyz_world"])
          tr.xyz_world.push_back(p.is_null() ? std::nullopt : std::optional<Vec3>(detail::vec3(p)));
      set.tracks.push_back(std::move(tr));
    }
    set.validate();
    return set;
  });
}

inline void write_tracks(const std::string& path, const TrackSet& set) { write_json(path, tracks_to_json(set), -1); }
inline TrackSet read_tracks(const std::string& path) { return tracks_from_json(read_json(path), path); }

// ---------------------------------------------------------------------------
// Poses

inline OrderedJson pose_to_json(const RigidPose& p) {
  OrderedJson j;
  OrderedJson r = OrderedJson::array();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) r.push_back(p.R(a, b));
  j["R"] = std::move(r);
  j["t"] = detail::vec3_json(p.t);
  return j;
}

inline RigidPose pose_from_json(const Json& j) {
  const Json& r = j.at("R");
  if (!r.is_array() || r.size() != 9) throw ValidationError("pose R must hold 9 numbers");
  RigidPose p;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) p.R(a, b) = r[static_cast<std::size_t>(3 * a + b)].get<double>();
  p.t = detail::vec3(j.at("t"));
  return p;
}

inline OrderedJson poses_to_json(const PoseSequence& poses) {
  OrderedJson arr = OrderedJson::array();
  for (const RigidPose& p : poses) arr.push_back(pose_to_json(p));
  return arr;
}

inline void write_poses(const std::string& path, const PoseSequence& poses) { write_json(path, poses_to_json(poses)); }

inline PoseSequence read_poses(const std::string& path) {
  const Json j = read_json(path);
  return detail::parse_guard(path, [&] {
    if (!j.is_array()) throw ValidationError(path + ": poses must be a JSON list");
    PoseSequence out;
    for (const Json& p : j) out.push_back(pose_from_json(p));
    return out;
  });
}

// ---------------------------------------------------------------------------
// Loss reports

inline OrderedJson loss_report_to_json(const LossReport& r) {
  OrderedJson j;
  j["l_visual"] = r.l_visual;
  j["l_depth"] = r.l_depth;
  j["l_track"] = r.l_track;
  j["l_total"] = r.l_total;
  j["sigma"] = r.sigma;
  j["iter"] = r.iter;
  return j;
}

// ---------------------------------------------------------------------------
// ERP video directories: frame_%05d.png plus video.json

struct VideoInfo {
  double fps = 16.0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t num_frames = 0;
};

inline std::string frame_name(std::size_t t, const char* prefix = "frame") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu.png", prefix, t);
  return buf;
}

inline void write_video_info(const std::string& dir, const VideoInfo& info) {
  OrderedJson j;
  j["fps"] = info.fps;
  j["width"] = info.width;
  j["height"] = info.height;
  j["num_frames"] = info.num_frames;
  write_json((std::filesystem::path(dir) / "video.json").string(), j);
}

inline VideoInfo read_video_info(const std::string& dir) {
  const std::string path = (std::filesystem::path(dir) / "video.json").string();
  const Json j = read_json(path);
  return detail::parse_guard(path, [&] {
    VideoInfo v;
    v.fps = j.at("fps").get<double>();
    v.width = j.at("width").get<std::size_t>();
    v.height = j.at("height").get<std::size_t>();
    v.num_frames = j.at("num_frames").get<std::size_t>();
    return v;
  });
}

// ---------------------------------------------------------------------------
// Scene specs

namespace detail {
inline Rgb rgb(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("colors must be [r, g, b]");
  return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>()};
}

inline OrderedJson rgb_json(const Rgb& c) { return OrderedJson::array({c[0], c[1], c[2]}); }

/// Keyframe as {R, t} (world-to-camera) or {position, yaw_deg, pitch_deg}.
inline RigidPose keyframe(const Json& k) {
  if (k.contains("R")) return pose_from_json(k);
  const Vec3 c = vec3(k.at("position"));
  const double yaw = k.value("yaw_deg", 0.0) * kPi / 180.0;
  const double pitch = k.value("pitch_deg", 0.0) * kPi / 180.0;
  return pose_from_center(yaw_rotation(yaw) * pitch_rotation(pitch), c);
}
}  // namespace detail

/// Track query grid and scene parsed from one synth config.
struct SynthConfig {
  SceneSpec scene;
  std::size_t grid_rows = 16;
  std::size_t grid_cols = 32;
};

/// Missing keys keep the defaults of default_scene(seed).
inline SynthConfig synth_config_from_json(const Json& j, std::uint64_t seed, const std::string& what = "scene") {
  return detail::parse_guard(what, [&] {
    SynthConfig cfg;
    cfg.scene = default_scene(seed);
    SceneSpec& s = cfg.scene;
    if (j.contains("half_extents")) s.half_extents = detail::vec3(j["half_extents"]);
    s.frames = j.value("frames", s.frames);
    s.rows = j.value("rows", s.rows);
    s.cols = j.value("cols", s.cols);
    s.fps = j.value("fps", s.fps);
    s.color_jitter = j.value("color_jitter", s.color_jitter);
    if (j.contains("checker")) {
      const Json& c = j["checker"];
      for (Checker& f : s.faces) {
        f.cell = c.value("cell", f.cell);
        if (c.contains("contrast")) {
          const float k = 1.0f - c["contrast"].get<float>();
          for (int i = 0; i < 3; ++i) f.color_b[i] = k * f.color_a[i];
        }
      }
    }
    if (j.contains("faces")) {
      const Json& faces = j["faces"];
      if (!faces.is_array() || faces.size() != 6) throw ValidationError(what + ": faces must list 6 entries");
      for (std::size_t i = 0; i < 6; ++i) {
        s.faces[i].cell = faces[i].value("cell", s.faces[i].cell);
        if (faces[i].contains("color_a")) s.faces[i].color_a = detail::rgb(faces[i]["color_a"]);
        if (faces[i].contains("color_b")) s.faces[i].color_b = detail::rgb(faces[i]["color_b"]);
      }
    }
    if (j.contains("sphere") && !j["sphere"].is_null()) {
      const Json& sj = j["sphere"];
      DynamicSphere sp;
      sp.radius = sj.value("radius", sp.radius);
      if (sj.contains("color")) sp.color = detail::rgb(sj["color"]);
      const Json& pj = sj.at("path");
      const std::string kind = pj.value("kind", std::string("circular"));
      if (kind == "affine") {
        sp.path.kind = SpherePath::Kind::kAffine;
      } else if (kind == "circular") {
        sp.path.kind = SpherePath::Kind::kCircular;
      } else {
        throw ValidationError(what + ": sphere path kind must be affine or circular");
      }
      if (pj.contains("origin")) sp.path.origin = detail::vec3(pj["origin"]);
      if (pj.contains("velocity")) sp.path.velocity = detail::vec3(pj["velocity"]);
      sp.path.radius = pj.value("radius", sp.path.radius);
      sp.path.rate = pj.value("rate", sp.path.rate);
      sp.path.phase = pj.value("phase", sp.path.phase);
      s.sphere = sp;
    }
    if (j.contains("camera")) {
      s.keyframes.clear();
      for (const Json& k : j["camera"]) s.keyframes.push_back(detail::keyframe(k));
    }
    if (j.contains("track_grid")) {
      const Json& g = j["track_grid"];
      if (!g.is_array() || g.size() != 2) throw ValidationError(what + ": track_grid must be [rows, cols]");
      cfg.grid_rows = g[0].get<std::size_t>();
      cfg.grid_cols = g[1].get<std::size_t>();
    }
    return cfg;
  });
}

/// Full echo of a resolved config (inverse of synth_config_from_json).
inline OrderedJson synth_config_to_json(const SynthConfig& cfg) {
  const SceneSpec& s = cfg.scene;
  OrderedJson j;
  j["half_extents"] = detail::vec3_json(s.half_extents);
  j["frames"] = s.frames;
  j["rows"] = s.rows;
  j["cols"] = s.cols;
  j["fps"] = s.fps;
  j["seed"] = s.seed;
  j["color_jitter"] = s.color_jitter;
  OrderedJson faces = OrderedJson::array();
  for (const Checker& f : s.faces)
    faces.push_back({{"cell", f.cell}, {"color_a", detail::rgb_json(f.color_a)}, {"color_b", detail::rgb_json(f.color_b)}});
  j["faces"] = std::move(faces);
  if (s.sphere) {
    const SpherePath& p = s.sphere->path;
    OrderedJson pj;
    pj["kind"] = p.kind == SpherePath::Kind::kAffine ? "affine" : "circular";
    pj["origin"] = detail::vec3_json(p.origin);
    pj["velocity"] = detail::vec3_json(p.velocity);
    pj["radius"] = p.radius;
    pj["rate"] = p.rate;
    pj["phase"] = p.phase;
    j["sphere"] = {{"radius", s.sphere->radius}, {"color", detail::rgb_json(s.sphere->color)}, {"path", pj}};
  } else {
    j["sphere"] = nullptr;
  }
  j["camera"] = poses_to_json(s.keyframes);
  j["track_grid"] = {cfg.grid_rows, cfg.grid_cols};
  return j;
}

}  // namespace erpgeo::io
