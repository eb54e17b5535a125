#pragma once

// Command-line front end. run() returns the process exit code:
// 0 success, 1 validation or usage error, 2 IO error.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "erpgeo/egomotion.hpp"
#include "erpgeo/gradcheck.hpp"
#include "erpgeo/io/binary.hpp"
#include "erpgeo/io/clip.hpp"
#include "erpgeo/io/evaluation.hpp"
#include "erpgeo/io/json.hpp"
#include "erpgeo/io/png.hpp"
#include "erpgeo/losses.hpp"
#include "erpgeo/metrics.hpp"
#include "erpgeo/oracle.hpp"
#include "erpgeo/pointcloud.hpp"
#include "erpgeo/sphere.hpp"
#include "erpgeo/synth.hpp"

namespace erpgeo::app {

inline constexpr const char* kOutEnv = "ERPGEO_OUT";

namespace fs = std::filesystem;

inline std::string default_out(const std::string& command) {
  const char* root = std::getenv(kOutEnv);
  return (fs::path(root && *root ? root : "out") / command).string();
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

inline double deg2rad(double d) { return d * kPi / 180.0; }

/// Frames of an input that is either a single PNG or an ERP video directory.
struct FrameSource {
  std::string path;
  bool is_dir = false;
  io::VideoInfo info;

  explicit FrameSource(const std::string& p) : path(p) {
    if (!fs::exists(p)) throw IoError("input not found: '" + p + "'");
    is_dir = fs::is_directory(p);
    if (is_dir) {
      info = io::read_video_info(p);
    } else {
      const Image im = io::read_png(p);
      info = {16.0, im.cols, im.rows, 1};
    }
  }
  Image frame(std::size_t t) const {
    return is_dir ? io::read_png((fs::path(path) / io::frame_name(t)).string()) : io::read_png(path);
  }
};

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config, out;
  std::uint64_t seed = 0;
  std::optional<std::size_t> frames, rows, cols, grid_rows, grid_cols;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const io::Json j = a.config.empty() ? io::Json::object() : io::read_json(a.config);
  io::SynthConfig cfg = io::synth_config_from_json(j, a.seed, a.config.empty() ? "scene" : a.config);
  if (a.frames) cfg.scene.frames = *a.frames;
  if (a.rows) cfg.scene.rows = *a.rows;
  if (a.cols) cfg.scene.cols = *a.cols;
  if (a.grid_rows) cfg.grid_rows = *a.grid_rows;
  if (a.grid_cols) cfg.grid_cols = *a.grid_cols;
  const io::OracleClip clip = io::generate_clip(cfg, a.out);
  out << "synth: " << cfg.scene.frames << " frames " << cfg.scene.rows << "x" << cfg.scene.cols << ", "
      << clip.tracks.size() << " tracks -> " << a.out << "\n";
  return 0;
}

struct CropArgs {
  std::string input, out;
  double fov = 90.0, yaw = 0.0, pitch = 0.0;
  std::size_t width = 512, height = 512;
};

inline int cmd_crop(const CropArgs& a, std::ostream& out) {
  const FrameSource src(a.input);
  const PerspectiveCamera cam{a.fov, deg2rad(a.yaw), deg2rad(a.pitch), a.width, a.height};
  cam.validate();
  io::ensure_dir(a.out);
  for (std::size_t t = 0; t < src.info.num_frames; ++t)
    io::write_png((fs::path(a.out) / io::frame_name(t)).string(), sample_perspective(src.frame(t), cam));
  io::write_video_info(a.out, {src.info.fps, a.width, a.height, src.info.num_frames});
  out << "crop: " << src.info.num_frames << " frames -> " << a.out << "\n";
  return 0;
}

struct CompositeArgs {
  std::string input, out, fill = "constant";
  double fov = 90.0, yaw = 0.0, pitch = 0.0, fill_value = 0.0, fill_scale = 1.0;
  std::size_t rows = 512, cols = 1024;
  std::uint64_t seed = 0;
};

inline int cmd_composite(const CompositeArgs& a, std::ostream& out) {
  const FrameSource src(a.input);
  const PerspectiveCamera cam{a.fov, deg2rad(a.yaw), deg2rad(a.pitch), src.info.width, src.info.height};
  cam.validate();
  io::ensure_dir(a.out);
  for (std::size_t t = 0; t < src.info.num_frames; ++t) {
    const FillPolicy fill = a.fill == "gaussian" ? FillPolicy::gaussian(a.fill_scale, a.seed + t, a.fill_value)
                                                 : FillPolicy::constant(a.fill_value);
    const Composite c = composite_to_erp(src.frame(t), cam, a.rows, a.cols, fill);
    io::write_png((fs::path(a.out) / io::frame_name(t)).string(), c.erp);
    io::write_mask_png((fs::path(a.out) / io::frame_name(t, "mask")).string(), c.mask.frame(0));
  }
  io::write_video_info(a.out, {src.info.fps, a.cols, a.rows, src.info.num_frames});
  out << "composite: " << src.info.num_frames << " frames -> " << a.out << "\n";
  return 0;
}

struct LossArgs {
  std::string pred_depth, gt_depth, tracks, poses, gt_poses, out;
  std::optional<double> sigma;
  std::optional<std::uint64_t> seed;
  double sigma_max = 3.0, l_visual = 0.0, lambda_d = 0.3, lambda_tau = 0.06;
  std::size_t iter = 1000, warmup = 1000, depth_stride = 1;
};

inline DepthVideo to_double(const DepthVideoF& d) { return d.cast<double>(); }

inline int cmd_loss(const LossArgs& a, std::ostream& out) {
  DepthVideo pred = to_double(io::read_depth(a.pred_depth));
  DepthVideo gt = to_double(io::read_depth(a.gt_depth));
  const TrackSet tracks = io::read_tracks(a.tracks);
  PoseSequence poses = io::read_poses(a.poses);
  PoseSequence gt_poses = a.gt_poses.empty() ? poses : io::read_poses(a.gt_poses);
  require(pred.same_shape(gt), "loss: pred and gt depth shapes differ");
  require(pred.unit == gt.unit, "loss: pred and gt depth units differ");

  // Metric depth is normalized by the largest finite GT depth; poses follow.
  if (gt.unit == DepthUnit::kMeters) {
    double m = 0.0;
    for (double d : gt.values)
      if (std::isfinite(d)) m = std::max(m, d);
    require(m > 0.0, "loss: GT depth has no positive value");
    for (double& d : pred.values) d /= m;
    for (double& d : gt.values) d /= m;
    for (RigidPose& p : poses) p.t /= m;
    for (RigidPose& p : gt_poses) p.t /= m;
  }

  NoiseLevel noise;
  noise.sigma_max = a.sigma_max;
  if (a.sigma) {
    noise.sigma = *a.sigma;
  } else {
    if (!a.seed) throw ValidationError("loss: --seed is required when --sigma is not given");
    std::mt19937_64 rng(*a.seed);
    noise.sigma = sample_sigma(rng);
  }
  TrackLossConfig tcfg;
  tcfg.depth_frame_stride = a.depth_stride;
  const std::vector<double> weights = area_weights(gt.rows);
  const double l_depth = depth_loss(pred, gt, noise, weights, {}, false).value;
  const TrackStates gt_states = gt_states_from_depth(tracks, gt, gt_poses, tcfg);
  const double l_track = track_loss(tracks, pred, poses, gt_states, noise, tcfg, false).value;
  const LossReport rep = total_loss(a.l_visual, l_depth, l_track, {a.lambda_d, a.lambda_tau, a.warmup}, a.iter,
                                    noise.sigma);
  io::ensure_dir(a.out);
  const io::OrderedJson j = io::loss_report_to_json(rep);
  io::write_json((fs::path(a.out) / "loss.json").string(), j);
  out << j.dump() << "\n";
  return 0;
}

struct GradcheckArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t frames = 6, rows = 24, cols = 48, coords = 1000;
  double tolerance = 1e-4;
};

inline int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  LossFixtureOptions fo;
  fo.frames = a.frames;
  fo.rows = a.rows;
  fo.cols = a.cols;
  const LossFixture fx = make_loss_fixture(a.seed, fo);
  const NoiseLevel noise{0.5, 3.0};
  GradCheckOptions go;
  go.max_coords = a.coords;
  go.seed = a.seed;
  const GradCheckResult d = verify_depth_loss_gradient(fx.pred, fx.gt, noise, fx.row_weights, {}, go);
  const TrackStates gt_states = gt_states_from_depth(fx.tracks, fx.gt, fx.poses);
  const GradCheckResult t = verify_track_loss_gradient(fx.tracks, fx.pred, fx.poses, gt_states, noise, {}, go);
  const bool ok = d.max_rel_error < a.tolerance && t.max_rel_error < a.tolerance;

  io::OrderedJson j;
  j["seed"] = a.seed;
  j["depth_loss"] = {{"max_rel_error", d.max_rel_error}, {"checked", d.checked}, {"candidates", d.candidates}};
  j["track_loss"] = {{"max_rel_error", t.max_rel_error}, {"checked", t.checked}, {"candidates", t.candidates}};
  j["tolerance"] = a.tolerance;
  j["pass"] = ok;
  io::ensure_dir(a.out);
  io::write_json((fs::path(a.out) / "gradcheck.json").string(), j);
  out << "depth_loss max relative error " << fmt(d.max_rel_error) << " over " << d.checked << " coordinates\n";
  out << "track_loss max relative error " << fmt(t.max_rel_error) << " over " << t.checked << " coordinates\n";
  out << (ok ? "gradcheck: pass" : "gradcheck: FAIL") << "\n";
  return ok ? 0 : 1;
}

struct EgoArgs {
  std::string tracks, depth, out;
  std::uint64_t seed = 0;
  std::size_t iterations = 256, min_inliers = 6;
  std::optional<double> threshold;
  double relative_threshold = 0.02;
};

inline int cmd_egomotion(const EgoArgs& a, std::ostream& out) {
  const TrackSet tracks = io::read_tracks(a.tracks);
  const DepthVideoF depth = io::read_depth(a.depth);
  EgoMotionOptions opt;
  opt.iterations = a.iterations;
  opt.min_inliers = a.min_inliers;
  opt.threshold = a.threshold;
  opt.relative_threshold = a.relative_threshold;
  opt.seed = a.seed;
  const PoseSequence poses = estimate_trajectory(tracks, depth, opt);
  io::ensure_dir(a.out);
  io::write_poses((fs::path(a.out) / "poses.json").string(), poses);
  out << "egomotion: " << poses.size() << " poses -> " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string manifest, out, fid_mode = "per_frame";
  std::size_t workers = 1, t_eval = 80;
  std::optional<std::size_t> max_clips;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  io::EvalRunOptions opt;
  opt.workers = a.workers;
  opt.eval.t_eval = a.t_eval;
  opt.eval.fid_mode = a.fid_mode == "clip_mean" ? FidMode::kClipMean : FidMode::kPerFrame;
  opt.max_clips = a.max_clips;
  const io::EvalRunSummary s = io::run_evaluation(a.manifest, a.out, opt);
  out << "eval: " << s.total << " clips, " << s.skipped << " skipped (already complete), " << s.evaluated
      << " evaluated, " << s.remaining << " remaining -> " << a.out << "\n";
  return 0;
}

struct LiftArgs {
  std::string frames, depth, poses, out;
  std::size_t index = 0, stride = 1, k_planes = 8;
  bool planar = false;
  std::optional<double> eps;
  std::uint64_t seed = 0;
};

inline int cmd_lift(const LiftArgs& a, std::ostream& out) {
  const FrameSource src(a.frames);
  require(a.index < src.info.num_frames, "lift: frame index out of range");
  const Image frame = src.frame(a.index);
  const DepthVideoF depth = io::read_depth(a.depth);
  require(a.index < depth.frames, "lift: frame index beyond the depth file");
  RigidPose pose;
  if (!a.poses.empty()) {
    const PoseSequence poses = io::read_poses(a.poses);
    require(a.index < poses.size(), "lift: frame index beyond the pose file");
    pose = poses[a.index];
  }
  PointCloud pc = lift_pointcloud(frame, depth.frame(a.index), pose, a.stride, static_cast<std::uint32_t>(a.index));
  std::size_t planes = 0;
  if (a.planar) {
    PlanarOptions po;
    po.eps = a.eps;
    po.k_planes = a.k_planes;
    po.seed = a.seed;
    PlanarResult r = planar_regularize_detailed(pc, po);
    planes = r.planes.size();
    pc = std::move(r.cloud);
  }
  io::ensure_dir(a.out);
  const std::string path = (fs::path(a.out) / "cloud.ply").string();
  export_ply(pc, path);
  out << "lift: " << pc.size() << " points";
  if (a.planar) out << ", " << planes << " planes";
  out << " -> " << path << "\n";
  return 0;
}

struct RenderArgs {
  std::string ply, poses, preset = "orbit", out;
  std::size_t anchor = 0, frames = 48, width = 512, height = 512;
  double fov = 90.0, radius = 0.5, step = 0.02;
  int splat = 1;
};

inline int cmd_render(const RenderArgs& a, std::ostream& out) {
  const PointCloud pc = import_ply(a.ply);
  RigidPose anchor;
  if (!a.poses.empty()) {
    const PoseSequence poses = io::read_poses(a.poses);
    require(a.anchor < poses.size(), "render: anchor index beyond the pose file");
    anchor = poses[a.anchor];
  }
  PathOptions po;
  po.frames = a.frames;
  po.radius = a.radius;
  po.step = a.step;
  const PoseSequence path = camera_path(parse_path_preset(a.preset), anchor, po);
  const PinholeIntrinsics k{a.fov, a.width, a.height};
  k.validate();
  SplatConfig sc;
  sc.radius_px = a.splat;
  io::ensure_dir(a.out);
  io::DepthWriter depth((fs::path(a.out) / "depth.fdm").string(), path.size(), a.height, a.width, DepthUnit::kMeters);
  for (std::size_t i = 0; i < path.size(); ++i) {
    const SplatImage img = render_pointcloud(pc, {k, path[i]}, sc);
    io::write_png((fs::path(a.out) / io::frame_name(i)).string(), img.rgb);
    depth.write_frame<double>(img.depth);
  }
  depth.close();
  io::write_video_info(a.out, {16.0, a.width, a.height, path.size()});
  io::write_poses((fs::path(a.out) / "poses.json").string(), path);
  out << "render: " << path.size() << " views (" << a.preset << ") -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Panoramic video geometry toolkit: synthetic oracle clips, geometry losses, ego-motion, "
               "metrics and point-cloud rendering."};
  app.name("erpgeo");
  app.require_subcommand(1);
  const auto nonneg = CLI::NonNegativeNumber;
  const auto pos = CLI::PositiveNumber;

  SynthArgs sy;
  sy.out = default_out("synth");
  auto* c_synth = app.add_subcommand("synth", "Render an oracle clip from a scene JSON");
  c_synth->add_option("--config", sy.config, "Scene JSON (defaults to the built-in room)")->check(CLI::ExistingFile);
  c_synth->add_option("--seed", sy.seed, "Texture jitter seed")->required();
  c_synth->add_option("--out", sy.out, "Output directory")->capture_default_str();
  c_synth->add_option("--frames", sy.frames, "Override frame count")->check(pos);
  c_synth->add_option("--rows", sy.rows, "Override ERP height")->check(CLI::Range(2, 1 << 16));
  c_synth->add_option("--cols", sy.cols, "Override ERP width")->check(pos);
  c_synth->add_option("--grid-rows", sy.grid_rows, "Track query grid rows")->check(pos);
  c_synth->add_option("--grid-cols", sy.grid_cols, "Track query grid columns")->check(pos);

  CropArgs cr;
  cr.out = default_out("crop");
  auto* c_crop = app.add_subcommand("crop", "Sample perspective frames from an ERP frame or video");
  c_crop->add_option("--input", cr.input, "ERP PNG or video directory")->required();
  c_crop->add_option("--fov", cr.fov, "Horizontal field of view (deg)")->capture_default_str();
  c_crop->add_option("--yaw", cr.yaw, "Yaw (deg)")->capture_default_str();
  c_crop->add_option("--pitch", cr.pitch, "Pitch (deg)")->capture_default_str();
  c_crop->add_option("--width", cr.width, "Output width")->check(pos)->capture_default_str();
  c_crop->add_option("--height", cr.height, "Output height")->check(pos)->capture_default_str();
  c_crop->add_option("--out", cr.out, "Output directory")->capture_default_str();

  CompositeArgs co;
  co.out = default_out("composite");
  auto* c_comp = app.add_subcommand("composite", "Paste perspective frames onto an ERP canvas with a mask");
  c_comp->add_option("--input", co.input, "Perspective PNG or video directory")->required();
  c_comp->add_option("--fov", co.fov, "Horizontal field of view (deg)")->capture_default_str();
  c_comp->add_option("--yaw", co.yaw, "Yaw (deg)")->capture_default_str();
  c_comp->add_option("--pitch", co.pitch, "Pitch (deg)")->capture_default_str();
  c_comp->add_option("--rows", co.rows, "ERP height")->check(CLI::Range(2, 1 << 16))->capture_default_str();
  c_comp->add_option("--cols", co.cols, "ERP width")->check(pos)->capture_default_str();
  c_comp->add_option("--fill", co.fill, "Unobserved fill")->check(CLI::IsMember({"constant", "gaussian"}))->capture_default_str();
  c_comp->add_option("--fill-value", co.fill_value, "Constant fill value or Gaussian mean")->capture_default_str();
  c_comp->add_option("--fill-scale", co.fill_scale, "Gaussian fill standard deviation")->check(nonneg)->capture_default_str();
  c_comp->add_option("--seed", co.seed, "Gaussian fill seed")->required();
  c_comp->add_option("--out", co.out, "Output directory")->capture_default_str();

  LossArgs lo;
  lo.out = default_out("loss");
  auto* c_loss = app.add_subcommand("loss", "Evaluate the geometry losses on depth, tracks and poses");
  c_loss->add_option("--pred-depth", lo.pred_depth, "Predicted depth (FDM1)")->required()->check(CLI::ExistingFile);
  c_loss->add_option("--gt-depth", lo.gt_depth, "Ground-truth depth (FDM1)")->required()->check(CLI::ExistingFile);
  c_loss->add_option("--tracks", lo.tracks, "Tracks JSON")->required()->check(CLI::ExistingFile);
  c_loss->add_option("--poses", lo.poses, "Poses JSON used to lift the prediction")->required()->check(CLI::ExistingFile);
  c_loss->add_option("--gt-poses", lo.gt_poses, "Poses JSON for the GT states (default: --poses)")->check(CLI::ExistingFile);
  c_loss->add_option("--sigma", lo.sigma, "Noise level (sampled from --seed when omitted)")->check(nonneg);
  c_loss->add_option("--seed", lo.seed, "Seed for sampling sigma");
  c_loss->add_option("--sigma-max", lo.sigma_max, "Confidence cutoff")->check(pos)->capture_default_str();
  c_loss->add_option("--iter", lo.iter, "Training iteration for the warm-up ramp")->capture_default_str();
  c_loss->add_option("--warmup", lo.warmup, "Warm-up iterations")->capture_default_str();
  c_loss->add_option("--l-visual", lo.l_visual, "Visual loss term to include in the total")->capture_default_str();
  c_loss->add_option("--lambda-d", lo.lambda_d, "Depth loss weight")->check(nonneg)->capture_default_str();
  c_loss->add_option("--lambda-tau", lo.lambda_tau, "Track loss weight")->check(nonneg)->capture_default_str();
  c_loss->add_option("--depth-stride", lo.depth_stride, "Frames per depth frame")->check(pos)->capture_default_str();
  c_loss->add_option("--out", lo.out, "Output directory")->capture_default_str();

  GradcheckArgs gc;
  gc.out = default_out("gradcheck");
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference check of the loss gradients on a random oracle clip");
  c_grad->add_option("--seed", gc.seed, "Clip and coordinate seed")->required();
  c_grad->add_option("--frames", gc.frames, "Frames")->check(CLI::Range(3, 1000))->capture_default_str();
  c_grad->add_option("--rows", gc.rows, "ERP height")->check(CLI::Range(4, 4096))->capture_default_str();
  c_grad->add_option("--cols", gc.cols, "ERP width")->check(CLI::Range(4, 8192))->capture_default_str();
  c_grad->add_option("--coords", gc.coords, "Coordinates checked per loss")->check(pos)->capture_default_str();
  c_grad->add_option("--tolerance", gc.tolerance, "Pass threshold")->check(pos)->capture_default_str();
  c_grad->add_option("--out", gc.out, "Output directory")->capture_default_str();

  EgoArgs eg;
  eg.out = default_out("egomotion");
  auto* c_ego = app.add_subcommand("egomotion", "Estimate per-frame camera poses from tracks and depth");
  c_ego->add_option("--tracks", eg.tracks, "Tracks JSON")->required()->check(CLI::ExistingFile);
  c_ego->add_option("--depth", eg.depth, "Depth (FDM1)")->required()->check(CLI::ExistingFile);
  c_ego->add_option("--seed", eg.seed, "RANSAC seed")->required();
  c_ego->add_option("--iterations", eg.iterations, "RANSAC iterations")->check(pos)->capture_default_str();
  c_ego->add_option("--min-inliers", eg.min_inliers, "Minimum inlier count")->check(pos)->capture_default_str();
  c_ego->add_option("--threshold", eg.threshold, "Absolute inlier threshold")->check(pos);
  c_ego->add_option("--relative-threshold", eg.relative_threshold, "Threshold relative to median depth")
      ->check(pos)
      ->capture_default_str();
  c_ego->add_option("--out", eg.out, "Output directory")->capture_default_str();

  EvalArgs ev;
  ev.out = default_out("eval");
  auto* c_eval = app.add_subcommand("eval", "Evaluate a manifest of prediction / ground-truth clip pairs");
  c_eval->add_option("--manifest", ev.manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--workers", ev.workers, "Parallel clips")->check(pos)->capture_default_str();
  c_eval->add_option("--t-eval", ev.t_eval, "Common frame count")->check(CLI::Range(3, 100000))->capture_default_str();
  c_eval->add_option("--fid-mode", ev.fid_mode, "FID samples")->check(CLI::IsMember({"per_frame", "clip_mean"}))->capture_default_str();
  c_eval->add_option("--max-clips", ev.max_clips, "Stop after this many newly evaluated clips");
  c_eval->add_option("--out", ev.out, "Output directory")->capture_default_str();

  LiftArgs li;
  li.out = default_out("lift");
  auto* c_lift = app.add_subcommand("lift", "Lift an ERP frame and its depth to a PLY point cloud");
  c_lift->add_option("--frames", li.frames, "ERP PNG or video directory")->required();
  c_lift->add_option("--depth", li.depth, "Depth (FDM1)")->required()->check(CLI::ExistingFile);
  c_lift->add_option("--poses", li.poses, "Poses JSON (default: identity)")->check(CLI::ExistingFile);
  c_lift->add_option("--index", li.index, "Frame index")->capture_default_str();
  c_lift->add_option("--stride", li.stride, "Pixel stride")->check(pos)->capture_default_str();
  c_lift->add_flag("--planar", li.planar, "Snap near-coplanar points onto fitted planes");
  c_lift->add_option("--eps", li.eps, "Snap distance (default 1% of the bounding-box diagonal)")->check(pos);
  c_lift->add_option("--k-planes", li.k_planes, "Maximum plane count")->capture_default_str();
  c_lift->add_option("--seed", li.seed, "Plane RANSAC seed")->required();
  c_lift->add_option("--out", li.out, "Output directory")->capture_default_str();

  RenderArgs re;
  re.out = default_out("render");
  auto* c_render = app.add_subcommand("render", "Render a PLY cloud along a camera path preset");
  c_render->add_option("--ply", re.ply, "Point cloud")->required()->check(CLI::ExistingFile);
  c_render->add_option("--poses", re.poses, "Poses JSON holding the anchor pose")->check(CLI::ExistingFile);
  c_render->add_option("--anchor", re.anchor, "Anchor pose index")->capture_default_str();
  c_render->add_option("--preset", re.preset, "Camera path")->check(CLI::IsMember({"orbit", "walk", "fly"}))->capture_default_str();
  c_render->add_option("--frames", re.frames, "Views")->check(pos)->capture_default_str();
  c_render->add_option("--radius", re.radius, "Orbit radius (m)")->check(pos)->capture_default_str();
  c_render->add_option("--step", re.step, "Walk/fly step per view (m)")->capture_default_str();
  c_render->add_option("--fov", re.fov, "Horizontal field of view (deg)")->capture_default_str();
  c_render->add_option("--width", re.width, "Width")->check(pos)->capture_default_str();
  c_render->add_option("--height", re.height, "Height")->check(pos)->capture_default_str();
  c_render->add_option("--splat-radius", re.splat, "Square splat radius (px)")->check(nonneg)->capture_default_str();
  c_render->add_option("--out", re.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*c_synth) return cmd_synth(sy, out);
    if (*c_crop) return cmd_crop(cr, out);
    if (*c_comp) return cmd_composite(co, out);
    if (*c_loss) return cmd_loss(lo, out);
    if (*c_grad) return cmd_gradcheck(gc, out);
    if (*c_ego) return cmd_egomotion(eg, out);
    if (*c_eval) return cmd_eval(ev, out);
    if (*c_lift) return cmd_lift(li, out);
    if (*c_render) return cmd_render(re, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return 2;
  }
  return 1;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv;
  argv.push_back("erpgeo");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace erpgeo::app
