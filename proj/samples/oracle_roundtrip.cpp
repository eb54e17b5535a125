// Renders an oracle clip, crops a perspective view, pastes it back onto the
// sphere, lifts frame 0 to a point cloud and re-renders it.
//
//   oracle_roundtrip [out_dir]

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "erpgeo/io/clip.hpp"
#include "erpgeo/io/png.hpp"
#include "erpgeo/pointcloud.hpp"
#include "erpgeo/sphere.hpp"
#include "erpgeo/synth.hpp"

using namespace erpgeo;

int main(int argc, char** argv) try {
  const std::filesystem::path out = argc > 1 ? argv[1] : "oracle_roundtrip_out";
  io::SynthConfig cfg;
  cfg.scene = default_dynamic_scene(1);
  cfg.scene.frames = 4;
  cfg.scene.rows = 256;
  cfg.scene.cols = 512;
  const io::OracleClip clip = io::generate_clip(cfg, (out / "clip").string());
  std::printf("clip: %zu frames, %zu tracks\n", clip.poses.size(), clip.tracks.tracks.size());

  const Scene scene(cfg.scene);
  const RenderedFrame f = render_erp(scene, 0);
  const PerspectiveCamera cam{90.0, 0.6, 0.2, 256, 256};
  const Image persp = sample_perspective(f.rgb, cam);
  io::write_png((out / "crop.png").string(), persp);
  const Composite c = composite_to_erp(persp, cam, cfg.scene.rows, cfg.scene.cols);
  io::write_png((out / "composite.png").string(), c.erp);
  double err = 0.0;
  std::size_t n = 0;
  for (std::size_t h = 0; h < cfg.scene.rows; ++h)
    for (std::size_t w = 0; w < cfg.scene.cols; ++w) {
      if (!c.mask(0, h, w)) continue;
      for (std::size_t ch = 0; ch < 3; ++ch) err += std::abs(c.erp(h, w, ch) - f.rgb(h, w, ch));
      n += 3;
    }
  std::printf("crop -> composite: mean abs error %.5f over %zu masked samples\n", err / static_cast<double>(n), n);

  const PointCloud pc = lift_pointcloud(f.rgb, FrameView<double>{f.depth, cfg.scene.rows, cfg.scene.cols},
                                        scene.poses()[0]);
  export_ply(pc, (out / "cloud.ply").string());
  const SplatImage img = render_pointcloud(pc, {cam.intrinsics(), crop_pose(scene.poses()[0], cam)});
  double se = 0.0;
  for (std::size_t i = 0; i < persp.values.size(); ++i) se += std::pow(img.rgb.values[i] - persp.values[i], 2);
  io::write_png((out / "reprojected.png").string(), img.rgb);
  std::printf("lifted %zu points; reprojection PSNR %.2f dB\n", pc.size(),
              10.0 * std::log10(static_cast<double>(persp.values.size()) / se));
  std::printf("outputs in %s\n", out.string().c_str());
  return 0;
} catch (const std::exception& e) {
  std::fprintf(stderr, "error: %s\n", e.what());
  return 1;
}
