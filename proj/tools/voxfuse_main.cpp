#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <regex>
#include <string>

#include "voxfuse/engine/pipeline.hpp"
#include "voxfuse/io/pnm.hpp"
#include "voxfuse/io/sequence.hpp"
#include "voxfuse/io/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliConfig {
  std::string calib_path;
  std::string frames_dir;  // empty: synthetic demo scene
  std::string output_dir = "out";
  std::string backend = "hash";
  std::string swap = "off";
  std::string tracker = "icp";
  double voxel_size_mm = 4.0;
  double mu_mm = 20.0;
  int swap_buffer = 100;
  std::string frame_range;  // "a..b"
  int render_stride = 10;
  bool strict = false;
};

voxfuse::EngineSettings make_settings(const CliConfig& cfg) {
  voxfuse::EngineSettings s;
  s.backend = cfg.backend == "dense" ? voxfuse::VolumeBackend::dense : voxfuse::VolumeBackend::hash;
  s.use_swapping = cfg.swap == "on" && s.backend == voxfuse::VolumeBackend::hash;
  s.swap_buffer_blocks = cfg.swap_buffer;
  // Settings arrive in millimetres; everything internal runs in metres.
  s.scene.voxel_size = static_cast<float>(cfg.voxel_size_mm / 1000.0);
  s.scene.mu = static_cast<float>(cfg.mu_mm / 1000.0);
  if (cfg.tracker == "color") {
    s.tracker.type = voxfuse::TrackerType::color;
    s.voxel_type = voxfuse::VoxelType::s_rgb;  // colour tracking needs stored colour
  } else if (cfg.tracker == "icp+ren") {
    s.tracker.type = voxfuse::TrackerType::icp_ren;
  } else {
    s.tracker.type = voxfuse::TrackerType::icp;
  }
  return s;
}

json stats_record(const voxfuse::FrameStats& st) {
  json rec;
  rec["frame"] = st.frame;
  rec["tracking_ok"] = st.tracking_ok;
  rec["tracking_iterations"] = st.tracking_iterations;
  rec["allocated"] = st.blocks_allocated;
  rec["dropped"] = st.allocation_dropped;
  rec["visible"] = st.visible_blocks;
  rec["swapped_in"] = st.swap.swapped_in;
  rec["swapped_out"] = st.swap.swapped_out;
  std::vector<double> pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pose.push_back(st.pose.rotation()(r, c));
  }
  for (int r = 0; r < 3; ++r) pose.push_back(st.pose.translation()(r));
  rec["pose"] = pose;
  return rec;
}

std::string render_name(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "render_%04d.ppm", frame);
  return buf;
}

int run(const CliConfig& cfg) {
  voxfuse::Calibration calib;
  try {
    calib = voxfuse::load_calibration(cfg.calib_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  voxfuse::EngineSettings settings = make_settings(cfg);

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << cfg.output_dir << "\n";
    return 1;
  }
  if (settings.use_swapping) {
    settings.swap_store_path = (fs::path(cfg.output_dir) / "host_cache.vxbs").string();
  }

  std::unique_ptr<voxfuse::IPipeline> pipeline;
  try {
    pipeline = voxfuse::make_pipeline(settings, calib);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  int range_lo = 0, range_hi = std::numeric_limits<int>::max();
  if (!cfg.frame_range.empty()) {
    std::smatch m;
    if (!std::regex_match(cfg.frame_range, m, std::regex(R"((\d+)\.\.(\d+))"))) {
      std::cerr << "error: --frames expects a..b\n";
      return 1;
    }
    range_lo = std::stoi(m[1].str());
    range_hi = std::stoi(m[2].str());
  }

  std::ofstream stats(fs::path(cfg.output_dir) / "stats.jsonl");
  std::ofstream timings(fs::path(cfg.output_dir) / "timings.txt");
  int processed = 0, tracked_ok = 0, rendered = 0;
  const auto wall0 = std::chrono::steady_clock::now();

  auto finish_frame = [&](const voxfuse::FrameStats& st, int seq_pos) {
    stats << stats_record(st).dump() << "\n";
    timings << "frame " << st.frame << " total_ms " << st.ms_total << " track_ms " << st.ms_tracking
            << " alloc_ms " << st.ms_allocation << " integrate_ms " << st.ms_integration
            << " swap_ms " << st.ms_swapping << " raycast_ms " << st.ms_raycast << "\n";
    ++processed;
    if (st.tracking_ok) ++tracked_ok;
    if (cfg.render_stride > 0 && seq_pos % cfg.render_stride == 0) {
      const auto img = pipeline->get_image(voxfuse::DisplayMode::raycast);
      if (!img.empty()) {
        voxfuse::save_ppm((fs::path(cfg.output_dir) / render_name(st.frame)).string(), img);
        ++rendered;
      }
    }
  };

  if (cfg.frames_dir.empty()) {
    // Offline fallback: a textured sphere and two pebbles resting on a
    // checkered ground plane, observed on a 60-frame orbit. The pebbles
    // break the rotational symmetry that would otherwise leave the orbit
    // motion unobservable to the depth tracker.
    voxfuse::SyntheticScene scene;
    scene.spheres.push_back({voxfuse::Vec3d(0.0, 0.05, 1.2), 0.3, voxfuse::Vec3f(0.85f, 0.35f, 0.2f)});
    scene.spheres.push_back({voxfuse::Vec3d(-0.28, 0.22, 0.95), 0.13, voxfuse::Vec3f(0.2f, 0.6f, 0.3f)});
    scene.spheres.push_back({voxfuse::Vec3d(0.3, 0.15, 1.45), 0.2, voxfuse::Vec3f(0.9f, 0.8f, 0.25f)});
    scene.planes.push_back({voxfuse::Vec3d(0, -1, 0), -0.35, voxfuse::Vec3f(0.4f, 0.5f, 0.65f), true, 0.2});
    const auto poses = voxfuse::orbit_poses(voxfuse::Vec3d(0.0, 0.0, 1.2), 1.2, 60, 2.0 * M_PI);
    for (int i = 0; i < static_cast<int>(poses.size()); ++i) {
      if (i < range_lo || i > range_hi) continue;
      const auto depth = voxfuse::render_synthetic_depth(
          scene, poses[static_cast<std::size_t>(i)], calib.depth, 0.05, 3.5);
      const auto rgb = voxfuse::render_synthetic_rgb(scene, poses[static_cast<std::size_t>(i)],
                                                     calib.rgb, 0.05, 3.5);
      finish_frame(pipeline->process_frame(&rgb, depth), i);
    }
  } else {
    voxfuse::SequenceScan scan;
    try {
      scan = voxfuse::scan_sequence_dir(cfg.frames_dir);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
    if (scan.rgb_only > 0 || scan.disparity_only > 0) {
      std::cerr << "warning: unpaired frames in " << cfg.frames_dir << " (" << scan.rgb_only
                << " rgb-only, " << scan.disparity_only << " disparity-only)\n";
    }
    if (scan.frames.empty()) {
      std::cerr << "error: no frames found in " << cfg.frames_dir << "\n";
      return 1;
    }
    int seq_pos = 0;
    for (const auto& frame : scan.frames) {
      if (frame.index < range_lo || frame.index > range_hi) continue;
      std::optional<voxfuse::Image2D<voxfuse::Vec3u8>> rgb;
      voxfuse::Image2D<std::uint16_t> disparity;
      try {
        disparity = voxfuse::load_pgm16(frame.disparity_path);
        if (!frame.rgb_path.empty()) rgb = voxfuse::load_ppm(frame.rgb_path);
      } catch (const std::exception& e) {
        if (cfg.strict) {
          std::cerr << "error: frame " << frame.index << ": " << e.what() << "\n";
          return 1;
        }
        std::cerr << "warning: skipping frame " << frame.index << ": " << e.what() << "\n";
        continue;
      }
      finish_frame(pipeline->process_raw_frame(rgb ? &*rgb : nullptr, disparity), seq_pos++);
    }
  }

  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  std::cout << "processed " << processed << " frames (" << tracked_ok
            << " tracked ok), wrote " << rendered << " renders to " << cfg.output_dir << " in "
            << wall_s << " s\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxfuse: offline TSDF fusion over recorded RGB-D sequences"};
  CliConfig cfg;
  app.add_option("calib", cfg.calib_path, "calibration file")->required();
  app.add_option("frames_dir", cfg.frames_dir,
                 "directory of numbered PPM/PGM frame pairs (omit for the synthetic demo)");
  app.add_option("--output", cfg.output_dir, "output directory");
  app.add_option("--backend", cfg.backend, "volume backend")
      ->check(CLI::IsMember({"dense", "hash"}));
  app.add_option("--swap", cfg.swap, "page voxel blocks to the host store")
      ->check(CLI::IsMember({"on", "off"}));
  app.add_option("--tracker", cfg.tracker, "camera tracker")
      ->check(CLI::IsMember({"icp", "color", "icp+ren"}));
  app.add_option("--voxel-size", cfg.voxel_size_mm, "voxel size in millimetres");
  app.add_option("--mu", cfg.mu_mm, "truncation band in millimetres");
  app.add_option("--swap-buffer", cfg.swap_buffer, "max block transfers per frame per direction");
  app.add_option("--frames", cfg.frame_range, "frame index range a..b");
  app.add_option("--render-stride", cfg.render_stride, "write a render every N frames (0: never)");
  app.add_flag("--strict", cfg.strict, "abort on missing or corrupt frames");
  CLI11_PARSE(app, argc, argv);
  return run(cfg);
}
