#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>

#include "voxfuse/engine/color_tracker.hpp"
#include "voxfuse/engine/depth_tracker.hpp"
#include "voxfuse/engine/integration.hpp"
#include "voxfuse/engine/pipeline.hpp"
#include "voxfuse/engine/pyramid.hpp"
#include "voxfuse/engine/raycast.hpp"
#include "voxfuse/engine/ren_tracker.hpp"
#include "voxfuse/volume/dense_volume.hpp"

namespace voxfuse {

namespace detail {
inline double ms_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}
}  // namespace detail

template <typename TVoxel, VolumeBackend kBackend>
class Pipeline final : public IPipeline {
  static constexpr bool kIsHash = kBackend == VolumeBackend::hash;
  using Volume = std::conditional_t<kIsHash, HashVolume<TVoxel>, DenseVolume<TVoxel>>;

 public:
  Pipeline(const EngineSettings& settings, const Calibration& calib)
      : settings_(settings), calib_(calib), volume_(make_volume(settings)) {
    if constexpr (kIsHash) {
      scratch_.reset(volume_.entry_count());
      if (settings_.use_swapping) {
        const int payload = VoxelCodec<TVoxel>::bytes * kBlockVolume;
        auto store = settings_.swap_store_path.empty()
                         ? make_memory_block_store(volume_.entry_count(), payload)
                         : make_file_block_store(settings_.swap_store_path, volume_.entry_count(),
                                                 payload,
                                                 static_cast<std::uint16_t>(VoxelCodec<TVoxel>::tag));
        cache_.emplace(volume_.entry_count(), settings_.swap_buffer_blocks, std::move(store));
      }
    } else {
      settings_.use_swapping = false;  // dense volumes are never paged
    }
    if (settings_.tracker.type == TrackerType::color && !TVoxel::has_color) {
      throw std::invalid_argument("colour tracker requires a voxel type with colour information");
    }
  }

  FrameStats process_raw_frame(const Image2D<Vec3u8>* rgb,
                               const Image2D<std::uint16_t>& disparity) override {
    return process_frame(rgb, disparity_image_to_depth(disparity, calib_, settings_.max_depth));
  }

  FrameStats process_frame(const Image2D<Vec3u8>* rgb, const Image2D<float>& depth_m) override {
    const auto t_start = std::chrono::steady_clock::now();
    FrameStats stats;
    stats.frame = frame_;

    View view;
    view.calib = calib_;
    view.depth = depth_m;
    if (rgb != nullptr) view.rgb = *rgb;
    last_view_ = view;

    // Tracking against the maps raycast at the end of the previous frame.
    auto t0 = std::chrono::steady_clock::now();
    if (frame_ > 0) {
      const TrackingResult tracked = track(view);
      stats.tracking_ok = tracked.ok;
      stats.tracking_iterations = tracked.iterations;
      stats.tracking_cost = tracked.final_cost;
      if (tracked.ok) state_.pose = tracked.pose;
      // On failure the previous pose is held and integration proceeds.
    }
    stats.ms_tracking = detail::ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    if constexpr (kIsHash) {
      mark_blocks(view.depth, state_.pose, calib_.depth, settings_.scene, volume_, scratch_);
      const AllocationStats alloc = perform_allocations(scratch_, volume_);
      stats.blocks_allocated = alloc.allocated;
      stats.allocation_dropped = alloc.dropped_vba_full + alloc.dropped_excess_full;
      build_visible_list(volume_, state_.pose, calib_.depth, settings_.scene, settings_.frustum(),
                         scratch_);
      stats.visible_blocks = static_cast<int>(scratch_.visible_list.size());
    }
    stats.ms_allocation = detail::ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    integrate_frame(volume_, scratch_.visible_list, view, state_.pose, settings_.scene);
    stats.ms_integration = detail::ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    if constexpr (kIsHash) {
      if (cache_) {
        request_swap_ins(volume_, scratch_, *cache_);
        stats.swap.accumulate(execute_swap_in(volume_, *cache_, settings_.scene));
        request_swap_outs(volume_, scratch_, *cache_);
        stats.swap.accumulate(execute_swap_out(volume_, *cache_));
      }
    }
    stats.ms_swapping = detail::ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    raycast_for_next_frame();
    stats.ms_raycast = detail::ms_since(t0);

    stats.pose = state_.pose;
    stats.ms_total = detail::ms_since(t_start);
    ++frame_;
    return stats;
  }

  Image2D<Vec3u8> get_image(DisplayMode mode) const override {
    switch (mode) {
      case DisplayMode::rgb_passthrough:
        return last_view_ ? last_view_->rgb : Image2D<Vec3u8>();
      case DisplayMode::depth_colourized:
        return last_view_ ? colourize_depth(last_view_->depth) : Image2D<Vec3u8>();
      case DisplayMode::raycast:
      default:
        if (!state_.maps_valid) return Image2D<Vec3u8>();
        return render_image(volume_, state_.points, state_.normals, state_.pose, settings_.scene,
                            TVoxel::has_color ? RenderMode::color : RenderMode::shaded_grey);
    }
  }

  const TrackingState& tracking_state() const override { return state_; }
  const Pose& pose() const override { return state_.pose; }
  int frame_count() const override { return frame_; }
  const EngineSettings& settings() const override { return settings_; }

  std::uint64_t volume_digest() const override {
    std::uint64_t h = 1469598103934665603ull;
    if constexpr (kIsHash) {
      volume_.for_each_allocated_entry([&](int, const HashEntry& e) {
        h = detail::fnv1a(h, e.pos.data(), sizeof(std::int16_t) * 3);
        const TVoxel* block = volume_.block(e.block_state);
        std::uint8_t buf[VoxelCodec<TVoxel>::bytes];
        for (int v = 0; v < kBlockVolume; ++v) {
          VoxelCodec<TVoxel>::encode(block[v], buf);
          h = detail::fnv1a(h, buf, sizeof(buf));
        }
      });
    } else {
      std::uint8_t buf[VoxelCodec<TVoxel>::bytes];
      for (const TVoxel& v : volume_.voxels()) {
        VoxelCodec<TVoxel>::encode(v, buf);
        h = detail::fnv1a(h, buf, sizeof(buf));
      }
    }
    return h;
  }

  Volume& volume() { return volume_; }
  const Volume& volume() const { return volume_; }
  GlobalCache<TVoxel>* cache() { return cache_ ? &*cache_ : nullptr; }
  const AllocationScratch& scratch() const { return scratch_; }

 private:
  static Volume make_volume(const EngineSettings& s) {
    if constexpr (kIsHash) {
      return Volume(s.hash);
    } else {
      return Volume(s.dense_size, s.dense_offset);
    }
  }

  TrackingResult track(const View& view) {
    const TrackerSettings& ts = settings_.tracker;
    switch (ts.type) {
      case TrackerType::color: {
        if (!view.has_rgb() || state_.surface_points.empty()) return {state_.pose, false, 0, 0.0, 0};
        const ColorPyramid pyr =
            build_color_pyramid(view.rgb, calib_.rgb, ts.hierarchy_levels);
        return color_track(state_.surface_points, state_.surface_colors, pyr, state_.pose, ts);
      }
      case TrackerType::icp_ren: {
        const DepthPyramid pyr = build_depth_pyramid(view.depth, calib_.depth, ts.hierarchy_levels);
        // Depth tracker on the coarse hierarchy, SDF refinement at full
        // resolution.
        DepthPyramid coarse;
        coarse.depth.assign(pyr.depth.begin() + 1, pyr.depth.end());
        coarse.intrinsics.assign(pyr.intrinsics.begin() + 1, pyr.intrinsics.end());
        TrackingResult icp = icp_track(coarse, state_, ts);
        const Pose init = icp.ok ? icp.pose : state_.pose;
        TrackingResult ren = ren_refine(view.depth, calib_.depth, volume_, settings_.scene, init, ts);
        if (!ren.ok) return icp;
        ren.iterations += icp.iterations;
        return ren;
      }
      case TrackerType::icp:
      default: {
        const DepthPyramid pyr = build_depth_pyramid(view.depth, calib_.depth, ts.hierarchy_levels);
        return icp_track(pyr, state_, ts);
      }
    }
  }

  void raycast_for_next_frame() {
    const RangeImage range =
        create_expected_depths(volume_, scratch_.visible_list, state_.pose, calib_.depth,
                               settings_.scene, settings_.near_clip, settings_.far_clip);
    render_maps(volume_, range, state_.pose, calib_.depth, settings_.scene, state_.points,
                state_.normals);
    state_.maps_valid = true;
    if constexpr (TVoxel::has_color) {
      forward_project_points(volume_, state_.points, settings_.scene, 4, state_.surface_points,
                             state_.surface_colors);
    }
  }

  static Image2D<Vec3u8> colourize_depth(const Image2D<float>& depth) {
    float dmax = 0.0f;
    for (float d : depth.pixels()) dmax = std::max(dmax, d);
    Image2D<Vec3u8> out(depth.width(), depth.height(), Vec3u8::Zero());
    if (dmax <= 0.0f) return out;
    for (std::size_t i = 0; i < depth.size(); ++i) {
      const float d = depth.pixels()[i];
      if (d <= 0.0f) continue;
      const float t = d / dmax;
      out.pixels()[i] = Vec3u8(static_cast<std::uint8_t>(255 * (1.0f - t)),
                               static_cast<std::uint8_t>(255 * (1.0f - std::abs(2 * t - 1))),
                               static_cast<std::uint8_t>(255 * t));
    }
    return out;
  }

  EngineSettings settings_;
  Calibration calib_;
  Volume volume_;
  AllocationScratch scratch_;
  std::optional<GlobalCache<TVoxel>> cache_;
  TrackingState state_;
  std::optional<View> last_view_;
  int frame_ = 0;
};

}  // namespace voxfuse
