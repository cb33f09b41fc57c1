#pragma once

#include <memory>
#include <string>

#include "voxfuse/core/image.hpp"
#include "voxfuse/engine/swap.hpp"
#include "voxfuse/engine/tracking_state.hpp"
#include "voxfuse/engine/view.hpp"
#include "voxfuse/io/calibration.hpp"
#include "voxfuse/volume/hash_volume.hpp"
#include "voxfuse/volume/scene_params.hpp"
#include "voxfuse/voxel/voxel.hpp"

namespace voxfuse {

enum class VolumeBackend : std::uint8_t { dense, hash };

struct EngineSettings {
  VolumeBackend backend = VolumeBackend::hash;
  VoxelType voxel_type = VoxelType::s;
  bool use_swapping = false;  // forced off for the dense backend
  int swap_buffer_blocks = 100;
  std::string swap_store_path;  // empty: in-memory host store

  SceneParams scene;
  TrackerSettings tracker;
  HashConfig hash;
  Vec3i dense_size = Vec3i(512, 512, 512);
  Vec3i dense_offset = Vec3i(-256, -256, 0);

  float near_clip = 0.1f;
  float far_clip = 8.0f;
  int visibility_margin_px = 8;
  int swap_margin_px = 48;
  float max_depth = 8.0f;  // disparity conversion clamp

  FrustumClip frustum() const {
    return FrustumClip{near_clip, far_clip, visibility_margin_px, swap_margin_px};
  }
};

/// Per-frame report: deterministic counters plus wall-clock stage times.
/// The times are the only non-reproducible fields.
struct FrameStats {
  int frame = -1;
  bool tracking_ok = true;
  int tracking_iterations = 0;
  double tracking_cost = 0.0;
  int blocks_allocated = 0;
  int allocation_dropped = 0;
  int visible_blocks = 0;
  SwapMetrics swap;
  Pose pose;

  double ms_tracking = 0, ms_allocation = 0, ms_integration = 0, ms_swapping = 0, ms_raycast = 0;
  double ms_total = 0;
};

enum class DisplayMode : std::uint8_t { raycast, depth_colourized, rgb_passthrough };

/// Frame-by-frame reconstruction engine over one volume instance. Stages run
/// in a fixed order (tracking, allocation, integration, swapping,
/// raycasting); the raycast maps rendered at the end of frame N feed the
/// tracker of frame N+1.
class IPipeline {
 public:
  virtual ~IPipeline() = default;

  virtual FrameStats process_frame(const Image2D<Vec3u8>* rgb, const Image2D<float>& depth_m) = 0;
  virtual FrameStats process_raw_frame(const Image2D<Vec3u8>* rgb,
                                       const Image2D<std::uint16_t>& disparity) = 0;

  virtual Image2D<Vec3u8> get_image(DisplayMode mode) const = 0;

  virtual const TrackingState& tracking_state() const = 0;
  virtual const Pose& pose() const = 0;
  virtual int frame_count() const = 0;
  virtual const EngineSettings& settings() const = 0;

  /// FNV-1a hash over allocated block positions and voxel payloads, in a
  /// deterministic order. Two runs over the same input must agree.
  virtual std::uint64_t volume_digest() const = 0;
};

std::unique_ptr<IPipeline> make_pipeline(const EngineSettings& settings, const Calibration& calib);

}  // namespace voxfuse
