#pragma once

namespace voxfuse {

/// Reconstruction parameters shared by allocation, integration and raycasting.
struct SceneParams {
  float voxel_size = 0.004f;  ///< metres
  float mu = 0.02f;           ///< truncation band half-width, metres
  int max_weight = 100;       ///< observation count cap
  bool stop_integrating_at_max = false;

  float mu_voxels() const { return mu / voxel_size; }
};

}  // namespace voxfuse
