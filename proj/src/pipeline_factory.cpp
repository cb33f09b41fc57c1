#include "voxfuse/engine/pipeline.hpp"

#include "voxfuse/engine/pipeline_impl.hpp"

namespace voxfuse {
namespace {

template <typename TVoxel>
std::unique_ptr<IPipeline> make_for_backend(const EngineSettings& s, const Calibration& c) {
  if (s.backend == VolumeBackend::dense) {
    return std::make_unique<Pipeline<TVoxel, VolumeBackend::dense>>(s, c);
  }
  return std::make_unique<Pipeline<TVoxel, VolumeBackend::hash>>(s, c);
}

}  // namespace

std::unique_ptr<IPipeline> make_pipeline(const EngineSettings& settings, const Calibration& calib) {
  switch (settings.voxel_type) {
    case VoxelType::s_rgb:
      return make_for_backend<VoxelSRgb>(settings, calib);
    case VoxelType::f:
      return make_for_backend<VoxelF>(settings, calib);
    case VoxelType::f_rgb:
      return make_for_backend<VoxelFRgb>(settings, calib);
    case VoxelType::s:
    default:
      return make_for_backend<VoxelS>(settings, calib);
  }
}

}  // namespace voxfuse
