#pragma once

#include <cmath>

#include "voxfuse/core/image.hpp"
#include "voxfuse/core/intrinsics.hpp"
#include "voxfuse/core/parallel.hpp"
#include "voxfuse/core/pose.hpp"
#include "voxfuse/engine/allocation.hpp"
#include "voxfuse/engine/view.hpp"
#include "voxfuse/volume/dense_volume.hpp"
#include "voxfuse/volume/hash_volume.hpp"
#include "voxfuse/volume/scene_params.hpp"

namespace voxfuse {

/// Camera model in the single-precision form used by the per-voxel kernels.
struct CameraF {
  Mat3f r;
  Vec3f t;
  float fx, fy, cx, cy;
  int width, height;

  CameraF(const Pose& world_to_cam, const Intrinsics& intr)
      : r(world_to_cam.rotation().cast<float>()),
        t(world_to_cam.translation().cast<float>()),
        fx(static_cast<float>(intr.fx)),
        fy(static_cast<float>(intr.fy)),
        cx(static_cast<float>(intr.cx)),
        cy(static_cast<float>(intr.cy)),
        width(intr.width),
        height(intr.height) {}
};

/// Depth fusion for a single voxel. Rejections (behind the camera, outside
/// the one-pixel image border, missing depth) return -1 without touching the
/// voxel; a voxel more than mu behind the observed surface returns eta
/// unchanged. Otherwise min(1, eta/mu) is blended into the running average
/// and the observation count saturates at max_weight.
template <typename TVoxel>
inline float update_voxel_depth(TVoxel& voxel, const Vec3f& pt_model, const CameraF& cam,
                                float mu, int max_weight, const Image2D<float>& depth) {
  const Vec3f pt_camera = cam.r * pt_model + cam.t;
  if (pt_camera.z() <= 0) return -1;

  const float px = cam.fx * pt_camera.x() / pt_camera.z() + cam.cx;
  const float py = cam.fy * pt_camera.y() / pt_camera.z() + cam.cy;
  if (px < 1 || px > static_cast<float>(cam.width) - 2 || py < 1 ||
      py > static_cast<float>(cam.height) - 2) {
    return -1;
  }

  const float depth_measure =
      depth.pixels()[static_cast<std::size_t>(static_cast<int>(px + 0.5f)) +
                     static_cast<std::size_t>(static_cast<int>(py + 0.5f)) * cam.width];
  if (depth_measure <= 0.0f) return -1;

  const float eta = depth_measure - pt_camera.z();
  if (eta < -mu) return eta;

  const float old_f = TVoxel::sdf_to_float(voxel.sdf);
  const int old_w = voxel.w_depth;
  float new_f = std::min(1.0f, eta / mu);
  int new_w = 1;

  new_f = old_w * old_f + new_w * new_f;
  new_w = old_w + new_w;
  new_f /= new_w;
  new_w = std::min(new_w, max_weight);

  voxel.sdf = TVoxel::sdf_from_float(new_f);
  voxel.w_depth = static_cast<std::uint8_t>(new_w);
  return eta;
}

/// Colour accumulation against the RGB camera, with the same projection and
/// border gating as the depth update. The caller applies the |eta| <= mu band.
template <typename TVoxel>
inline void update_voxel_color(TVoxel& voxel, const Vec3f& pt_model, const CameraF& cam,
                               int max_weight, const Image2D<Vec3u8>& rgb) {
  const Vec3f pt_camera = cam.r * pt_model + cam.t;
  if (pt_camera.z() <= 0) return;

  const float px = cam.fx * pt_camera.x() / pt_camera.z() + cam.cx;
  const float py = cam.fy * pt_camera.y() / pt_camera.z() + cam.cy;
  if (px < 1 || px > static_cast<float>(cam.width) - 2 || py < 1 ||
      py > static_cast<float>(cam.height) - 2) {
    return;
  }

  const Vec3u8 sample = rgb.pixels()[static_cast<std::size_t>(static_cast<int>(px + 0.5f)) +
                                     static_cast<std::size_t>(static_cast<int>(py + 0.5f)) * cam.width];
  const int old_w = voxel.w_color;
  int new_w = std::min(old_w + 1, max_weight);
  Vec3f blended = (voxel.clr.template cast<float>() * static_cast<float>(old_w) +
                   sample.template cast<float>()) /
                  static_cast<float>(old_w + 1);
  voxel.clr = Vec3u8(static_cast<std::uint8_t>(blended.x()), static_cast<std::uint8_t>(blended.y()),
                     static_cast<std::uint8_t>(blended.z()));
  voxel.w_color = static_cast<std::uint8_t>(new_w);
}

namespace detail {

template <typename TVoxel>
inline void integrate_voxel(TVoxel& voxel, const Vec3f& pt_model, const CameraF& depth_cam,
                            const CameraF* rgb_cam, const SceneParams& params,
                            const Image2D<float>& depth, const Image2D<Vec3u8>* rgb) {
  if (params.stop_integrating_at_max && voxel.w_depth >= params.max_weight) return;
  const float eta = update_voxel_depth(voxel, pt_model, depth_cam, params.mu, params.max_weight, depth);
  if constexpr (TVoxel::has_color) {
    if (rgb_cam != nullptr && rgb != nullptr && std::fabs(eta) <= params.mu) {
      update_voxel_color(voxel, pt_model, *rgb_cam, params.max_weight, *rgb);
    }
  }
}

}  // namespace detail

/// Fuses one frame into the volume: every voxel of every visible block for
/// the hash backend. The voxel centre convention is
/// world = (8 * block + local + 0.5) * voxel_size.
template <typename TVoxel>
void integrate_frame(HashVolume<TVoxel>& volume, const std::vector<int>& visible_list,
                     const View& view, const Pose& world_to_cam, const SceneParams& params) {
  const CameraF depth_cam(world_to_cam, view.calib.depth);
  const bool with_color = TVoxel::has_color && view.has_rgb();
  const CameraF rgb_cam(view.calib.rgb_to_depth.inverse() * world_to_cam, view.calib.rgb);
  parallel_chunks(0, static_cast<std::int64_t>(visible_list.size()), 4,
                  [&](int, std::int64_t b, std::int64_t e) {
    for (std::int64_t li = b; li < e; ++li) {
      const HashEntry& entry = volume.entry(visible_list[static_cast<std::size_t>(li)]);
      if (entry.block_state < 0) continue;
      TVoxel* block = volume.block(entry.block_state);
      const Vec3f base = (to_int3(entry.pos) * kBlockSide).cast<float>();
      for (int z = 0; z < kBlockSide; ++z) {
        for (int y = 0; y < kBlockSide; ++y) {
          for (int x = 0; x < kBlockSide; ++x) {
            const Vec3f pt_model = (base + Vec3f(x + 0.5f, y + 0.5f, z + 0.5f)) * params.voxel_size;
            detail::integrate_voxel(block[x + y * kBlockSide + z * kBlockSide * kBlockSide],
                                    pt_model, depth_cam, with_color ? &rgb_cam : nullptr, params,
                                    view.depth, with_color ? &view.rgb : nullptr);
          }
        }
      }
    }
  });
}

/// Dense variant: the update runs over every voxel in the volume.
template <typename TVoxel>
void integrate_frame(DenseVolume<TVoxel>& volume, const std::vector<int>&, const View& view,
                     const Pose& world_to_cam, const SceneParams& params) {
  const CameraF depth_cam(world_to_cam, view.calib.depth);
  const bool with_color = TVoxel::has_color && view.has_rgb();
  const CameraF rgb_cam(view.calib.rgb_to_depth.inverse() * world_to_cam, view.calib.rgb);
  const Vec3i size = volume.size();
  const Vec3i offset = volume.offset();
  parallel_chunks(0, size.z(), 4, [&](int, std::int64_t z0, std::int64_t z1) {
    for (int z = static_cast<int>(z0); z < static_cast<int>(z1); ++z) {
      for (int y = 0; y < size.y(); ++y) {
        TVoxel* row = volume.voxels().data() +
                      static_cast<std::size_t>(z) * size.x() * size.y() +
                      static_cast<std::size_t>(y) * size.x();
        for (int x = 0; x < size.x(); ++x) {
          const Vec3f pt_model((offset.x() + x + 0.5f) * params.voxel_size,
                               (offset.y() + y + 0.5f) * params.voxel_size,
                               (offset.z() + z + 0.5f) * params.voxel_size);
          detail::integrate_voxel(row[x], pt_model, depth_cam, with_color ? &rgb_cam : nullptr,
                                  params, view.depth, with_color ? &view.rgb : nullptr);
        }
      }
    }
  });
}

}  // namespace voxfuse
