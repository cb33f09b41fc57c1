#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "voxfuse/core/image.hpp"
#include "voxfuse/core/intrinsics.hpp"
#include "voxfuse/core/parallel.hpp"
#include "voxfuse/core/pose.hpp"
#include "voxfuse/volume/dense_volume.hpp"
#include "voxfuse/volume/hash_volume.hpp"
#include "voxfuse/volume/scene_params.hpp"

namespace voxfuse {

// Per-entry visibility codes produced by the allocation stage.
inline constexpr std::uint8_t kVisNone = 0;
inline constexpr std::uint8_t kVisInView = 1;
inline constexpr std::uint8_t kVisInViewSwappedOut = 2;

/// Frame-lifetime scratch arrays, each sized to the hash entry count.
/// Allocation requests are written with plain stores; racing writers for the
/// same bucket are tolerated, the most recent write wins and the next frame
/// repairs the omission.
struct AllocationScratch {
  std::vector<std::uint8_t> request;
  std::vector<Vec3s> request_pos;
  std::vector<std::uint8_t> visibility;       // strict frustum codes
  std::vector<std::uint8_t> swap_visibility;  // enlarged margin, for swapping
  std::vector<int> visible_list;

  void reset(int entry_count) {
    request.assign(static_cast<std::size_t>(entry_count), 0);
    request_pos.assign(static_cast<std::size_t>(entry_count), Vec3s::Zero());
    visibility.assign(static_cast<std::size_t>(entry_count), kVisNone);
    swap_visibility.assign(static_cast<std::size_t>(entry_count), 0);
    visible_list.clear();
  }
};

struct AllocationStats {
  int requested = 0;
  int allocated = 0;
  int dropped_vba_full = 0;
  int dropped_excess_full = 0;
};

struct FrustumClip {
  float near_clip = 0.1f;
  float far_clip = 8.0f;
  int margin_px = 8;       // live visibility margin
  int swap_margin_px = 48; // enlarged margin used by the swap engine
};

namespace detail {

/// Exact traversal of the unit-grid cells crossed by segment [p0, p1]
/// (Amanatides & Woo). Coordinates are in cell units.
template <typename Visit>
void dda_cells(const Vec3d& p0, const Vec3d& p1, Visit&& visit) {
  Vec3i cell(static_cast<int>(std::floor(p0.x())), static_cast<int>(std::floor(p0.y())),
             static_cast<int>(std::floor(p0.z())));
  const Vec3i end_cell(static_cast<int>(std::floor(p1.x())), static_cast<int>(std::floor(p1.y())),
                       static_cast<int>(std::floor(p1.z())));
  visit(cell);
  const Vec3d d = p1 - p0;
  Vec3i step = Vec3i::Zero();
  Vec3d t_max, t_delta;
  for (int a = 0; a < 3; ++a) {
    if (d(a) > 0) {
      step(a) = 1;
      t_max(a) = (cell(a) + 1 - p0(a)) / d(a);
      t_delta(a) = 1.0 / d(a);
    } else if (d(a) < 0) {
      step(a) = -1;
      t_max(a) = (cell(a) - p0(a)) / d(a);
      t_delta(a) = -1.0 / d(a);
    } else {
      step(a) = 0;
      t_max(a) = std::numeric_limits<double>::infinity();
      t_delta(a) = std::numeric_limits<double>::infinity();
    }
  }
  const int max_steps =
      (end_cell - cell).cwiseAbs().sum() + 3;  // guards against FP edge cases
  for (int i = 0; i < max_steps && cell != end_cell; ++i) {
    int axis = 0;
    if (t_max.y() < t_max(axis)) axis = 1;
    if (t_max.z() < t_max(axis)) axis = 2;
    if (t_max(axis) > 1.0) break;
    cell(axis) += step(axis);
    t_max(axis) += t_delta(axis);
    visit(cell);
  }
}

/// Conservative screen test for one voxel block: the 2D bounding box of the
/// projected corners, expanded by margin, must intersect the image and the
/// depth range must overlap (near, far).
inline bool block_projects_into_view(const Vec3i& block_pos, const Pose& world_to_cam,
                                     const Intrinsics& intr, float voxel_size, float near_clip,
                                     float far_clip, int margin_px) {
  double zmin = std::numeric_limits<double>::infinity();
  double zmax = -std::numeric_limits<double>::infinity();
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  bool any_behind = false;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3d world((block_pos.x() * kBlockSide + ((corner & 1) ? kBlockSide : 0)) * voxel_size,
                      (block_pos.y() * kBlockSide + ((corner & 2) ? kBlockSide : 0)) * voxel_size,
                      (block_pos.z() * kBlockSide + ((corner & 4) ? kBlockSide : 0)) * voxel_size);
    const Vec3d cam = world_to_cam.apply(world);
    zmin = std::min(zmin, cam.z());
    zmax = std::max(zmax, cam.z());
    if (cam.z() <= 1e-6) {
      any_behind = true;
      continue;
    }
    const Vec2d px = project(intr, cam);
    xmin = std::min(xmin, px.x());
    xmax = std::max(xmax, px.x());
    ymin = std::min(ymin, px.y());
    ymax = std::max(ymax, px.y());
  }
  if (zmax <= near_clip || zmin >= far_clip) return false;
  if (any_behind) return true;  // straddles the camera plane; keep conservatively
  return xmax >= -margin_px && xmin <= intr.width - 1 + margin_px && ymax >= -margin_px &&
         ymin <= intr.height - 1 + margin_px;
}

}  // namespace detail

/// Marks all voxel blocks intersected by the per-pixel segments from depth
/// d - mu to d + mu: found blocks become visible, missing ones produce an
/// allocation request at their bucket slot.
template <typename TVoxel>
void mark_blocks(const Image2D<float>& depth, const Pose& world_to_cam, const Intrinsics& intr,
                 const SceneParams& params, HashVolume<TVoxel>& volume, AllocationScratch& scratch) {
  const Pose cam_to_world = world_to_cam.inverse();
  const double inv_block = 1.0 / (params.voxel_size * kBlockSide);
  const int bucket_size = volume.config().bucket_size;
  auto process_pixel = [&](int x, int y) {
    const float d = depth.at(x, y);
    if (d <= 0.0f) return;
    const Vec3d dir_cam((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
    const Vec3d p0 = cam_to_world.apply(Vec3d(dir_cam * std::max(0.001, double(d) - params.mu))) * inv_block;
    const Vec3d p1 = cam_to_world.apply(Vec3d(dir_cam * (double(d) + params.mu))) * inv_block;
    detail::dda_cells(p0, p1, [&](const Vec3i& block_pos) {
      const int idx = volume.find_entry(block_pos);
      if (idx >= 0) {
        scratch.visibility[static_cast<std::size_t>(idx)] =
            volume.entry(idx).block_state >= 0 ? kVisInView : kVisInViewSwappedOut;
      } else {
        const std::size_t slot =
            static_cast<std::size_t>(hash_block_pos(block_pos, volume.config().hash_mask())) *
            bucket_size;
        scratch.request_pos[slot] = to_short3(block_pos);
        scratch.request[slot] = 1;
      }
    });
  };
  parallel_chunks(0, depth.height(), 8, [&](int, std::int64_t y0, std::int64_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      for (int x = 0; x < depth.width(); ++x) process_pixel(x, y);
    }
  });
}

template <typename TVoxel>
void mark_blocks(const Image2D<float>&, const Pose&, const Intrinsics&, const SceneParams&,
                 DenseVolume<TVoxel>&, AllocationScratch&) {
  // Dense volumes are fully allocated up front; nothing to do.
}

/// Inserts every requested block. Runs after mark_blocks; requests are
/// consumed and newly allocated entries become visible. Exhaustion of either
/// free list is reported, not silently dropped.
template <typename TVoxel>
AllocationStats perform_allocations(AllocationScratch& scratch, HashVolume<TVoxel>& volume) {
  AllocationStats stats;
  const int n = volume.entry_count();
  for (int i = 0; i < n; ++i) {
    if (!scratch.request[static_cast<std::size_t>(i)]) continue;
    scratch.request[static_cast<std::size_t>(i)] = 0;
    ++stats.requested;
    const InsertOutcome out = volume.insert_block(to_int3(scratch.request_pos[static_cast<std::size_t>(i)]));
    switch (out.status) {
      case InsertStatus::inserted:
        ++stats.allocated;
        scratch.visibility[static_cast<std::size_t>(out.entry_index)] = kVisInView;
        break;
      case InsertStatus::existing:
      case InsertStatus::reattached:
        scratch.visibility[static_cast<std::size_t>(out.entry_index)] = kVisInView;
        break;
      case InsertStatus::vba_full:
        ++stats.dropped_vba_full;
        break;
      case InsertStatus::excess_full:
        ++stats.dropped_excess_full;
        break;
    }
  }
  return stats;
}

template <typename TVoxel>
AllocationStats perform_allocations(AllocationScratch&, DenseVolume<TVoxel>&) {
  return {};
}

/// Rebuilds the compacted list of live blocks: allocated entries whose block
/// projects inside the view frustum, in ascending entry order. Also fills the
/// enlarged-margin visibility used by the swap engine.
template <typename TVoxel>
void build_visible_list(const HashVolume<TVoxel>& volume, const Pose& world_to_cam,
                        const Intrinsics& intr, const SceneParams& params, const FrustumClip& clip,
                        AllocationScratch& scratch) {
  const int n = volume.entry_count();
  parallel_chunks(0, n, 4096, [&](int, std::int64_t b, std::int64_t e) {
    for (int i = static_cast<int>(b); i < static_cast<int>(e); ++i) {
      const HashEntry& entry = volume.entry(i);
      if (entry.block_state < kEntrySwappedOut) continue;
      const Vec3i block_pos = to_int3(entry.pos);
      const bool in_view =
          detail::block_projects_into_view(block_pos, world_to_cam, intr, params.voxel_size,
                                           clip.near_clip, clip.far_clip, clip.margin_px);
      const bool in_margin =
          in_view || detail::block_projects_into_view(block_pos, world_to_cam, intr,
                                                      params.voxel_size, clip.near_clip,
                                                      clip.far_clip, clip.swap_margin_px);
      scratch.swap_visibility[static_cast<std::size_t>(i)] = in_margin ? 1 : 0;
      if (in_view) {
        scratch.visibility[static_cast<std::size_t>(i)] =
            entry.block_state >= 0 ? kVisInView : kVisInViewSwappedOut;
      } else {
        scratch.visibility[static_cast<std::size_t>(i)] = kVisNone;
      }
    }
  });
  scratch.visible_list.clear();
  for (int i = 0; i < n; ++i) {
    if (scratch.visibility[static_cast<std::size_t>(i)] == kVisInView) {
      scratch.visible_list.push_back(i);
    }
  }
}

template <typename TVoxel>
void build_visible_list(const DenseVolume<TVoxel>&, const Pose&, const Intrinsics&,
                        const SceneParams&, const FrustumClip&, AllocationScratch& scratch) {
  scratch.visible_list.clear();
}

}  // namespace voxfuse
