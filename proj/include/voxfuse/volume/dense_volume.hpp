#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "voxfuse/core/types.hpp"

namespace voxfuse {

/// Fixed-size dense voxel array. The offset places the lower corner of the
/// volume in voxel coordinates; the default puts the initial camera at the
/// centre of the rear face so that the view frustum overlaps the volume.
template <typename TVoxel>
class DenseVolume {
 public:
  using VoxelType = TVoxel;
  static constexpr bool is_dense = true;

  explicit DenseVolume(Vec3i size = Vec3i(512, 512, 512), Vec3i offset = Vec3i(-256, -256, 0))
      : size_(size),
        offset_(offset),
        voxels_(static_cast<std::size_t>(size.x()) * size.y() * size.z()) {}

  const Vec3i& size() const { return size_; }
  const Vec3i& offset() const { return offset_; }

  // The dense index behaves as a single block covering the whole volume.
  int block_count() const { return 1; }
  std::size_t voxels_per_block() const { return voxels_.size(); }

  /// Row-major linear offset of a voxel coordinate, or nullopt when outside
  /// [offset, offset + size). Misses are a normal outcome.
  std::optional<std::size_t> linear_index(const Vec3i& p) const {
    const Vec3i l = p - offset_;
    if (l.x() < 0 || l.y() < 0 || l.z() < 0 || l.x() >= size_.x() || l.y() >= size_.y() ||
        l.z() >= size_.z()) {
      return std::nullopt;
    }
    return static_cast<std::size_t>(l.x()) +
           static_cast<std::size_t>(l.y()) * size_.x() +
           static_cast<std::size_t>(l.z()) * size_.x() * size_.y();
  }

  std::pair<TVoxel, bool> read(const Vec3i& p) const {
    if (auto idx = linear_index(p)) return {voxels_[*idx], true};
    return {TVoxel{}, false};
  }

  TVoxel* voxel_ptr(const Vec3i& p) {
    if (auto idx = linear_index(p)) return &voxels_[*idx];
    return nullptr;
  }
  const TVoxel* voxel_ptr(const Vec3i& p) const {
    if (auto idx = linear_index(p)) return &voxels_[*idx];
    return nullptr;
  }

  std::vector<TVoxel>& voxels() { return voxels_; }
  const std::vector<TVoxel>& voxels() const { return voxels_; }

 private:
  Vec3i size_;
  Vec3i offset_;
  std::vector<TVoxel> voxels_;
};

}  // namespace voxfuse
