#pragma once

#include <cmath>

#include "voxfuse/core/types.hpp"

namespace voxfuse {

/// Pinhole camera intrinsics, all values in pixels.
struct Intrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  bool valid() const {
    return fx > 0 && fy > 0 && cx > 0 && cx < width && cy > 0 && cy < height;
  }

  /// Intrinsics of the next pyramid level (half resolution, rounded up).
  /// A half-res pixel k covers full-res pixels 2k and 2k+1, so its centre
  /// sits at 2k + 0.5; the principal point shifts accordingly.
  Intrinsics half() const {
    Intrinsics h;
    h.fx = fx * 0.5;
    h.fy = fy * 0.5;
    h.cx = (cx - 0.5) * 0.5;
    h.cy = (cy - 0.5) * 0.5;
    h.width = (width + 1) / 2;
    h.height = (height + 1) / 2;
    return h;
  }
};

/// Perspective projection. Caller must ensure p.z() > 0.
inline Vec2d project(const Intrinsics& intr, const Vec3d& p) {
  return Vec2d(intr.fx * p.x() / p.z() + intr.cx, intr.fy * p.y() / p.z() + intr.cy);
}

/// Back-projection of a pixel at the given depth (z in metres). Caller must
/// ensure depth > 0; invalid pixels are skipped upstream.
inline Vec3d unproject(const Intrinsics& intr, const Vec2d& px, double depth) {
  return Vec3d((px.x() - intr.cx) / intr.fx * depth, (px.y() - intr.cy) / intr.fy * depth, depth);
}

}  // namespace voxfuse
