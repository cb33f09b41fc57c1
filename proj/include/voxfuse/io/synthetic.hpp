#pragma once

#include <vector>

#include "voxfuse/core/image.hpp"
#include "voxfuse/core/intrinsics.hpp"
#include "voxfuse/core/pose.hpp"

namespace voxfuse {

/// Analytic test scene made of spheres and infinite planes. Depth images
/// rendered from it are exact ray intersections, which makes it usable as a
/// ground-truth oracle for fusion, raycasting and tracking tests.
struct SceneSphere {
  Vec3d centre;
  double radius;
  Vec3f albedo = Vec3f(0.8f, 0.3f, 0.2f);
};

struct ScenePlane {
  Vec3d normal;    // unit
  double offset;   // plane: normal . x == offset
  Vec3f albedo = Vec3f(0.4f, 0.5f, 0.6f);
  bool checker = false;
  double checker_size = 0.25;
};

struct SyntheticScene {
  std::vector<SceneSphere> spheres;
  std::vector<ScenePlane> planes;
  bool empty() const { return spheres.empty() && planes.empty(); }
};

/// Per-pixel z-depth (metres) along the optical axis, 0 where no primitive is
/// hit inside (near, far).
Image2D<float> render_synthetic_depth(const SyntheticScene& scene, const Pose& world_to_cam,
                                      const Intrinsics& intr, double near_clip = 0.05,
                                      double far_clip = 100.0);

/// Simple Lambertian shading of the same intersections, for colour inputs.
Image2D<Vec3u8> render_synthetic_rgb(const SyntheticScene& scene, const Pose& world_to_cam,
                                     const Intrinsics& intr, double near_clip = 0.05,
                                     double far_clip = 100.0);

/// World-to-camera poses on a circular orbit in the x/z plane around
/// `target`, camera always looking at the target. Frame 0 sits at
/// target - (0, 0, distance).
std::vector<Pose> orbit_poses(const Vec3d& target, double distance, int frames,
                              double total_angle_rad);

}  // namespace voxfuse
