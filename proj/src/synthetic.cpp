#include "voxfuse/io/synthetic.hpp"

#include <cmath>
#include <limits>

namespace voxfuse {
namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3d point = Vec3d::Zero();
  Vec3d normal = Vec3d::Zero();
  Vec3f albedo = Vec3f::Zero();
  bool valid() const { return std::isfinite(t); }
};

// Ray r(t) = origin + t * dir; dir has unit z in camera space so t is the
// z-depth of the hit.
Hit trace(const SyntheticScene& scene, const Vec3d& origin, const Vec3d& dir, double near_clip,
          double far_clip) {
  Hit best;
  for (const auto& s : scene.spheres) {
    const Vec3d oc = origin - s.centre;
    const double a = dir.squaredNorm();
    const double b = 2.0 * oc.dot(dir);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - 4 * a * c;
    if (disc < 0) continue;
    const double sq = std::sqrt(disc);
    for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
      if (t > near_clip && t < far_clip && t < best.t) {
        best.t = t;
        best.point = origin + t * dir;
        best.normal = (best.point - s.centre).normalized();
        best.albedo = s.albedo;
      }
    }
  }
  for (const auto& p : scene.planes) {
    const double denom = p.normal.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double t = (p.offset - p.normal.dot(origin)) / denom;
    if (t > near_clip && t < far_clip && t < best.t) {
      best.t = t;
      best.point = origin + t * dir;
      best.normal = denom < 0 ? p.normal : -p.normal;
      Vec3f albedo = p.albedo;
      if (p.checker) {
        // Checker in the two world axes least aligned with the normal.
        Vec3d n = p.normal.cwiseAbs();
        int drop = 0;
        if (n.y() > n(drop)) drop = 1;
        if (n.z() > n(drop)) drop = 2;
        double u = 0, v = 0;
        int k = 0;
        for (int axis = 0; axis < 3; ++axis) {
          if (axis == drop) continue;
          (k++ == 0 ? u : v) = best.point(axis);
        }
        const long pu = static_cast<long>(std::floor(u / p.checker_size));
        const long pv = static_cast<long>(std::floor(v / p.checker_size));
        if (((pu + pv) & 1) != 0) albedo *= 0.35f;
      }
      best.albedo = albedo;
    }
  }
  return best;
}

}  // namespace

Image2D<float> render_synthetic_depth(const SyntheticScene& scene, const Pose& world_to_cam,
                                      const Intrinsics& intr, double near_clip, double far_clip) {
  Image2D<float> depth(intr.width, intr.height, 0.0f);
  const Pose cam_to_world = world_to_cam.inverse();
  const Vec3d origin = cam_to_world.translation();
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const Vec3d dir_cam((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
      const Vec3d dir = cam_to_world.rotation() * dir_cam;
      const Hit hit = trace(scene, origin, dir, near_clip, far_clip);
      if (hit.valid()) depth.at(x, y) = static_cast<float>(hit.t);
    }
  }
  return depth;
}

Image2D<Vec3u8> render_synthetic_rgb(const SyntheticScene& scene, const Pose& world_to_cam,
                                     const Intrinsics& intr, double near_clip, double far_clip) {
  Image2D<Vec3u8> rgb(intr.width, intr.height, Vec3u8::Zero());
  const Pose cam_to_world = world_to_cam.inverse();
  const Vec3d origin = cam_to_world.translation();
  const Vec3d light = Vec3d(0.3, -0.7, -0.5).normalized();
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const Vec3d dir_cam((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
      const Vec3d dir = cam_to_world.rotation() * dir_cam;
      const Hit hit = trace(scene, origin, dir, near_clip, far_clip);
      if (!hit.valid()) continue;
      const float shade = 0.3f + 0.7f * static_cast<float>(std::max(0.0, hit.normal.dot(-light)));
      const Vec3f c = hit.albedo * shade * 255.0f;
      rgb.at(x, y) = Vec3u8(static_cast<std::uint8_t>(std::min(c.x(), 255.f)),
                            static_cast<std::uint8_t>(std::min(c.y(), 255.f)),
                            static_cast<std::uint8_t>(std::min(c.z(), 255.f)));
    }
  }
  return rgb;
}

std::vector<Pose> orbit_poses(const Vec3d& target, double distance, int frames,
                              double total_angle_rad) {
  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(frames));
  for (int i = 0; i < frames; ++i) {
    const double a = frames > 1 ? total_angle_rad * i / frames : 0.0;
    const Vec3d eye = target + Vec3d(distance * std::sin(a), 0.0, -distance * std::cos(a));
    poses.push_back(look_at(eye, target));
  }
  return poses;
}

}  // namespace voxfuse
