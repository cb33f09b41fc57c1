#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace voxfuse {

using Vec2i = Eigen::Vector2i;
using Vec3i = Eigen::Vector3i;
using Vec2f = Eigen::Vector2f;
using Vec3f = Eigen::Vector3f;
using Vec4f = Eigen::Vector4f;
using Vec2d = Eigen::Vector2d;
using Vec3d = Eigen::Vector3d;
using Mat3f = Eigen::Matrix3f;
using Mat3d = Eigen::Matrix3d;

/// Block coordinates as stored in hash entries (16-bit per axis).
using Vec3s = Eigen::Matrix<std::int16_t, 3, 1>;
/// 8-bit RGB triple.
using Vec3u8 = Eigen::Matrix<std::uint8_t, 3, 1>;

using Vec6d = Eigen::Matrix<double, 6, 1>;
using Mat6d = Eigen::Matrix<double, 6, 6>;

inline bool same_coords(const Vec3s& a, const Vec3i& b) {
  return a.x() == b.x() && a.y() == b.y() && a.z() == b.z();
}

inline Vec3s to_short3(const Vec3i& v) {
  return Vec3s(static_cast<std::int16_t>(v.x()), static_cast<std::int16_t>(v.y()),
               static_cast<std::int16_t>(v.z()));
}

inline Vec3i to_int3(const Vec3s& v) { return Vec3i(v.x(), v.y(), v.z()); }

}  // namespace voxfuse
