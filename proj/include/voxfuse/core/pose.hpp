#pragma once

#include "voxfuse/core/types.hpp"

namespace voxfuse {

/// Rigid transform: p' = R * p + t. Rotation kept orthonormal with det +1.
class Pose {
 public:
  Pose() : rotation_(Mat3d::Identity()), translation_(Vec3d::Zero()) {}
  Pose(const Mat3d& rotation, const Vec3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose identity() { return Pose(); }

  const Mat3d& rotation() const { return rotation_; }
  const Vec3d& translation() const { return translation_; }

  Vec3d apply(const Vec3d& p) const { return rotation_ * p + translation_; }
  Vec3f apply_f(const Vec3f& p) const {
    const Vec3d q = apply(Vec3d(p.cast<double>()));
    return q.cast<float>();
  }

  /// Composition: (a * b).apply(p) == a.apply(b.apply(p)).
  Pose operator*(const Pose& o) const {
    return Pose(rotation_ * o.rotation_, rotation_ * o.translation_ + translation_);
  }

  Pose inverse() const {
    Mat3d rt = rotation_.transpose();
    return Pose(rt, -(rt * translation_));
  }

  double orthonormality_error() const {
    return (rotation_.transpose() * rotation_ - Mat3d::Identity()).norm();
  }

  bool operator==(const Pose& o) const {
    return rotation_ == o.rotation_ && translation_ == o.translation_;
  }

 private:
  Mat3d rotation_;
  Vec3d translation_;
};

inline Mat3d skew(const Vec3d& w) {
  Mat3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

/// Nearest rotation matrix (polar factor) of an invertible 3x3 matrix.
Mat3d orthonormalize(const Mat3d& m);

/// Left-multiplies the pose by the small motion built from a 6-vector twist
/// (rotation parameters first, then translation). The rotation update is the
/// small-angle approximation I + [w]x followed by re-orthonormalization.
Pose pose_increment(const Pose& pose, const Vec6d& twist);

/// Rotation-only variant: the translation is returned bit-identical.
Pose pose_rotate_increment(const Pose& pose, const Vec3d& omega);

/// World-to-camera pose for a camera at `eye` looking at `target`.
Pose look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up = Vec3d(0, -1, 0));

/// Angle (radians) and translation distance between two rigid transforms.
double rotation_angle_between(const Pose& a, const Pose& b);
double translation_distance_between(const Pose& a, const Pose& b);

}  // namespace voxfuse
