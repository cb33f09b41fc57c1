#include "voxfuse/core/pose.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace voxfuse {

Mat3d orthonormalize(const Mat3d& m) {
  Eigen::JacobiSVD<Mat3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3d flip = Mat3d::Identity();
    flip(2, 2) = -1;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

Pose pose_increment(const Pose& pose, const Vec6d& twist) {
  const Vec3d omega = twist.head<3>();
  const Vec3d v = twist.tail<3>();
  const Mat3d r_delta = orthonormalize(Mat3d::Identity() + skew(omega));
  return Pose(r_delta * pose.rotation(), r_delta * pose.translation() + v);
}

Pose pose_rotate_increment(const Pose& pose, const Vec3d& omega) {
  const Mat3d r_delta = orthonormalize(Mat3d::Identity() + skew(omega));
  return Pose(r_delta * pose.rotation(), pose.translation());
}

Pose look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up) {
  const Vec3d z = (target - eye).normalized();
  Vec3d x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Vec3d(1, 0, 0));
  x.normalize();
  const Vec3d y = z.cross(x);
  Mat3d cam_to_world;
  cam_to_world.col(0) = x;
  cam_to_world.col(1) = y;
  cam_to_world.col(2) = z;
  const Mat3d r = cam_to_world.transpose();
  return Pose(r, -(r * eye));
}

double rotation_angle_between(const Pose& a, const Pose& b) {
  const Mat3d rel = a.rotation().transpose() * b.rotation();
  const double c = std::clamp((rel.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

double translation_distance_between(const Pose& a, const Pose& b) {
  // Compare camera centres, which is what matters for tracking accuracy.
  const Vec3d ca = -(a.rotation().transpose() * a.translation());
  const Vec3d cb = -(b.rotation().transpose() * b.translation());
  return (ca - cb).norm();
}

}  // namespace voxfuse
