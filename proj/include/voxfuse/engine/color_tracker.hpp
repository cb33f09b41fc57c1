#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "voxfuse/core/parallel.hpp"
#include "voxfuse/engine/depth_tracker.hpp"
#include "voxfuse/engine/pyramid.hpp"
#include "voxfuse/engine/tracking_state.hpp"

namespace voxfuse {

namespace detail {

struct ColorEval {
  double cost = 0;       // mean squared colour residual over valid points
  std::int64_t count = 0;
  Mat6d hessian = Mat6d::Zero();
  Vec6d gradient = Vec6d::Zero();
};

/// Photometric residual pass: r_i = I(pi(M * p_i)) - c_i with bilinear image
/// sampling. Accumulation is chunked deterministically over the point list.
inline ColorEval evaluate_color(const std::vector<Vec3f>& points, const std::vector<Vec3f>& colors,
                                const Image2D<Vec3f>& image, const Image2D<Vec3f>& grad_x,
                                const Image2D<Vec3f>& grad_y, const Intrinsics& intr,
                                const Pose& world_to_cam, int stride, bool with_derivatives) {
  const int n = static_cast<int>(points.size());
  struct Partial {
    double cost = 0;
    std::int64_t count = 0;
    double h[21] = {};
    double g[6] = {};
  };
  const int nchunks = chunk_count(0, n, 1024);
  std::vector<Partial> partials(static_cast<std::size_t>(nchunks));
  parallel_chunks(0, n, 1024, [&](int chunk, std::int64_t b, std::int64_t e) {
    Partial acc;
    for (std::int64_t i = b; i < e; i += stride) {
      const Vec3d p = points[static_cast<std::size_t>(i)].cast<double>();
      const Vec3d q = world_to_cam.apply(p);
      if (q.z() <= 0.0) continue;
      const Vec2d px = project(intr, q);
      const auto sample = sample_bilinear(image, static_cast<float>(px.x()), static_cast<float>(px.y()));
      if (!sample) continue;
      const Vec3f res = *sample - colors[static_cast<std::size_t>(i)];
      acc.cost += res.squaredNorm();
      ++acc.count;
      if (!with_derivatives) continue;
      const auto gx = sample_bilinear(grad_x, static_cast<float>(px.x()), static_cast<float>(px.y()));
      const auto gy = sample_bilinear(grad_y, static_cast<float>(px.x()), static_cast<float>(px.y()));
      if (!gx || !gy) continue;
      // d(pixel)/d(camera point)
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << intr.fx / q.z(), 0, -intr.fx * q.x() / (q.z() * q.z()),
             0, intr.fy / q.z(), -intr.fy * q.y() / (q.z() * q.z());
      // d(camera point)/d(twist), rotation parameters first
      Eigen::Matrix<double, 3, 6> dq;
      dq.leftCols<3>() = -skew(q);
      dq.rightCols<3>() = Mat3d::Identity();
      const Eigen::Matrix<double, 2, 6> dpx = dpi * dq;
      for (int ch = 0; ch < 3; ++ch) {
        Vec6d j = (*gx)(ch) * dpx.row(0).transpose() + (*gy)(ch) * dpx.row(1).transpose();
        const double r = res(ch);
        int k = 0;
        for (int a = 0; a < 6; ++a) {
          for (int bb = a; bb < 6; ++bb) acc.h[k++] += j(a) * j(bb);
          acc.g[a] += j(a) * r;
        }
      }
    }
    partials[static_cast<std::size_t>(chunk)] = acc;
  });

  ColorEval out;
  double h[21] = {};
  for (const auto& p : partials) {
    out.cost += p.cost;
    out.count += p.count;
    for (int i = 0; i < 21; ++i) h[i] += p.h[i];
    for (int i = 0; i < 6; ++i) out.gradient(i) += p.g[i];
  }
  int k = 0;
  for (int a = 0; a < 6; ++a) {
    for (int b = a; b < 6; ++b) {
      out.hessian(a, b) = h[k];
      out.hessian(b, a) = h[k];
      ++k;
    }
  }
  if (out.count > 0) out.cost /= static_cast<double>(out.count);
  return out;
}

}  // namespace detail

/// Photometric alignment of the forward-projected surface point list against
/// the colour pyramid, minimised with Levenberg-Marquardt (damping grows on
/// cost increase, shrinks on decrease).
inline TrackingResult color_track(const std::vector<Vec3f>& points,
                                  const std::vector<Vec3f>& colors, const ColorPyramid& pyramid,
                                  const Pose& init_world_to_cam, const TrackerSettings& settings) {
  TrackingResult result;
  result.pose = init_world_to_cam;
  if (points.empty() || points.size() != colors.size()) return result;

  const int stride = settings.skip_points ? 2 : 1;
  Pose pose = init_world_to_cam;
  int iterations_total = 0;
  bool any_level_ok = false;

  for (int level = pyramid.levels() - 1; level >= 0; --level) {
    const auto& image = pyramid.color[static_cast<std::size_t>(level)];
    const auto& gx = pyramid.grad_x[static_cast<std::size_t>(level)];
    const auto& gy = pyramid.grad_y[static_cast<std::size_t>(level)];
    const Intrinsics& intr = pyramid.intrinsics[static_cast<std::size_t>(level)];

    double lambda = 0.01;
    detail::ColorEval eval =
        detail::evaluate_color(points, colors, image, gx, gy, intr, pose, stride, true);
    if (eval.count < settings.min_valid_points) continue;
    any_level_ok = true;

    for (int iter = 0; iter < settings.max_iterations; ++iter) {
      Mat6d damped = eval.hessian;
      damped.diagonal() *= (1.0 + lambda);
      const Eigen::LDLT<Mat6d> solver(damped);
      if (solver.info() != Eigen::Success) break;
      const Vec6d twist = solver.solve(-eval.gradient);
      const Pose candidate = pose_increment(pose, twist);
      const detail::ColorEval trial =
          detail::evaluate_color(points, colors, image, gx, gy, intr, candidate, stride, true);
      ++iterations_total;
      if (trial.count >= settings.min_valid_points && trial.cost < eval.cost) {
        pose = candidate;
        eval = trial;
        lambda = std::max(lambda * 0.1, 1e-7);
        if (twist.norm() < settings.convergence_eps) break;
      } else {
        lambda *= 10.0;
        if (lambda > 1e7) break;
      }
      result.final_cost = eval.cost;
    }
    result.final_cost = eval.cost;
    result.valid_points = static_cast<int>(eval.count);
  }

  if (!any_level_ok) return result;  // all points projected outside every level
  result.pose = pose;
  result.ok = true;
  result.iterations = iterations_total;
  return result;
}

}  // namespace voxfuse
