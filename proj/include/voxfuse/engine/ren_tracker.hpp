#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "voxfuse/core/parallel.hpp"
#include "voxfuse/engine/depth_tracker.hpp"
#include "voxfuse/engine/raycast.hpp"
#include "voxfuse/engine/tracking_state.hpp"
#include "voxfuse/volume/scene_params.hpp"

namespace voxfuse {

/// Robust per-point energy E = -4 exp(s) / (exp(s) + 1)^2 with s = sigma * V.
/// E == tanh^2(s/2) - 1, so minimising sum E is the least-squares problem with
/// residual r = tanh(s/2); that form drives the Gauss-Newton solver.
inline float ren_point_energy(float sdf, float sigma) {
  const float es = std::exp(sigma * sdf);
  return -4.0f * es / ((es + 1.0f) * (es + 1.0f));
}

inline float ren_point_residual(float sdf, float sigma) {
  return std::tanh(0.5f * sigma * sdf);
}

/// SDF-based pose refinement: back-projects every valid depth pixel, reads
/// the trilinear SDF and its gradient at the world point and runs
/// Gauss-Newton on the robust cost. Points in unallocated space drop out of
/// the sum; if everything drops, tracking fails and the input pose is kept.
template <typename TVolume>
TrackingResult ren_refine(const Image2D<float>& depth, const Intrinsics& intr,
                          const TVolume& volume, const SceneParams& params,
                          const Pose& init_world_to_cam, const TrackerSettings& settings) {
  TrackingResult result;
  result.pose = init_world_to_cam;
  const auto sampler = make_sdf_sampler(volume);
  Pose cam_to_world = init_world_to_cam.inverse();
  const double sigma = settings.ren_sigma;

  struct Partial {
    double h[21] = {};
    double g[6] = {};
    double energy = 0;
    std::int64_t count = 0;
  };

  int iterations_total = 0;
  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    const int nchunks = chunk_count(0, depth.height(), 8);
    std::vector<Partial> partials(static_cast<std::size_t>(nchunks));
    parallel_chunks(0, depth.height(), 8, [&](int chunk, std::int64_t y0, std::int64_t y1) {
      Partial acc;
      for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
          const float d = depth.at(x, y);
          if (d <= 0.0f) continue;
          const Vec3d p_world = cam_to_world.apply(unproject(intr, Vec2d(x, y), d));
          const Vec3f p_vox = (p_world / params.voxel_size).cast<float>();
          const auto [sdf, ok] = trilinear_sdf(sampler, p_vox);
          if (!ok) continue;
          const auto [grad_vox, gok] = trilinear_sdf_gradient(sampler, p_vox);
          if (!gok) continue;
          const Vec3f grad_f = grad_vox;
          const Vec3d grad_world = grad_f.cast<double>() / params.voxel_size;
          const double r = ren_point_residual(sdf, static_cast<float>(sigma));
          const double dr_dsdf = (1.0 - r * r) * 0.5 * sigma;
          Vec6d j;
          j.head<3>() = dr_dsdf * p_world.cross(grad_world);
          j.tail<3>() = dr_dsdf * grad_world;
          int k = 0;
          for (int a = 0; a < 6; ++a) {
            for (int b = a; b < 6; ++b) acc.h[k++] += j(a) * j(b);
            acc.g[a] += j(a) * r;
          }
          acc.energy += ren_point_energy(sdf, static_cast<float>(sigma));
          ++acc.count;
        }
      }
      partials[static_cast<std::size_t>(chunk)] = acc;
    });

    Mat6d hessian = Mat6d::Zero();
    Vec6d gradient = Vec6d::Zero();
    double energy = 0;
    std::int64_t count = 0;
    {
      double h[21] = {};
      for (const auto& p : partials) {
        for (int i = 0; i < 21; ++i) h[i] += p.h[i];
        for (int i = 0; i < 6; ++i) gradient(i) += p.g[i];
        energy += p.energy;
        count += p.count;
      }
      int k = 0;
      for (int a = 0; a < 6; ++a) {
        for (int b = a; b < 6; ++b) {
          hessian(a, b) = h[k];
          hessian(b, a) = h[k];
          ++k;
        }
      }
    }

    if (count < settings.min_valid_points) return result;
    result.valid_points = static_cast<int>(count);
    result.final_cost = energy / static_cast<double>(count);

    if (gradient.norm() < 1e-12) break;  // already at the minimum
    if (!detail::well_conditioned(hessian, settings.max_condition)) return result;
    const Vec6d twist = hessian.ldlt().solve(-gradient);
    cam_to_world = pose_increment(cam_to_world, twist);
    ++iterations_total;
    if (twist.norm() < settings.convergence_eps) break;
  }

  result.pose = cam_to_world.inverse();
  result.ok = true;
  result.iterations = iterations_total;
  return result;
}

}  // namespace voxfuse
