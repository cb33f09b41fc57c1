#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "voxfuse/core/parallel.hpp"
#include "voxfuse/engine/pyramid.hpp"
#include "voxfuse/engine/tracking_state.hpp"

namespace voxfuse {

/// One point-to-plane term: signed distance of the transformed depth point to
/// the tangent plane of its associated model point, with the Jacobian w.r.t.
/// a left-multiplied twist (rotation first).
struct IcpTerm {
  double residual;
  Vec6d jacobian;
};

inline IcpTerm icp_point_to_plane_term(const Vec3d& p_world, const Vec3d& model_point,
                                       const Vec3d& model_normal) {
  IcpTerm term;
  term.residual = (p_world - model_point).dot(model_normal);
  term.jacobian.head<3>() = p_world.cross(model_normal);
  term.jacobian.tail<3>() = model_normal;
  return term;
}

namespace detail {

/// Bilinear sample of a validity-flagged map (w > 0 marks valid pixels).
/// All four neighbours must be valid and mutually consistent: blending
/// across a silhouette edge would fabricate mid-air model points, so samples
/// whose corners spread more than max_spread are rejected along with holes
/// and map borders. Keeping only consistent quads also keeps the residual
/// field continuous in the pose.
inline bool sample_map_bilinear(const Image2D<Vec4f>& map, double x, double y, float max_spread,
                                Vec3d& out) {
  if (x < 0 || y < 0 || x > map.width() - 1.001 || y > map.height() - 1.001) return false;
  const int ix = static_cast<int>(x), iy = static_cast<int>(y);
  const double fx = x - ix, fy = y - iy;
  const Vec4f& a = map.at(ix, iy);
  const Vec4f& b = map.at(ix + 1, iy);
  const Vec4f& c = map.at(ix, iy + 1);
  const Vec4f& d = map.at(ix + 1, iy + 1);
  if (a.w() == 0.0f || b.w() == 0.0f || c.w() == 0.0f || d.w() == 0.0f) return false;
  const Vec4f lo = a.cwiseMin(b).cwiseMin(c).cwiseMin(d);
  const Vec4f hi = a.cwiseMax(b).cwiseMax(c).cwiseMax(d);
  if ((hi - lo).head<3>().norm() > max_spread) return false;
  const Vec4f v = a * static_cast<float>((1 - fx) * (1 - fy)) +
                  b * static_cast<float>(fx * (1 - fy)) + c * static_cast<float>((1 - fx) * fy) +
                  d * static_cast<float>(fx * fy);
  out = v.head<3>().cast<double>();
  return true;
}

// Deterministic accumulator: 21 upper-triangle Hessian entries, 6 gradient
// entries, squared-residual sum and pair count, reduced in chunk order.
struct IcpAccum {
  double h[21] = {};
  double g[6] = {};
  double cost = 0;
  std::int64_t count = 0;

  void add(const Vec6d& j, double r) {
    int k = 0;
    for (int a = 0; a < 6; ++a) {
      for (int b = a; b < 6; ++b) h[k++] += j(a) * j(b);
      g[a] += j(a) * r;
    }
    cost += r * r;
    ++count;
  }
  void merge(const IcpAccum& o) {
    for (int i = 0; i < 21; ++i) h[i] += o.h[i];
    for (int i = 0; i < 6; ++i) g[i] += o.g[i];
    cost += o.cost;
    count += o.count;
  }
  Mat6d hessian() const {
    Mat6d m;
    int k = 0;
    for (int a = 0; a < 6; ++a) {
      for (int b = a; b < 6; ++b) {
        m(a, b) = h[k];
        m(b, a) = h[k];
        ++k;
      }
    }
    return m;
  }
  Vec6d gradient() const {
    Vec6d v;
    for (int i = 0; i < 6; ++i) v(i) = g[i];
    return v;
  }
};

inline bool well_conditioned(const Eigen::MatrixXd& h, double max_condition) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  const double smax = svd.singularValues()(0);
  return smin > 0 && smax / smin < max_condition;
}

}  // namespace detail

/// Point-to-plane ICP with projective data association against the raycast
/// maps, coarse-to-fine over the depth pyramid. The coarsest
/// rotation_only_levels solve a 3x3 rotation-only system and leave the
/// translation untouched. state.pose is the pose the maps were rendered
/// from and doubles as the initial estimate unless `initial` is given.
/// Returns the refined world-to-camera pose; on failure (too few pairs or an
/// ill-conditioned system) the initial pose is returned with ok = false.
inline TrackingResult icp_track(const DepthPyramid& pyramid, const TrackingState& state,
                                const TrackerSettings& settings, const Pose* initial = nullptr) {
  TrackingResult result;
  result.pose = initial ? *initial : state.pose;
  if (!state.maps_valid) return result;

  const Pose render_pose = state.pose;  // pose the maps were rendered from
  const Intrinsics& map_intr = pyramid.intrinsics[0];
  Pose cam_to_world = result.pose.inverse();

  int iterations_total = 0;
  bool any_level_solved = false;
  for (int level = pyramid.levels() - 1; level >= 0; --level) {
    const bool rotation_only = level >= pyramid.levels() - settings.rotation_only_levels;
    const Image2D<float>& depth = pyramid.depth[static_cast<std::size_t>(level)];
    const Intrinsics& intr = pyramid.intrinsics[static_cast<std::size_t>(level)];

    double accepted_cost = std::numeric_limits<double>::infinity();
    Pose accepted_pose = cam_to_world;
    Vec6d pending_twist = Vec6d::Zero();
    int halvings = 0;
    for (int iter = 0; iter < settings.max_iterations; ++iter) {
      // Rotation-only steps rotate the camera about its own centre, so the
      // rotational Jacobian uses the camera-relative point.
      const Vec3d rot_centre = rotation_only ? cam_to_world.translation() : Vec3d::Zero();
      const int nchunks = chunk_count(0, depth.height(), 8);
      std::vector<detail::IcpAccum> partial(static_cast<std::size_t>(nchunks));
      parallel_chunks(0, depth.height(), 8, [&](int chunk, std::int64_t y0, std::int64_t y1) {
        detail::IcpAccum acc;
        for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
          for (int x = 0; x < depth.width(); ++x) {
            const float d = depth.at(x, y);
            if (d <= 0.0f) continue;
            const Vec3d p_cam = unproject(intr, Vec2d(x, y), d);
            const Vec3d p_world = cam_to_world.apply(p_cam);
            const Vec3d q = render_pose.apply(p_world);
            if (q.z() <= 0.0) continue;
            const Vec2d px = project(map_intr, q);
            Vec3d model_point, model_normal;
            if (!detail::sample_map_bilinear(state.points, px.x(), px.y(),
                                             settings.icp_dist_threshold, model_point)) {
              continue;
            }
            if (!detail::sample_map_bilinear(state.normals, px.x(), px.y(), 1.0f, model_normal)) {
              continue;
            }
            const double nlen = model_normal.norm();
            if (nlen < 1e-6) continue;
            model_normal /= nlen;
            IcpTerm term = icp_point_to_plane_term(p_world, model_point, model_normal);
            if (std::abs(term.residual) > settings.icp_dist_threshold) continue;
            if (rotation_only) {
              term.jacobian.head<3>() = (p_world - rot_centre).cross(model_normal);
            }
            acc.add(term.jacobian, term.residual);
          }
        }
        partial[static_cast<std::size_t>(chunk)] = acc;
      });
      detail::IcpAccum total;
      for (const auto& p : partial) total.merge(p);

      if (total.count < settings.min_valid_points) {
        // Coarse levels of small images may not carry enough pairs; skip to
        // the next finer level. Tracking fails only if no level solves.
        result.valid_points = static_cast<int>(total.count);
        break;
      }

      // The evaluation is at the pose produced by the previous step. If the
      // objective went up, the step overshot: retry it halved from the last
      // accepted pose, giving up on the level after a few halvings. Accepted
      // iterations are therefore non-increasing in cost.
      const double cost = total.cost / static_cast<double>(total.count);
      if (cost > accepted_cost) {
        if (halvings < 4 && pending_twist.squaredNorm() > 0) {
          ++halvings;
          pending_twist *= 0.5;
          cam_to_world = rotation_only
                             ? pose_rotate_increment(accepted_pose, pending_twist.head<3>())
                             : pose_increment(accepted_pose, pending_twist);
          continue;
        }
        cam_to_world = accepted_pose;
        break;
      }
      accepted_cost = cost;
      accepted_pose = cam_to_world;
      halvings = 0;

      Vec6d twist = Vec6d::Zero();
      if (rotation_only) {
        const Mat3d h = total.hessian().topLeftCorner<3, 3>();
        if (!detail::well_conditioned(h, settings.max_condition)) return result;
        twist.head<3>() = h.ldlt().solve(-total.gradient().head<3>());
        cam_to_world = pose_rotate_increment(cam_to_world, twist.head<3>());
      } else {
        const Mat6d h = total.hessian();
        if (!detail::well_conditioned(h, settings.max_condition)) return result;
        twist = h.ldlt().solve(-total.gradient());
        cam_to_world = pose_increment(cam_to_world, twist);
      }
      pending_twist = twist;
      ++iterations_total;
      any_level_solved = true;
      result.final_cost = cost;
      result.valid_points = static_cast<int>(total.count);
#ifdef VOXFUSE_ICP_TRACE
      std::fprintf(stderr, "icp L%d i%d%s n=%lld rms=%g |twist|=%g\n", level, iter,
                   rotation_only ? " [rot]" : "", (long long)total.count,
                   std::sqrt(total.cost / total.count), twist.norm());
#endif
      if (twist.norm() < settings.convergence_eps) {
        accepted_pose = cam_to_world;
        break;
      }
    }
  }

  if (!any_level_solved) return result;  // insufficient pairs everywhere
  result.pose = cam_to_world.inverse();
  result.ok = true;
  result.iterations = iterations_total;
  return result;
}

}  // namespace voxfuse
