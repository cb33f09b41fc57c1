#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "voxfuse/core/image.hpp"
#include "voxfuse/core/intrinsics.hpp"
#include "voxfuse/core/parallel.hpp"
#include "voxfuse/core/pose.hpp"
#include "voxfuse/engine/allocation.hpp"
#include "voxfuse/volume/dense_volume.hpp"
#include "voxfuse/volume/hash_volume.hpp"
#include "voxfuse/volume/scene_params.hpp"

namespace voxfuse {

inline constexpr int kFragmentSize = 16;

/// Conservative per-pixel depth search interval, stored at 16x16-fragment
/// granularity. Invalid fragments have min > max.
class RangeImage {
 public:
  RangeImage() = default;
  RangeImage(int width, int height)
      : width_(width),
        height_(height),
        frag_w_((width + kFragmentSize - 1) / kFragmentSize),
        frag_h_((height + kFragmentSize - 1) / kFragmentSize),
        ranges_(static_cast<std::size_t>(frag_w_) * frag_h_, invalid_range()) {}

  static Vec2f invalid_range() { return Vec2f(std::numeric_limits<float>::max(), 0.0f); }

  int width() const { return width_; }
  int height() const { return height_; }
  int fragments_x() const { return frag_w_; }
  int fragments_y() const { return frag_h_; }

  Vec2f& fragment(int fx, int fy) { return ranges_[static_cast<std::size_t>(fy) * frag_w_ + fx]; }
  const Vec2f& fragment(int fx, int fy) const {
    return ranges_[static_cast<std::size_t>(fy) * frag_w_ + fx];
  }

  Vec2f at_pixel(int x, int y) const { return fragment(x / kFragmentSize, y / kFragmentSize); }

  static bool valid(const Vec2f& r) { return r.x() <= r.y(); }

 private:
  int width_ = 0, height_ = 0;
  int frag_w_ = 0, frag_h_ = 0;
  std::vector<Vec2f> ranges_;
};

/// Raycast search states; transitions follow coarse block search, fine block
/// search bounded by mu, SDF-guided surface search, and the behind-surface
/// refinement. WRONG_SIDE aborts rays that enter allocated data at negative
/// SDF, so block boundaries of back faces are not reported as surface.
enum class RayState : std::uint8_t {
  search_block_coarse,
  search_block_fine,
  search_surface,
  behind_surface,
  wrong_side
};

/// Uninterpolated/trilinear SDF access over a hash volume, in voxel units.
/// Voxel v covers [v, v+1); its sample point is the centre v + 0.5.
template <typename TVoxel>
struct HashSdfSampler {
  const HashVolume<TVoxel>* volume;

  std::pair<float, bool> read(const Vec3i& v) const {
    const auto [voxel, found] = volume->read(v);
    return {TVoxel::sdf_to_float(voxel.sdf), found && voxel.w_depth > 0};
  }
  bool allocated(const Vec3i& v) const { return volume->read(v).second; }
};

template <typename TVoxel>
struct DenseSdfSampler {
  const DenseVolume<TVoxel>* volume;

  std::pair<float, bool> read(const Vec3i& v) const {
    const auto [voxel, found] = volume->read(v);
    return {TVoxel::sdf_to_float(voxel.sdf), found && voxel.w_depth > 0};
  }
  bool allocated(const Vec3i& v) const { return volume->linear_index(v).has_value(); }
};

template <typename TVoxel>
HashSdfSampler<TVoxel> make_sdf_sampler(const HashVolume<TVoxel>& v) {
  return {&v};
}
template <typename TVoxel>
DenseSdfSampler<TVoxel> make_sdf_sampler(const DenseVolume<TVoxel>& v) {
  return {&v};
}

/// Trilinear SDF interpolation at a point in voxel units; invalid when any of
/// the eight neighbours is unallocated or unobserved.
template <typename Sampler>
inline std::pair<float, bool> trilinear_sdf(const Sampler& s, const Vec3f& p) {
  const Vec3f q = p - Vec3f(0.5f, 0.5f, 0.5f);
  const Vec3i base(static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y())),
                   static_cast<int>(std::floor(q.z())));
  const Vec3f f = q - base.cast<float>();
  float value = 0.0f;
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
    const auto [v, ok] = s.read(base + Vec3i(dx, dy, dz));
    if (!ok) return {1.0f, false};
    const float w = (dx ? f.x() : 1 - f.x()) * (dy ? f.y() : 1 - f.y()) * (dz ? f.z() : 1 - f.z());
    value += w * v;
  }
  return {value, true};
}

/// Analytic gradient of the trilinear interpolant, in SDF units per voxel.
template <typename Sampler>
inline std::pair<Vec3f, bool> trilinear_sdf_gradient(const Sampler& s, const Vec3f& p) {
  const Vec3f q = p - Vec3f(0.5f, 0.5f, 0.5f);
  const Vec3i base(static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y())),
                   static_cast<int>(std::floor(q.z())));
  const Vec3f f = q - base.cast<float>();
  float v[2][2][2];
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
    const auto [val, ok] = s.read(base + Vec3i(dx, dy, dz));
    if (!ok) return {Vec3f::Zero(), false};
    v[dx][dy][dz] = val;
  }
  auto lerp = [](float a, float b, float t) { return a + (b - a) * t; };
  Vec3f g;
  g.x() = lerp(lerp(v[1][0][0] - v[0][0][0], v[1][1][0] - v[0][1][0], f.y()),
               lerp(v[1][0][1] - v[0][0][1], v[1][1][1] - v[0][1][1], f.y()), f.z());
  g.y() = lerp(lerp(v[0][1][0] - v[0][0][0], v[1][1][0] - v[1][0][0], f.x()),
               lerp(v[0][1][1] - v[0][0][1], v[1][1][1] - v[1][0][1], f.x()), f.z());
  g.z() = lerp(lerp(v[0][0][1] - v[0][0][0], v[1][0][1] - v[1][0][0], f.x()),
               lerp(v[0][1][1] - v[0][1][0], v[1][1][1] - v[1][1][0], f.x()), f.y());
  return {g, true};
}

/// Surface normal as the central difference of trilinear SDF values one voxel
/// apart. The wider baseline averages out projective discretization noise
/// that the within-cell analytic gradient picks up.
template <typename Sampler>
inline std::pair<Vec3f, bool> sdf_surface_normal(const Sampler& s, const Vec3f& p) {
  Vec3f g;
  for (int a = 0; a < 3; ++a) {
    Vec3f lo = p, hi = p;
    lo(a) -= 1.0f;
    hi(a) += 1.0f;
    const auto [vlo, ok_lo] = trilinear_sdf(s, lo);
    const auto [vhi, ok_hi] = trilinear_sdf(s, hi);
    if (!ok_lo || !ok_hi) return {Vec3f::Zero(), false};
    g(a) = vhi - vlo;
  }
  const float len = g.norm();
  if (len < 1e-12f) return {Vec3f::Zero(), false};
  return {g / len, true};
}

struct RaycastHit {
  Vec3f point_world;  // metres
  float ray_length;   // voxel units from the range start, for diagnostics
};

/// Single-ray march through the volume between the expected depth bounds.
/// Returns the surface point or nullopt (a normal outcome for empty space).
template <typename Sampler>
std::optional<RaycastHit> cast_ray(const Sampler& sampler, int x, int y, const Vec2f& range,
                                   const Pose& world_to_cam, const Intrinsics& intr,
                                   const SceneParams& params) {
  if (!RangeImage::valid(range)) return std::nullopt;
  const Pose cam_to_world = world_to_cam.inverse();
  const double inv_vox = 1.0 / params.voxel_size;
  const Vec3d dir_cam((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
  const Vec3f start = (cam_to_world.apply(Vec3d(dir_cam * range.x())) * inv_vox).cast<float>();
  const Vec3f end = (cam_to_world.apply(Vec3d(dir_cam * range.y())) * inv_vox).cast<float>();
  Vec3f dir = end - start;
  const float total = dir.norm();
  if (!(total > 0)) return std::nullopt;
  dir /= total;

  const float mu_vox = params.mu_voxels();
  const float fine_step = std::min(mu_vox, static_cast<float>(kBlockSide));
  auto voxel_of = [](const Vec3f& p) {
    return Vec3i(static_cast<int>(std::floor(p.x())), static_cast<int>(std::floor(p.y())),
                 static_cast<int>(std::floor(p.z())));
  };

  RayState state = RayState::search_block_coarse;
  float t = 0.0f;
  // Last confirmed in-front sample, for bracketing the crossing.
  float t_front = -1.0f, sdf_front = 1.0f;
  while (t <= total) {
    const Vec3f p = start + dir * t;
    const auto [value, found] = sampler.read(voxel_of(p));

    if (state == RayState::search_block_coarse) {
      if (!found) {
        t += kBlockSide;
        continue;
      }
      // Entered allocated data: step back one coarse step and rescan.
      state = RayState::search_block_fine;
      t = std::max(0.0f, t - kBlockSide);
      continue;
    }

    if (!found) {
      if (state == RayState::search_surface) state = RayState::search_block_fine;
      t_front = -1.0f;  // left the observed band, drop the bracket
      t += fine_step;
      continue;
    }

    float sdf = value;
    if (state == RayState::search_block_fine && sdf <= 0.0f) {
      // The ray hits allocated data from behind; the block boundary is not
      // an object surface.
      state = RayState::wrong_side;
      return std::nullopt;
    }
    state = RayState::search_surface;

    if (sdf <= 0.1f && sdf >= -0.5f) {
      if (const auto [tri, ok] = trilinear_sdf(sampler, p); ok) sdf = tri;
    }
    if (sdf <= 0.0f) {
      state = RayState::behind_surface;
      // Locate the crossing with two trilinear interpolation steps: a secant
      // step on the bracketing samples, then a Newton correction with the
      // local along-ray slope.
      if (t_front >= 0.0f && sdf_front > sdf && t - t_front <= 2.0f * mu_vox) {
        t = t + (t_front - t) * sdf / (sdf - sdf_front);
      } else {
        t += sdf * mu_vox;
      }
      float t_back = t, sdf_back = sdf;
      for (int i = 0; i < 2; ++i) {
        const auto [tri, ok] = trilinear_sdf(sampler, start + dir * t);
        if (!ok) break;
        const float denom = sdf_back - tri;
        if (std::abs(denom) > 1e-12f && std::abs(t_back - t) > 1e-6f) {
          const float slope = denom / (t_back - t);  // SDF units per voxel
          t_back = t;
          sdf_back = tri;
          t -= tri / (std::abs(slope) > 1e-6f ? slope : 1.0f / mu_vox);
        } else {
          t += tri * mu_vox;
        }
      }
      const Vec3f hit = start + dir * t;
      return RaycastHit{hit * params.voxel_size, t};
    }
    t_front = t;
    sdf_front = sdf;
    t += std::min(std::max(sdf * mu_vox, 1.0f), mu_vox);
  }
  return std::nullopt;
}

/// Builds the expected-depth range image by forward projecting the visible
/// blocks. Stage one emits per-fragment entries with the block depth bounds
/// (prefix-sum compaction); stage two folds them with min/max combines.
template <typename TVoxel>
RangeImage create_expected_depths(const HashVolume<TVoxel>& volume,
                                  const std::vector<int>& visible_list, const Pose& world_to_cam,
                                  const Intrinsics& intr, const SceneParams& params,
                                  float near_clip, float far_clip) {
  RangeImage range(intr.width, intr.height);
  const int n = static_cast<int>(visible_list.size());
  struct FragOf {
    int fx0, fx1, fy0, fy1;
    float zmin, zmax;
    bool any;
  };
  std::vector<FragOf> boxes(static_cast<std::size_t>(n));
  std::vector<int> counts(static_cast<std::size_t>(n) + 1, 0);

  parallel_chunks(0, n, 64, [&](int, std::int64_t b, std::int64_t e) {
    for (int i = static_cast<int>(b); i < static_cast<int>(e); ++i) {
      FragOf fo{0, -1, 0, -1, 0.0f, 0.0f, false};
      const HashEntry& entry = volume.entry(visible_list[static_cast<std::size_t>(i)]);
      const Vec3i bp = to_int3(entry.pos);
      double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
      double xmin = zmin, xmax = -zmin, ymin = zmin, ymax = -zmin;
      bool behind = false;
      for (int corner = 0; corner < 8; ++corner) {
        const Vec3d world((bp.x() * kBlockSide + ((corner & 1) ? kBlockSide : 0)) * params.voxel_size,
                          (bp.y() * kBlockSide + ((corner & 2) ? kBlockSide : 0)) * params.voxel_size,
                          (bp.z() * kBlockSide + ((corner & 4) ? kBlockSide : 0)) * params.voxel_size);
        const Vec3d cam = world_to_cam.apply(world);
        zmin = std::min(zmin, cam.z());
        zmax = std::max(zmax, cam.z());
        if (cam.z() <= 1e-6) {
          behind = true;
          continue;
        }
        const Vec2d px = project(intr, cam);
        xmin = std::min(xmin, px.x());
        xmax = std::max(xmax, px.x());
        ymin = std::min(ymin, px.y());
        ymax = std::max(ymax, px.y());
      }
      if (!behind && zmax > near_clip && zmin < far_clip) {
        const int px0 = std::max(0, static_cast<int>(std::floor(xmin)));
        const int px1 = std::min(intr.width - 1, static_cast<int>(std::ceil(xmax)));
        const int py0 = std::max(0, static_cast<int>(std::floor(ymin)));
        const int py1 = std::min(intr.height - 1, static_cast<int>(std::ceil(ymax)));
        if (px0 <= px1 && py0 <= py1) {
          fo.fx0 = px0 / kFragmentSize;
          fo.fx1 = px1 / kFragmentSize;
          fo.fy0 = py0 / kFragmentSize;
          fo.fy1 = py1 / kFragmentSize;
          fo.zmin = static_cast<float>(std::max<double>(zmin, near_clip));
          fo.zmax = static_cast<float>(std::min<double>(zmax, far_clip));
          fo.any = true;
        }
      }
      boxes[static_cast<std::size_t>(i)] = fo;
      counts[static_cast<std::size_t>(i)] =
          fo.any ? (fo.fx1 - fo.fx0 + 1) * (fo.fy1 - fo.fy0 + 1) : 0;
    }
  });

  // Prefix sum over fragment counts.
  int total = 0;
  for (int i = 0; i < n; ++i) {
    const int c = counts[static_cast<std::size_t>(i)];
    counts[static_cast<std::size_t>(i)] = total;
    total += c;
  }
  counts[static_cast<std::size_t>(n)] = total;

  struct FragEntry {
    int frag;
    float zmin, zmax;
  };
  std::vector<FragEntry> entries(static_cast<std::size_t>(total));
  parallel_chunks(0, n, 64, [&](int, std::int64_t b, std::int64_t e) {
    for (int i = static_cast<int>(b); i < static_cast<int>(e); ++i) {
      const FragOf& fo = boxes[static_cast<std::size_t>(i)];
      if (!fo.any) continue;
      int out = counts[static_cast<std::size_t>(i)];
      for (int fy = fo.fy0; fy <= fo.fy1; ++fy) {
        for (int fx = fo.fx0; fx <= fo.fx1; ++fx) {
          entries[static_cast<std::size_t>(out++)] = {fy * range.fragments_x() + fx, fo.zmin, fo.zmax};
        }
      }
    }
  });

  // Min/max folds commute, so the combine order does not affect the result.
  for (const FragEntry& fe : entries) {
    Vec2f& r = range.fragment(fe.frag % range.fragments_x(), fe.frag / range.fragments_x());
    r.x() = std::min(r.x(), fe.zmin);
    r.y() = std::max(r.y(), fe.zmax);
  }
  return range;
}

/// Dense volumes have no visibility list; the search interval is the ray/box
/// overlap with the volume bounds, reduced per fragment.
template <typename TVoxel>
RangeImage create_expected_depths(const DenseVolume<TVoxel>& volume, const std::vector<int>&,
                                  const Pose& world_to_cam, const Intrinsics& intr,
                                  const SceneParams& params, float near_clip, float far_clip) {
  RangeImage range(intr.width, intr.height);
  const Pose cam_to_world = world_to_cam.inverse();
  const Vec3i vol_offset = volume.offset();
  const Vec3i vol_size = volume.size();
  const Vec3d box_min = vol_offset.cast<double>() * params.voxel_size;
  const Vec3d box_max = (vol_offset + vol_size).cast<double>() * params.voxel_size;
  for (int fy = 0; fy < range.fragments_y(); ++fy) {
    for (int fx = 0; fx < range.fragments_x(); ++fx) {
      float zmin = std::numeric_limits<float>::max(), zmax = 0.0f;
      const int x1 = std::min(intr.width - 1, (fx + 1) * kFragmentSize - 1);
      const int y1 = std::min(intr.height - 1, (fy + 1) * kFragmentSize - 1);
      for (int y = fy * kFragmentSize; y <= y1; ++y) {
        for (int x = fx * kFragmentSize; x <= x1; ++x) {
          const Vec3d dir_cam((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
          const Vec3d o = cam_to_world.translation();
          const Vec3d d = cam_to_world.rotation() * dir_cam;
          double t0 = near_clip, t1 = far_clip;
          bool ok = true;
          for (int a = 0; a < 3 && ok; ++a) {
            if (std::abs(d(a)) < 1e-12) {
              ok = o(a) >= box_min(a) && o(a) <= box_max(a);
            } else {
              double lo = (box_min(a) - o(a)) / d(a);
              double hi = (box_max(a) - o(a)) / d(a);
              if (lo > hi) std::swap(lo, hi);
              t0 = std::max(t0, lo);
              t1 = std::min(t1, hi);
              ok = t0 <= t1;
            }
          }
          if (ok) {
            zmin = std::min(zmin, static_cast<float>(t0));
            zmax = std::max(zmax, static_cast<float>(t1));
          }
        }
      }
      if (zmax > 0.0f) range.fragment(fx, fy) = Vec2f(zmin, zmax);
    }
  }
  return range;
}

/// Renders the point/normal maps consumed by tracking. Points are world
/// space with w = 1 at valid pixels; normals are unit trilinear gradients.
template <typename TVolume>
void render_maps(const TVolume& volume, const RangeImage& range, const Pose& world_to_cam,
                 const Intrinsics& intr, const SceneParams& params, Image2D<Vec4f>& points,
                 Image2D<Vec4f>& normals) {
  points = Image2D<Vec4f>(intr.width, intr.height, Vec4f::Zero());
  normals = Image2D<Vec4f>(intr.width, intr.height, Vec4f::Zero());
  const auto sampler = make_sdf_sampler(volume);
  parallel_chunks(0, intr.height, 8, [&](int, std::int64_t y0, std::int64_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      for (int x = 0; x < intr.width; ++x) {
        const auto hit = cast_ray(sampler, x, y, range.at_pixel(x, y), world_to_cam, intr, params);
        if (!hit) continue;
        const Vec3f p_vox = hit->point_world / params.voxel_size;
        const auto [n, ok] = sdf_surface_normal(sampler, p_vox);
        if (!ok) continue;
        points.at(x, y) = Vec4f(hit->point_world.x(), hit->point_world.y(), hit->point_world.z(), 1.0f);
        normals.at(x, y) = Vec4f(n.x(), n.y(), n.z(), 1.0f);
      }
    }
  });
}

enum class RenderMode : std::uint8_t { shaded_grey, color };

/// Trilinear blend of stored voxel colours at a point in voxel units; falls
/// back to nearest-valid when some neighbours are missing.
template <typename TVolume>
Vec3f sample_voxel_color(const TVolume& volume, const Vec3f& p) {
  using TVoxel = typename TVolume::VoxelType;
  if constexpr (!TVoxel::has_color) {
    return Vec3f::Zero();
  } else {
    const Vec3f q = p - Vec3f(0.5f, 0.5f, 0.5f);
    const Vec3i base(static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y())),
                     static_cast<int>(std::floor(q.z())));
    const Vec3f f = q - base.cast<float>();
    Vec3f sum = Vec3f::Zero();
    float wsum = 0.0f;
    for (int corner = 0; corner < 8; ++corner) {
      const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
      const auto [voxel, found] = volume.read(base + Vec3i(dx, dy, dz));
      if (!found || voxel.w_color == 0) continue;
      const float w =
          (dx ? f.x() : 1 - f.x()) * (dy ? f.y() : 1 - f.y()) * (dz ? f.z() : 1 - f.z());
      sum += voxel.clr.template cast<float>() * w;
      wsum += w;
    }
    return wsum > 0.0f ? Vec3f(sum / wsum) : Vec3f::Zero();
  }
}

template <typename TVolume>
Image2D<Vec3u8> render_image(const TVolume& volume, const Image2D<Vec4f>& points,
                             const Image2D<Vec4f>& normals, const Pose& world_to_cam,
                             const SceneParams& params, RenderMode mode) {
  Image2D<Vec3u8> out(points.width(), points.height(), Vec3u8::Zero());
  const Vec3f view_axis = world_to_cam.rotation().row(2).cast<float>();
  for (int y = 0; y < points.height(); ++y) {
    for (int x = 0; x < points.width(); ++x) {
      if (points.at(x, y).w() == 0.0f) continue;
      const Vec3f n = normals.at(x, y).head<3>();
      const float shade = std::abs(n.dot(view_axis));
      if (mode == RenderMode::shaded_grey || !TVolume::VoxelType::has_color) {
        const auto g = static_cast<std::uint8_t>(std::clamp(shade, 0.0f, 1.0f) * 255.0f);
        out.at(x, y) = Vec3u8(g, g, g);
      } else {
        const Vec3f p_vox = points.at(x, y).head<3>() / params.voxel_size;
        const Vec3f c = sample_voxel_color(volume, p_vox) * shade;
        out.at(x, y) = Vec3u8(static_cast<std::uint8_t>(std::clamp(c.x(), 0.0f, 255.0f)),
                              static_cast<std::uint8_t>(std::clamp(c.y(), 0.0f, 255.0f)),
                              static_cast<std::uint8_t>(std::clamp(c.z(), 0.0f, 255.0f)));
      }
    }
  }
  return out;
}

/// Subsamples the raycast maps by the given stride into the point/colour
/// lists used by the colour tracker.
template <typename TVolume>
void forward_project_points(const TVolume& volume, const Image2D<Vec4f>& points,
                            const SceneParams& params, int stride, std::vector<Vec3f>& out_points,
                            std::vector<Vec3f>& out_colors) {
  out_points.clear();
  out_colors.clear();
  for (int y = 0; y < points.height(); y += stride) {
    for (int x = 0; x < points.width(); x += stride) {
      const Vec4f& p = points.at(x, y);
      if (p.w() == 0.0f) continue;
      out_points.push_back(p.head<3>());
      out_colors.push_back(sample_voxel_color(volume, Vec3f(p.head<3>() / params.voxel_size)) /
                           255.0f);
    }
  }
}

}  // namespace voxfuse
