#pragma once

#include <vector>

#include "voxfuse/core/image.hpp"
#include "voxfuse/core/intrinsics.hpp"

namespace voxfuse {

/// Depth resolution hierarchy. Level 0 is full resolution; each level is a
/// validity-aware 2x2 reduction (invalid samples excluded from the mean).
struct DepthPyramid {
  std::vector<Image2D<float>> depth;
  std::vector<Intrinsics> intrinsics;

  int levels() const { return static_cast<int>(depth.size()); }
};

/// Colour hierarchy: per-level colour in [0,1] floats plus per-channel
/// central-difference gradients.
struct ColorPyramid {
  std::vector<Image2D<Vec3f>> color;
  std::vector<Image2D<Vec3f>> grad_x;
  std::vector<Image2D<Vec3f>> grad_y;
  std::vector<Intrinsics> intrinsics;

  int levels() const { return static_cast<int>(color.size()); }
};

// Depth samples further than this from the nearest sample of a 2x2 block
// belong to a different surface; averaging across such a depth edge would
// produce phantom mid-air points that bias the tracker.
inline constexpr float kDepthEdgeThreshold = 0.05f;

inline Image2D<float> downsample_depth(const Image2D<float>& src) {
  Image2D<float> dst((src.width() + 1) / 2, (src.height() + 1) / 2, 0.0f);
  for (int y = 0; y < dst.height(); ++y) {
    for (int x = 0; x < dst.width(); ++x) {
      float dmin = 0.0f;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int sx = 2 * x + dx, sy = 2 * y + dy;
          if (!src.in_bounds(sx, sy)) continue;
          const float d = src.at(sx, sy);
          if (d > 0.0f && (dmin <= 0.0f || d < dmin)) dmin = d;
        }
      }
      if (dmin <= 0.0f) continue;
      float sum = 0.0f;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int sx = 2 * x + dx, sy = 2 * y + dy;
          if (!src.in_bounds(sx, sy)) continue;
          const float d = src.at(sx, sy);
          if (d <= 0.0f || d > dmin + kDepthEdgeThreshold) continue;
          sum += d;
          ++n;
        }
      }
      dst.at(x, y) = sum / static_cast<float>(n);
    }
  }
  return dst;
}

template <typename T>
Image2D<T> downsample_mean(const Image2D<T>& src) {
  Image2D<T> dst((src.width() + 1) / 2, (src.height() + 1) / 2, T{});
  for (int y = 0; y < dst.height(); ++y) {
    for (int x = 0; x < dst.width(); ++x) {
      T sum{};
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int sx = 2 * x + dx, sy = 2 * y + dy;
          if (!src.in_bounds(sx, sy)) continue;
          sum += src.at(sx, sy);
          ++n;
        }
      }
      dst.at(x, y) = sum * (1.0f / static_cast<float>(n));
    }
  }
  return dst;
}

/// Central differences; zero at the image border.
template <typename T>
void image_gradients(const Image2D<T>& src, Image2D<T>& gx, Image2D<T>& gy) {
  gx = Image2D<T>(src.width(), src.height(), T{});
  gy = Image2D<T>(src.width(), src.height(), T{});
  for (int y = 1; y + 1 < src.height(); ++y) {
    for (int x = 1; x + 1 < src.width(); ++x) {
      gx.at(x, y) = (src.at(x + 1, y) - src.at(x - 1, y)) * 0.5f;
      gy.at(x, y) = (src.at(x, y + 1) - src.at(x, y - 1)) * 0.5f;
    }
  }
}

inline DepthPyramid build_depth_pyramid(const Image2D<float>& depth, const Intrinsics& intr,
                                        int levels) {
  DepthPyramid pyr;
  pyr.depth.push_back(depth);
  pyr.intrinsics.push_back(intr);
  for (int l = 1; l < levels; ++l) {
    pyr.depth.push_back(downsample_depth(pyr.depth.back()));
    pyr.intrinsics.push_back(pyr.intrinsics.back().half());
  }
  return pyr;
}

inline ColorPyramid build_color_pyramid(const Image2D<Vec3u8>& rgb, const Intrinsics& intr,
                                        int levels) {
  ColorPyramid pyr;
  Image2D<Vec3f> base(rgb.width(), rgb.height());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    base.pixels()[i] = rgb.pixels()[i].cast<float>() / 255.0f;
  }
  pyr.color.push_back(std::move(base));
  pyr.intrinsics.push_back(intr);
  for (int l = 1; l < levels; ++l) {
    pyr.color.push_back(downsample_mean(pyr.color.back()));
    pyr.intrinsics.push_back(pyr.intrinsics.back().half());
  }
  pyr.grad_x.resize(pyr.color.size());
  pyr.grad_y.resize(pyr.color.size());
  for (int l = 0; l < pyr.levels(); ++l) {
    image_gradients(pyr.color[static_cast<std::size_t>(l)], pyr.grad_x[static_cast<std::size_t>(l)],
                    pyr.grad_y[static_cast<std::size_t>(l)]);
  }
  return pyr;
}

}  // namespace voxfuse
