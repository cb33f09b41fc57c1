#pragma once

#include "voxfuse/core/image.hpp"
#include "voxfuse/io/calibration.hpp"

namespace voxfuse {

/// One calibrated input frame: depth in metres (<= 0 marks missing samples)
/// plus an optional RGB image.
struct View {
  Calibration calib;
  Image2D<float> depth;
  Image2D<Vec3u8> rgb;

  bool has_rgb() const { return !rgb.empty(); }
};

inline Image2D<float> disparity_image_to_depth(const Image2D<std::uint16_t>& disparity,
                                               const Calibration& calib, float max_depth = 8.0f) {
  Image2D<float> depth(disparity.width(), disparity.height(), 0.0f);
  for (std::size_t i = 0; i < disparity.size(); ++i) {
    depth.pixels()[i] =
        disparity_to_depth(disparity.pixels()[i], static_cast<float>(calib.disparity.a),
                           static_cast<float>(calib.disparity.b),
                           static_cast<float>(calib.depth.fx), max_depth);
  }
  return depth;
}

}  // namespace voxfuse
