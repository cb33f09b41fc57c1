#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "voxfuse/core/intrinsics.hpp"
#include "voxfuse/core/pose.hpp"

namespace voxfuse {

class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Kinect-like disparity model: depth = 8 * b * fx_depth / (a - disparity).
struct DisparityCalib {
  double a = 0;
  double b = 0;
};

/// Calibration file contents: per-camera image size, focal length and
/// principal point, the RGB-to-depth rigid transform, and the disparity
/// scalars.
struct Calibration {
  Intrinsics rgb;
  Intrinsics depth;
  Pose rgb_to_depth;
  DisparityCalib disparity;
};

Calibration parse_calibration(std::istream& in);
Calibration parse_calibration_text(const std::string& text);
Calibration load_calibration(const std::string& path);
std::string serialize_calibration(const Calibration& c);

/// Converts a raw disparity sample to metres. Returns 0 (invalid) at or past
/// the pole a - d <= 0 and beyond max_depth.
inline float disparity_to_depth(std::uint16_t d, float a, float b, float fx_depth,
                                float max_depth = 8.0f) {
  const float denom = a - static_cast<float>(d);
  if (denom <= 0.0f) return 0.0f;
  const float depth = 8.0f * b * fx_depth / denom;
  return (depth > 0.0f && depth <= max_depth) ? depth : 0.0f;
}

/// Inverse of disparity_to_depth, used to synthesize recorded sequences.
/// Invalid depths map to saturated disparity, which converts back to 0.
inline std::uint16_t depth_to_disparity(float depth, float a, float b, float fx_depth) {
  if (depth <= 0.0f) return 65535;
  const float d = a - 8.0f * b * fx_depth / depth;
  if (d < 0.0f || d > 65535.0f) return 65535;
  return static_cast<std::uint16_t>(d + 0.5f);
}

}  // namespace voxfuse
