#pragma once

#include <vector>

#include "voxfuse/core/image.hpp"
#include "voxfuse/core/pose.hpp"

namespace voxfuse {

enum class TrackerType : std::uint8_t { icp, color, icp_ren };

struct TrackerSettings {
  TrackerType type = TrackerType::icp;
  int hierarchy_levels = 5;
  int rotation_only_levels = 2;   // coarsest levels solve rotation only
  float icp_dist_threshold = 0.1f;
  bool skip_points = false;       // colour tracker: use every other point
  float ren_sigma = 10.0f;        // basin-of-attraction scale, SDF units
  int max_iterations = 20;
  float convergence_eps = 1e-5f;
  int min_valid_points = 30;
  double max_condition = 1e8;
};

/// Camera pose plus the rendered model maps the trackers align against.
struct TrackingState {
  Pose pose;  // world -> camera
  Image2D<Vec4f> points;   // world-space surface points, w = validity
  Image2D<Vec4f> normals;  // unit surface normals, w = validity
  std::vector<Vec3f> surface_points;  // stride-subsampled, for the colour tracker
  std::vector<Vec3f> surface_colors;  // matching colours in [0,1]
  bool maps_valid = false;
};

struct TrackingResult {
  Pose pose;
  bool ok = false;
  int iterations = 0;
  double final_cost = 0.0;
  int valid_points = 0;
};

}  // namespace voxfuse
