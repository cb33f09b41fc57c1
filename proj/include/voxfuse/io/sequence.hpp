#pragma once

#include <optional>
#include <string>
#include <vector>

namespace voxfuse {

/// One recorded frame on disk: RGB (PPM) is optional, disparity (PGM) is not.
struct FramePair {
  int index = 0;
  std::string rgb_path;        // empty when the sequence has no colour
  std::string disparity_path;
};

struct SequenceScan {
  std::vector<FramePair> frames;   // sorted by index, disparity present
  int rgb_only = 0;                // indices with a PPM but no PGM
  int disparity_only = 0;          // indices with a PGM but no PPM
};

/// Scans a directory for numbered PPM/PGM files ("0000.ppm" / "0000.pgm",
/// arbitrary prefixes allowed) and pairs RGB and disparity images that share
/// an index.
SequenceScan scan_sequence_dir(const std::string& dir);

}  // namespace voxfuse
