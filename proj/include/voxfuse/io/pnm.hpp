#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "voxfuse/core/image.hpp"

namespace voxfuse {

class PnmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary PGM (P5) with maxval 65535; samples are big-endian 16-bit, as used
/// for raw Kinect disparity recordings.
Image2D<std::uint16_t> read_pgm16(std::istream& in);
Image2D<std::uint16_t> load_pgm16(const std::string& path);
void write_pgm16(std::ostream& out, const Image2D<std::uint16_t>& img);
void save_pgm16(const std::string& path, const Image2D<std::uint16_t>& img);

/// Binary PPM (P6) with maxval 255.
Image2D<Vec3u8> read_ppm(std::istream& in);
Image2D<Vec3u8> load_ppm(const std::string& path);
void write_ppm(std::ostream& out, const Image2D<Vec3u8>& img);
void save_ppm(const std::string& path, const Image2D<Vec3u8>& img);

}  // namespace voxfuse
