#pragma once

#include <algorithm>
#include <cstdint>

#include "voxfuse/core/types.hpp"

namespace voxfuse {

/// Fixed-point SDF representation: signed 16-bit over [-1, 1].
inline float sdf_value_to_float(std::int16_t v) { return static_cast<float>(v) / 32767.0f; }

/// Clamps to [-1, 1] before quantizing; the raw cast would wrap for
/// out-of-range inputs. The cast truncates toward zero, so the roundtrip
/// error is below one quantization step.
inline std::int16_t sdf_float_to_value(float f) {
  f = std::clamp(f, -1.0f, 1.0f);
  return static_cast<std::int16_t>(f * 32767.0f);
}

struct VoxelS {
  using SdfStorage = std::int16_t;
  static constexpr bool has_color = false;

  static std::int16_t sdf_initial() { return 32767; }
  static float sdf_to_float(std::int16_t v) { return sdf_value_to_float(v); }
  static std::int16_t sdf_from_float(float f) { return sdf_float_to_value(f); }

  std::int16_t sdf = 32767;
  std::uint8_t w_depth = 0;

  bool operator==(const VoxelS&) const = default;
};

struct VoxelSRgb {
  using SdfStorage = std::int16_t;
  static constexpr bool has_color = true;

  static std::int16_t sdf_initial() { return 32767; }
  static float sdf_to_float(std::int16_t v) { return sdf_value_to_float(v); }
  static std::int16_t sdf_from_float(float f) { return sdf_float_to_value(f); }

  std::int16_t sdf = 32767;
  std::uint8_t w_depth = 0;
  Vec3u8 clr = Vec3u8::Zero();
  std::uint8_t w_color = 0;

  bool operator==(const VoxelSRgb& o) const {
    return sdf == o.sdf && w_depth == o.w_depth && clr == o.clr && w_color == o.w_color;
  }
};

struct VoxelF {
  using SdfStorage = float;
  static constexpr bool has_color = false;

  static float sdf_initial() { return 1.0f; }
  static float sdf_to_float(float v) { return v; }
  static float sdf_from_float(float f) { return f; }

  float sdf = 1.0f;
  std::uint8_t w_depth = 0;

  bool operator==(const VoxelF&) const = default;
};

struct VoxelFRgb {
  using SdfStorage = float;
  static constexpr bool has_color = true;

  static float sdf_initial() { return 1.0f; }
  static float sdf_to_float(float v) { return v; }
  static float sdf_from_float(float f) { return f; }

  float sdf = 1.0f;
  std::uint8_t w_depth = 0;
  Vec3u8 clr = Vec3u8::Zero();
  std::uint8_t w_color = 0;

  bool operator==(const VoxelFRgb& o) const {
    return sdf == o.sdf && w_depth == o.w_depth && clr == o.clr && w_color == o.w_color;
  }
};

template <typename V>
inline float voxel_sdf(const V& v) {
  return V::sdf_to_float(v.sdf);
}

enum class VoxelType : std::uint8_t { s = 1, s_rgb = 2, f = 3, f_rgb = 4 };

/// Little-endian serialization used by the host block store.
template <typename V>
struct VoxelCodec;

namespace detail {
inline void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v & 0xFF);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}
inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_f32(std::uint8_t* p, float f) {
  std::uint32_t u;
  static_assert(sizeof(u) == sizeof(f));
  __builtin_memcpy(&u, &f, 4);
  p[0] = static_cast<std::uint8_t>(u & 0xFF);
  p[1] = static_cast<std::uint8_t>((u >> 8) & 0xFF);
  p[2] = static_cast<std::uint8_t>((u >> 16) & 0xFF);
  p[3] = static_cast<std::uint8_t>(u >> 24);
}
inline float get_f32(const std::uint8_t* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  __builtin_memcpy(&f, &u, 4);
  return f;
}
}  // namespace detail

template <>
struct VoxelCodec<VoxelS> {
  static constexpr int bytes = 3;
  static constexpr VoxelType tag = VoxelType::s;
  static void encode(const VoxelS& v, std::uint8_t* p) {
    detail::put_u16(p, static_cast<std::uint16_t>(v.sdf));
    p[2] = v.w_depth;
  }
  static void decode(const std::uint8_t* p, VoxelS& v) {
    v.sdf = static_cast<std::int16_t>(detail::get_u16(p));
    v.w_depth = p[2];
  }
};

template <>
struct VoxelCodec<VoxelSRgb> {
  static constexpr int bytes = 7;
  static constexpr VoxelType tag = VoxelType::s_rgb;
  static void encode(const VoxelSRgb& v, std::uint8_t* p) {
    detail::put_u16(p, static_cast<std::uint16_t>(v.sdf));
    p[2] = v.w_depth;
    p[3] = v.clr.x();
    p[4] = v.clr.y();
    p[5] = v.clr.z();
    p[6] = v.w_color;
  }
  static void decode(const std::uint8_t* p, VoxelSRgb& v) {
    v.sdf = static_cast<std::int16_t>(detail::get_u16(p));
    v.w_depth = p[2];
    v.clr = Vec3u8(p[3], p[4], p[5]);
    v.w_color = p[6];
  }
};

template <>
struct VoxelCodec<VoxelF> {
  static constexpr int bytes = 5;
  static constexpr VoxelType tag = VoxelType::f;
  static void encode(const VoxelF& v, std::uint8_t* p) {
    detail::put_f32(p, v.sdf);
    p[4] = v.w_depth;
  }
  static void decode(const std::uint8_t* p, VoxelF& v) {
    v.sdf = detail::get_f32(p);
    v.w_depth = p[4];
  }
};

template <>
struct VoxelCodec<VoxelFRgb> {
  static constexpr int bytes = 9;
  static constexpr VoxelType tag = VoxelType::f_rgb;
  static void encode(const VoxelFRgb& v, std::uint8_t* p) {
    detail::put_f32(p, v.sdf);
    p[4] = v.w_depth;
    p[5] = v.clr.x();
    p[6] = v.clr.y();
    p[7] = v.clr.z();
    p[8] = v.w_color;
  }
  static void decode(const std::uint8_t* p, VoxelFRgb& v) {
    v.sdf = detail::get_f32(p);
    v.w_depth = p[4];
    v.clr = Vec3u8(p[5], p[6], p[7]);
    v.w_color = p[8];
  }
};

}  // namespace voxfuse
