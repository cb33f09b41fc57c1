#pragma once

#include <cassert>
#include <cmath>
#include <optional>
#include <vector>

#include "voxfuse/core/types.hpp"

namespace voxfuse {

/// Row-major 2D image container. Pixel (0,0) is top-left.
template <typename T>
class Image2D {
 public:
  Image2D() = default;
  Image2D(int width, int height, const T& fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

  T& at(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& at(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::vector<T>& pixels() { return data_; }
  const std::vector<T>& pixels() const { return data_; }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Image2D& o) const {
    return width_ == o.width_ && height_ == o.height_ && data_ == o.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Bilinear sample at (x, y) in pixel coordinates; nullopt outside the image.
/// T must support scalar multiplication and addition (float, Vec2f, Vec3f, ...).
template <typename T>
std::optional<T> sample_bilinear(const Image2D<T>& img, float x, float y) {
  if (x < 0.f || y < 0.f || x > static_cast<float>(img.width() - 1) ||
      y > static_cast<float>(img.height() - 1)) {
    return std::nullopt;
  }
  int ix = std::min(static_cast<int>(x), img.width() - 2);
  int iy = std::min(static_cast<int>(y), img.height() - 2);
  if (img.width() == 1) ix = 0;
  if (img.height() == 1) iy = 0;
  const float fx = x - static_cast<float>(ix);
  const float fy = y - static_cast<float>(iy);
  const int x1 = std::min(ix + 1, img.width() - 1);
  const int y1 = std::min(iy + 1, img.height() - 1);
  const T a = img.at(ix, iy) * ((1.f - fx) * (1.f - fy));
  const T b = img.at(x1, iy) * (fx * (1.f - fy));
  const T c = img.at(ix, y1) * ((1.f - fx) * fy);
  const T d = img.at(x1, y1) * (fx * fy);
  return a + b + c + d;
}

}  // namespace voxfuse
