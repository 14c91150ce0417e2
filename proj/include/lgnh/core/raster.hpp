#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lgnh/core/error.hpp"

namespace lgnh {

/// Row-major, channel-interleaved raster.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0 || channels <= 0) {
      throw InputError("raster dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  T& at(int row, int col, int ch = 0) { return data_[index(row, col, ch)]; }
  const T& at(int row, int col, int ch = 0) const { return data_[index(row, col, ch)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <typename U>
  bool same_shape(const Raster<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Raster&) const = default;

 protected:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

/// Three-channel colour image with every value in [0,1]. Also used for the
/// hematoxylin-projected image.
class RgbTile : public Raster<double> {
 public:
  RgbTile() = default;
  RgbTile(int width, int height, double fill = 0.0) : Raster(width, height, 3, fill) {}

  /// Throws InputError if any value is outside [0,1] or not finite.
  void validate() const;
};

/// HSI representation: channel 0 hue, 1 saturation, 2 intensity, all in [0,1].
class HsiImage : public Raster<double> {
 public:
  HsiImage() = default;
  HsiImage(int width, int height) : Raster(width, height, 3, 0.0) {}
};

class GrayMap : public Raster<double> {
 public:
  GrayMap() = default;
  GrayMap(int width, int height, double fill = 0.0) : Raster(width, height, 1, fill) {}
};

/// Per-pixel foreground probability.
class Heatmap : public Raster<double> {
 public:
  Heatmap() = default;
  Heatmap(int width, int height, double fill = 0.0) : Raster(width, height, 1, fill) {}
};

/// {0,1} raster.
class BinaryMask : public Raster<std::uint8_t> {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, std::uint8_t fill = 0) : Raster(width, height, 1, fill) {}
};

/// 0 = background; each positive label is one 8-connected nucleus.
class InstanceMask : public Raster<std::int32_t> {
 public:
  InstanceMask() = default;
  InstanceMask(int width, int height) : Raster(width, height, 1, 0) {}

  std::int32_t max_label() const;
  /// Number of distinct positive labels.
  std::size_t instance_count() const;
  BinaryMask foreground() const;
};

/// Reflect-101 index into [0, n).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

template <typename A, typename B>
void require_same_shape(const Raster<A>& a, const Raster<B>& b, const char* what) {
  if (!a.same_shape(b)) throw DimensionMismatch(what);
}

}  // namespace lgnh
