#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace breathflow {

/// Single-channel float image, row-major.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const float* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  /// Bilinear lookup with coordinates clamped to the image.
  float sample(float x, float y) const;

  bool operator==(const Plane&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Grayscale video frame with intensities in [0, 1] and both sides >= 16.
class GrayFrame {
 public:
  static constexpr int kMinSide = 16;

  explicit GrayFrame(Plane pixels);

  const Plane& pixels() const { return pixels_; }
  int width() const { return pixels_.width(); }
  int height() const { return pixels_.height(); }

 private:
  Plane pixels_;
};

/// Pixel-centre aligned bilinear resize.
Plane resize_bilinear(const Plane& src, int width, int height);

/// Separable [1 4 6 4 1] / 16 low-pass with clamped borders.
Plane lowpass5(const Plane& src);

/// Separable filter with an odd-length symmetric or antisymmetric kernel,
/// clamped borders.
Plane filter_rows(const Plane& src, std::span<const float> kernel);
Plane filter_cols(const Plane& src, std::span<const float> kernel);

}  // namespace breathflow
