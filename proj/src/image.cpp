#include "breathflow/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "breathflow/error.hpp"

namespace breathflow {

Plane::Plane(int width, int height, float fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
  require(width >= 0 && height >= 0, ErrorCode::kInvalidArgument, "negative image size");
}

float Plane::sample(float x, float y) const {
  x = std::clamp(x, 0.0f, static_cast<float>(width_ - 1));
  y = std::clamp(y, 0.0f, static_cast<float>(height_ - 1));
  const int x0 = std::min(static_cast<int>(x), width_ - 1);
  const int y0 = std::min(static_cast<int>(y), height_ - 1);
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const float fx = x - static_cast<float>(x0);
  const float fy = y - static_cast<float>(y0);
  const float top = at(x0, y0) + fx * (at(x1, y0) - at(x0, y0));
  const float bottom = at(x0, y1) + fx * (at(x1, y1) - at(x0, y1));
  return top + fy * (bottom - top);
}

GrayFrame::GrayFrame(Plane pixels) : pixels_(std::move(pixels)) {
  require(pixels_.width() >= kMinSide && pixels_.height() >= kMinSide,
          ErrorCode::kInvalidArgument, "frame must be at least 16x16");
  for (float v : pixels_.data())
    require(std::isfinite(v) && v >= 0.0f && v <= 1.0f, ErrorCode::kDataError,
            "frame intensity outside [0, 1]");
}

Plane resize_bilinear(const Plane& src, int width, int height) {
  require(width > 0 && height > 0, ErrorCode::kInvalidArgument, "resize to empty image");
  if (width == src.width() && height == src.height()) return src;
  Plane out(width, height);
  const float sx = static_cast<float>(src.width()) / static_cast<float>(width);
  const float sy = static_cast<float>(src.height()) / static_cast<float>(height);
  for (int y = 0; y < height; ++y) {
    const float fy = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
    for (int x = 0; x < width; ++x)
      out.at(x, y) = src.sample((static_cast<float>(x) + 0.5f) * sx - 0.5f, fy);
  }
  return out;
}

Plane filter_rows(const Plane& src, std::span<const float> kernel) {
  const int half = static_cast<int>(kernel.size() / 2);
  const int w = src.width();
  Plane out(w, src.height());
  for (int y = 0; y < src.height(); ++y) {
    const float* in = src.row(y);
    float* o = out.row(y);
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -half; k <= half; ++k)
        acc += kernel[k + half] * in[std::clamp(x + k, 0, w - 1)];
      o[x] = acc;
    }
  }
  return out;
}

Plane filter_cols(const Plane& src, std::span<const float> kernel) {
  const int half = static_cast<int>(kernel.size() / 2);
  const int h = src.height();
  Plane out(src.width(), h);
  for (int y = 0; y < h; ++y) {
    float* o = out.row(y);
    for (int k = -half; k <= half; ++k) {
      const float* in = src.row(std::clamp(y + k, 0, h - 1));
      const float c = kernel[k + half];
      for (int x = 0; x < src.width(); ++x) o[x] += c * in[x];
    }
  }
  return out;
}

Plane lowpass5(const Plane& src) {
  static constexpr std::array<float, 5> k{1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
  return filter_cols(filter_rows(src, k), k);
}

}  // namespace breathflow
