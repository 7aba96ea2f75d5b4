#include "breathflow/kernels.hpp"

#include <algorithm>
#include <vector>

namespace breathflow::kernels {
namespace {

inline void relax_pixel(const FlowSystem& s, std::span<float> du, std::span<float> dv, int x,
                        int y, float omega) {
  const int w = s.width;
  const int i = y * w + x;
  float wsum = 0.0f, s1 = 0.0f, s2 = 0.0f;
  if (x > 0) {
    const float e = s.wx[i - 1];
    wsum += e;
    s1 += e * du[i - 1];
    s2 += e * dv[i - 1];
  }
  if (x < w - 1) {
    const float e = s.wx[i];
    wsum += e;
    s1 += e * du[i + 1];
    s2 += e * dv[i + 1];
  }
  if (y > 0) {
    const float e = s.wy[i - w];
    wsum += e;
    s1 += e * du[i - w];
    s2 += e * dv[i - w];
  }
  if (y < s.height - 1) {
    const float e = s.wy[i];
    wsum += e;
    s1 += e * du[i + w];
    s2 += e * dv[i + w];
  }
  const float diag = s.alpha * wsum + s.damping;
  const float m11 = s.a11[i] + diag;
  const float m22 = s.a22[i] + diag;
  const float m12 = s.a12[i];
  const float r1 = s.b1[i] + s.alpha * s1;
  const float r2 = s.b2[i] + s.alpha * s2;
  const float inv_det = 1.0f / (m11 * m22 - m12 * m12);
  const float u_star = (m22 * r1 - m12 * r2) * inv_det;
  const float v_star = (m11 * r2 - m12 * r1) * inv_det;
  du[i] += omega * (u_star - du[i]);
  dv[i] += omega * (v_star - dv[i]);
}

std::size_t plane_size(const ConvShape& s) {
  return static_cast<std::size_t>(s.height) * s.width;
}

}  // namespace

void relax_red_black(const FlowSystem& sys, std::span<float> du, std::span<float> dv,
                     int sweeps, float omega) {
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int colour = 0; colour < 2; ++colour) {
#pragma omp parallel for schedule(static)
      for (int y = 0; y < sys.height; ++y)
        for (int x = (y + colour) & 1; x < sys.width; x += 2) relax_pixel(sys, du, dv, x, y, omega);
    }
  }
}

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                     std::span<const T> bias, std::span<T> out) {
  const int h = s.height, w = s.width;
  const std::size_t hw = plane_size(s);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < s.frames; ++t) {
    for (int co = 0; co < s.out_channels; ++co) {
      T* o = out.data() + (static_cast<std::size_t>(t) * s.out_channels + co) * hw;
      std::fill(o, o + hw, bias[co]);
      for (int ci = 0; ci < s.in_channels; ++ci) {
        const T* src = in.data() + (static_cast<std::size_t>(t) * s.in_channels + ci) * hw;
        const T* k = weight.data() + (static_cast<std::size_t>(co) * s.in_channels + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const int y0 = std::max(0, 1 - ky), y1 = std::min(h, h + 1 - ky);
          for (int kx = 0; kx < 3; ++kx) {
            const T wv = k[ky * 3 + kx];
            const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
            for (int y = y0; y < y1; ++y) {
              T* orow = o + static_cast<std::size_t>(y) * w;
              const T* irow = src + static_cast<std::size_t>(y + ky - 1) * w + (kx - 1);
              for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3x3_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                      std::span<const T> grad_out, std::span<T> grad_in,
                      std::span<T> grad_weight, std::span<T> grad_bias) {
  const int h = s.height, w = s.width;
  const std::size_t hw = plane_size(s);

  if (!grad_in.empty()) {
#pragma omp parallel for schedule(static)
    for (int t = 0; t < s.frames; ++t) {
      T* gi_frame = grad_in.data() + static_cast<std::size_t>(t) * s.in_channels * hw;
      std::fill(gi_frame, gi_frame + s.in_channels * hw, T(0));
      for (int co = 0; co < s.out_channels; ++co) {
        const T* g = grad_out.data() + (static_cast<std::size_t>(t) * s.out_channels + co) * hw;
        for (int ci = 0; ci < s.in_channels; ++ci) {
          T* gi = gi_frame + static_cast<std::size_t>(ci) * hw;
          const T* k = weight.data() + (static_cast<std::size_t>(co) * s.in_channels + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int y0 = std::max(0, 1 - ky), y1 = std::min(h, h + 1 - ky);
            for (int kx = 0; kx < 3; ++kx) {
              const T wv = k[ky * 3 + kx];
              const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
              for (int y = y0; y < y1; ++y) {
                const T* grow = g + static_cast<std::size_t>(y) * w;
                T* irow = gi + static_cast<std::size_t>(y + ky - 1) * w + (kx - 1);
                for (int x = x0; x < x1; ++x) irow[x] += wv * grow[x];
              }
            }
          }
        }
      }
    }
  }

  // Weight gradients reduce over frames; parallelising over output channels
  // keeps the summation order fixed regardless of thread count.
#pragma omp parallel for schedule(static)
  for (int co = 0; co < s.out_channels; ++co) {
    std::vector<T> acc(static_cast<std::size_t>(s.in_channels) * 9 * w, T(0));
    T bias_acc = 0;
    for (int t = 0; t < s.frames; ++t) {
      const T* g = grad_out.data() + (static_cast<std::size_t>(t) * s.out_channels + co) * hw;
      for (int y = 0; y < h; ++y) {
        const T* grow = g + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) bias_acc += grow[x];
        for (int ci = 0; ci < s.in_channels; ++ci) {
          const T* src = in.data() + (static_cast<std::size_t>(t) * s.in_channels + ci) * hw;
          for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= h) continue;
            const T* irow = src + static_cast<std::size_t>(yy) * w;
            for (int kx = 0; kx < 3; ++kx) {
              T* a = acc.data() + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * w;
              const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
              const T* shifted = irow + (kx - 1);
              for (int x = x0; x < x1; ++x) a[x] += grow[x] * shifted[x];
            }
          }
        }
      }
    }
    for (int ci = 0; ci < s.in_channels; ++ci)
      for (int k = 0; k < 9; ++k) {
        const T* a = acc.data() + (static_cast<std::size_t>(ci) * 9 + k) * w;
        T sum = 0;
        for (int x = 0; x < w; ++x) sum += a[x];
        grad_weight[(static_cast<std::size_t>(co) * s.in_channels + ci) * 9 + k] = sum;
      }
    grad_bias[co] = bias_acc;
  }
}

namespace reference {

void relax_red_black(const FlowSystem& sys, std::span<float> du, std::span<float> dv,
                     int sweeps, float omega) {
  for (int sweep = 0; sweep < sweeps; ++sweep)
    for (int colour = 0; colour < 2; ++colour)
      for (int y = 0; y < sys.height; ++y)
        for (int x = 0; x < sys.width; ++x)
          if (((x + y) & 1) == colour) relax_pixel(sys, du, dv, x, y, omega);
}

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                     std::span<const T> bias, std::span<T> out) {
  auto at = [&](std::span<const T> a, int t, int c, int channels, int y, int x) -> T {
    if (y < 0 || y >= s.height || x < 0 || x >= s.width) return T(0);
    return a[((static_cast<std::size_t>(t) * channels + c) * s.height + y) * s.width + x];
  };
  for (int t = 0; t < s.frames; ++t)
    for (int co = 0; co < s.out_channels; ++co)
      for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
          T acc = bias[co];
          for (int ci = 0; ci < s.in_channels; ++ci)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx)
                acc += weight[((static_cast<std::size_t>(co) * s.in_channels + ci) * 3 + ky) * 3 + kx] *
                       at(in, t, ci, s.in_channels, y + ky - 1, x + kx - 1);
          out[((static_cast<std::size_t>(t) * s.out_channels + co) * s.height + y) * s.width + x] = acc;
        }
}

template <typename T>
void conv3x3_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                      std::span<const T> grad_out, std::span<T> grad_in,
                      std::span<T> grad_weight, std::span<T> grad_bias) {
  const auto idx = [&](int t, int c, int channels, int y, int x) {
    return ((static_cast<std::size_t>(t) * channels + c) * s.height + y) * s.width + x;
  };
  std::fill(grad_in.begin(), grad_in.end(), T(0));
  std::fill(grad_weight.begin(), grad_weight.end(), T(0));
  std::fill(grad_bias.begin(), grad_bias.end(), T(0));
  for (int t = 0; t < s.frames; ++t)
    for (int co = 0; co < s.out_channels; ++co)
      for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
          const T g = grad_out[idx(t, co, s.out_channels, y, x)];
          grad_bias[co] += g;
          for (int ci = 0; ci < s.in_channels; ++ci)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int yy = y + ky - 1, xx = x + kx - 1;
                if (yy < 0 || yy >= s.height || xx < 0 || xx >= s.width) continue;
                const std::size_t wi = ((static_cast<std::size_t>(co) * s.in_channels + ci) * 3 + ky) * 3 + kx;
                grad_weight[wi] += g * in[idx(t, ci, s.in_channels, yy, xx)];
                if (!grad_in.empty()) grad_in[idx(t, ci, s.in_channels, yy, xx)] += g * weight[wi];
              }
        }
}

}  // namespace reference

#define BREATHFLOW_INSTANTIATE(T)                                                            \
  template void conv3x3_forward<T>(const ConvShape&, std::span<const T>, std::span<const T>, \
                                   std::span<const T>, std::span<T>);                        \
  template void conv3x3_backward<T>(const ConvShape&, std::span<const T>, std::span<const T>,\
                                    std::span<const T>, std::span<T>, std::span<T>,          \
                                    std::span<T>);                                           \
  template void reference::conv3x3_forward<T>(const ConvShape&, std::span<const T>,          \
                                              std::span<const T>, std::span<const T>,        \
                                              std::span<T>);                                 \
  template void reference::conv3x3_backward<T>(const ConvShape&, std::span<const T>,         \
                                               std::span<const T>, std::span<const T>,       \
                                               std::span<T>, std::span<T>, std::span<T>);

BREATHFLOW_INSTANTIATE(float)
BREATHFLOW_INSTANTIATE(double)
#undef BREATHFLOW_INSTANTIATE

}  // namespace breathflow::kernels
