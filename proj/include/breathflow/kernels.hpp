#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP implementation used by
// the library and a plain serial implementation under `reference` that the
// tests and the benchmark compare against.

#include <span>

namespace breathflow::kernels {

/// Per-pixel linearised flow system for one IRLS step:
///
///   [a11 + W + d   a12        ] [du]   [b1 + alpha * sum_j w_ij du_j]
///   [a12           a22 + W + d] [dv] = [b2 + alpha * sum_j w_ij dv_j]
///
/// with W = alpha * sum_j w_ij over the 4-neighbourhood and d a small damping.
/// wx[i] weights the edge (x, y)-(x+1, y); wy[i] weights (x, y)-(x, y+1).
struct FlowSystem {
  int width = 0;
  int height = 0;
  std::span<const float> a11, a12, a22, b1, b2, wx, wy;
  float alpha = 0.0f;
  float damping = 0.0f;
};

/// Red-black over-relaxed block Gauss-Seidel. Within one colour every pixel
/// only reads the other colour, so the parallel version is bit-identical to
/// the serial one.
void relax_red_black(const FlowSystem& sys, std::span<float> du, std::span<float> dv,
                     int sweeps, float omega);

/// 3x3 same-padded convolution over a [frames, channels, height, width] stack.
/// weight is [cout, cin, 3, 3].
struct ConvShape {
  int frames = 0;
  int in_channels = 0;
  int out_channels = 0;
  int height = 0;
  int width = 0;
};

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                     std::span<const T> bias, std::span<T> out);

/// grad_in may be empty (no input gradient needed). grad_weight and grad_bias
/// are overwritten, not accumulated.
template <typename T>
void conv3x3_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                      std::span<const T> grad_out, std::span<T> grad_in,
                      std::span<T> grad_weight, std::span<T> grad_bias);

namespace reference {

void relax_red_black(const FlowSystem& sys, std::span<float> du, std::span<float> dv,
                     int sweeps, float omega);

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                     std::span<const T> bias, std::span<T> out);

template <typename T>
void conv3x3_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                      std::span<const T> grad_out, std::span<T> grad_in,
                      std::span<T> grad_weight, std::span<T> grad_bias);

}  // namespace reference
}  // namespace breathflow::kernels
