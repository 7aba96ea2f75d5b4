#pragma once

// Differentiable primitives of the respiration network. Every forward has a
// matching backward taking the upstream gradient; parameter gradients are
// written (not accumulated) into the caller's tensors.

#include <vector>

#include "breathflow/tensor.hpp"

namespace breathflow::nn {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Channels per shifted group: floor(fraction * C / 2).
std::size_t shift_fold(std::size_t channels, double fraction);

/// The first fold channels take the previous frame's value (shift +1 in
/// time), the next fold channels take the next frame's value (shift -1);
/// vacated slots are zero. reverse swaps the two directions, which is also
/// the adjoint used in backward.
template <typename T>
Tensor<T> temporal_shift(const Tensor<T>& x, double fraction, bool reverse = false);

template <typename T>
Tensor<T> temporal_shift_backward(const Tensor<T>& grad_out, double fraction);

template <typename T>
Tensor<T> conv3x3(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Returns the input gradient (empty tensor if need_input_grad is false).
template <typename T>
Tensor<T> conv3x3_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                           Tensor<T>& grad_weight, Tensor<T>& grad_bias, bool need_input_grad);

template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
  std::vector<T> batch_mean;
  std::vector<T> batch_var;  // biased
};

/// Per-channel statistics over frames and pixels.
template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          BatchNormCache<T>& cache);

template <typename T>
Tensor<T> batchnorm_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                         const Tensor<T>& running_mean, const Tensor<T>& running_var);

template <typename T>
Tensor<T> batchnorm_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                             const BatchNormCache<T>& cache, Tensor<T>& grad_gamma,
                             Tensor<T>& grad_beta);

/// Exponential moving update with kBatchNormMomentum; the variance uses the
/// unbiased batch estimate.
template <typename T>
void update_running_stats(const BatchNormCache<T>& cache, std::size_t count_per_channel,
                          Tensor<T>& running_mean, Tensor<T>& running_var);

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& grad_out);

template <typename T>
struct GateCache {
  Tensor<T> mask;          // sigmoid(1x1 conv), [T, 1, H, W]
  std::vector<T> mask_sum;  // per frame
  Tensor<T> gate;          // [T, 1, H, W]
};

/// m = sigmoid(sum_c w_c x_c + b); g = H W m / (2 sum |m|) per frame;
/// output x * g broadcast over channels. Each frame's gate averages 0.5.
template <typename T>
Tensor<T> attention_gate(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                         GateCache<T>& cache);

template <typename T>
Tensor<T> attention_gate_backward(const Tensor<T>& x, const Tensor<T>& weight,
                                  const GateCache<T>& cache, const Tensor<T>& grad_out,
                                  Tensor<T>& grad_weight, Tensor<T>& grad_bias);

/// 2x2 mean pooling; odd trailing rows and columns are dropped.
template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x);

template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& in_shape);

/// [T, C, H, W] -> [T, C]
template <typename T>
Tensor<T> global_avg(const Tensor<T>& x);

template <typename T>
Tensor<T> global_avg_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& in_shape);

/// [T, C] -> [T], weights shared across frames.
template <typename T>
Tensor<T> dense(const Tensor<T>& features, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& features, const Tensor<T>& weight,
                         const Tensor<T>& grad_out, Tensor<T>& grad_weight, Tensor<T>& grad_bias);

}  // namespace breathflow::nn
