#pragma once

// Temporal-shift respiration network:
//
//   conv3x3 + batchnorm stem
//   -> per block: temporal shift -> conv3x3 -> tanh -> attention gate -> 2x2 avg pool
//   -> global spatial average -> dense (shared over time) -> one value per frame
//
// ModelState is templated so that gradient checks can run in double while
// training and checkpoints use float.

#include <cstdint>
#include <string>
#include <vector>

#include "breathflow/flow.hpp"
#include "breathflow/signal.hpp"
#include "breathflow/spectral_loss.hpp"
#include "breathflow/tensor.hpp"

namespace breathflow {

struct NetConfig {
  int chunk_len = 150;  // frames at 5 Hz
  int in_channels = 3;  // H, S, V
  std::vector<int> block_channels{16, 32};
  double tsm_fraction = 0.25;
  int input_size = 96;  // square input side; 96 outside of tests

  /// Throws kInvalidArgument on chunk_len < 50, fraction outside [0, 0.5],
  /// channel counts not divisible by 4, or an input too small for the pools.
  void validate() const;
};

struct TrainConfig {
  LossKind loss = LossKind::kSpectralBandpass;
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 1;  // chunks per step
  std::uint64_t seed = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

template <typename T>
struct ModelState {
  NetConfig config;
  // Parameters in a fixed order; names come from param_names(config).
  std::vector<Tensor<T>> params;
  // Stem batch-norm running statistics.
  Tensor<T> running_mean;
  Tensor<T> running_var;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  // Adam moments, parallel to params; empty until the first update.
  std::vector<Tensor<T>> adam_m;
  std::vector<Tensor<T>> adam_v;

  template <typename U>
  ModelState<U> cast() const;
};

/// stem.conv.weight, stem.conv.bias, stem.bn.gamma, stem.bn.beta,
/// blocks.<i>.conv.weight, blocks.<i>.conv.bias, blocks.<i>.gate.weight,
/// blocks.<i>.gate.bias, head.weight, head.bias
std::vector<std::string> param_names(const NetConfig& config);
std::vector<std::vector<std::size_t>> param_shapes(const NetConfig& config);

/// Conv and dense weights ~ N(0, 1 / fan_in), gate weights ~ N(0, 1 / C),
/// biases 0, gamma 1, beta 0; running mean 0, variance 1.
template <typename T>
ModelState<T> init_model(const NetConfig& config, std::uint64_t seed);

/// [len, 3, S, S] network input from clip fields [start, start + len); each
/// HSV channel is z-scored over the chunk (a constant channel becomes 0).
template <typename T>
Tensor<T> prepare_chunk(const FlowClip& clip, std::size_t start, std::size_t len);

/// One value per frame. train_mode uses batch statistics in the stem
/// batch-norm (running statistics are not touched here).
template <typename T>
std::vector<T> forward_chunk(const ModelState<T>& state, const Tensor<T>& chunk,
                             bool train_mode);

template <typename T>
struct TrainSample {
  Tensor<T> chunk;          // [len, 3, S, S]
  std::vector<double> ref;  // length len, 5 Hz
};

template <typename T>
struct LossAndGrads {
  double loss = 0.0;              // mean over the batch
  std::vector<Tensor<T>> grads;   // parallel to params
  // Per-sample stem statistics for the running-average update.
  std::vector<std::vector<T>> batch_mean;
  std::vector<std::vector<T>> batch_var;
  std::size_t count_per_channel = 0;
};

/// Train-mode forward and reverse pass over every sample. Throws
/// kNumerical "numerical divergence in <layer>" on non-finite activations and
/// "non-finite gradient for <param>" on NaN/inf gradients.
template <typename T>
LossAndGrads<T> loss_and_grads(const ModelState<T>& state,
                               const std::vector<TrainSample<T>>& batch, LossKind loss);

/// loss_and_grads followed by an Adam update and a running-statistics update.
/// learning_rate == 0 only evaluates: the state is left untouched.
template <typename T>
double train_step(ModelState<T>& state, const std::vector<TrainSample<T>>& batch,
                  const TrainConfig& cfg);

struct ClipPrediction {
  Waveform waveform;   // concatenated raw network output, 5 Hz
  Waveform filtered;   // band-passed
  RateEstimate rate;
  std::size_t chunks = 0;
};

/// Non-overlapping chunks of chunk_len (a trailing partial chunk is dropped),
/// concatenated, band-passed, then rate-estimated. Throws "clip too short"
/// if the clip holds fewer than chunk_len fields.
template <typename T>
ClipPrediction predict_clip(const ModelState<T>& state, const FlowClip& clip);

}  // namespace breathflow
