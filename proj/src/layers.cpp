#include "breathflow/layers.hpp"

#include <algorithm>
#include <cmath>

#include "breathflow/error.hpp"
#include "breathflow/kernels.hpp"

namespace breathflow::nn {
namespace {

void require_rank4(const std::vector<std::size_t>& shape, const char* what) {
  require(shape.size() == 4, ErrorCode::kInvalidArgument,
          std::string(what) + ": expected a [T, C, H, W] tensor, got " + shape_string(shape));
}

template <typename T>
kernels::ConvShape conv_shape_of(const Tensor<T>& x, const Tensor<T>& weight) {
  return kernels::ConvShape{static_cast<int>(x.dim(0)), static_cast<int>(x.dim(1)),
                            static_cast<int>(weight.dim(0)), static_cast<int>(x.dim(2)),
                            static_cast<int>(x.dim(3))};
}

}  // namespace

std::size_t shift_fold(std::size_t channels, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(channels) / 2.0));
}

template <typename T>
Tensor<T> temporal_shift(const Tensor<T>& x, double fraction, bool reverse) {
  require_rank4(x.shape(), "temporal_shift");
  require(fraction >= 0.0 && fraction <= 0.5, ErrorCode::kInvalidArgument,
          "shift fraction must be in [0, 0.5]");
  const std::size_t frames = x.dim(0), channels = x.dim(1);
  require(frames > 0, ErrorCode::kInvalidArgument, "temporal_shift: no frames");
  const std::size_t fold = shift_fold(channels, fraction);
  const std::size_t hw = x.dim(2) * x.dim(3);
  Tensor<T> out(x.shape());
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < channels; ++c) {
      // +1: out[t] = x[t - 1]; -1: out[t] = x[t + 1]
      int dir = 0;
      if (c < fold) dir = 1;
      else if (c < 2 * fold) dir = -1;
      if (reverse) dir = -dir;
      const auto src_t = static_cast<std::ptrdiff_t>(t) - dir;
      T* o = out.data() + (t * channels + c) * hw;
      if (src_t < 0 || src_t >= static_cast<std::ptrdiff_t>(frames)) continue;  // zero fill
      const T* s = x.data() + (static_cast<std::size_t>(src_t) * channels + c) * hw;
      std::copy(s, s + hw, o);
    }
  return out;
}

template <typename T>
Tensor<T> temporal_shift_backward(const Tensor<T>& grad_out, double fraction) {
  return temporal_shift(grad_out, fraction, /*reverse=*/true);
}

template <typename T>
Tensor<T> conv3x3(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank4(x.shape(), "conv3x3");
  require(weight.rank() == 4 && weight.dim(1) == x.dim(1) && weight.dim(2) == 3 &&
              weight.dim(3) == 3 && bias.size() == weight.dim(0),
          ErrorCode::kInvalidArgument, "conv3x3: weight " + shape_string(weight.shape()) +
                                           " does not fit input " + shape_string(x.shape()));
  const auto s = conv_shape_of(x, weight);
  Tensor<T> out({x.dim(0), weight.dim(0), x.dim(2), x.dim(3)});
  kernels::conv3x3_forward<T>(s, x.values(), weight.values(), bias.values(), out.values());
  return out;
}

template <typename T>
Tensor<T> conv3x3_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                           Tensor<T>& grad_weight, Tensor<T>& grad_bias, bool need_input_grad) {
  const auto s = conv_shape_of(x, weight);
  Tensor<T> grad_in;
  if (need_input_grad) grad_in = Tensor<T>(x.shape());
  grad_weight = Tensor<T>(weight.shape());
  grad_bias = Tensor<T>({weight.dim(0)});
  kernels::conv3x3_backward<T>(s, x.values(), weight.values(), grad_out.values(),
                               grad_in.values(), grad_weight.values(), grad_bias.values());
  return grad_in;
}

template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          BatchNormCache<T>& cache) {
  require_rank4(x.shape(), "batchnorm");
  const std::size_t frames = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  const double count = static_cast<double>(frames * hw);
  cache.xhat = Tensor<T>(x.shape());
  cache.inv_std.assign(channels, T(0));
  cache.batch_mean.assign(channels, T(0));
  cache.batch_var.assign(channels, T(0));
  Tensor<T> out(x.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      const T* p = x.data() + (t * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) sum += p[i];
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      const T* p = x.data() + (t * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) ss += (p[i] - mean) * (p[i] - mean);
    }
    const double var = ss / count;
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
    cache.batch_mean[c] = static_cast<T>(mean);
    cache.batch_var[c] = static_cast<T>(var);
    cache.inv_std[c] = static_cast<T>(inv_std);
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t off = (t * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const T xh = static_cast<T>((x[off + i] - mean) * inv_std);
        cache.xhat[off + i] = xh;
        out[off + i] = gamma[c] * xh + beta[c];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                         const Tensor<T>& running_mean, const Tensor<T>& running_var) {
  require_rank4(x.shape(), "batchnorm");
  const std::size_t frames = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out(x.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const T inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + kBatchNormEps));
    const T scale = gamma[c] * inv_std;
    const T shift = beta[c] - running_mean[c] * scale;
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t off = (t * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) out[off + i] = x[off + i] * scale + shift;
    }
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                             const BatchNormCache<T>& cache, Tensor<T>& grad_gamma,
                             Tensor<T>& grad_beta) {
  const auto& shape = grad_out.shape();
  const std::size_t frames = shape[0], channels = shape[1], hw = shape[2] * shape[3];
  const double count = static_cast<double>(frames * hw);
  grad_gamma = Tensor<T>({channels});
  grad_beta = Tensor<T>({channels});
  Tensor<T> grad_in(shape);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t off = (t * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xhat += static_cast<double>(grad_out[off + i]) * cache.xhat[off + i];
      }
    }
    grad_gamma[c] = static_cast<T>(sum_dy_xhat);
    grad_beta[c] = static_cast<T>(sum_dy);
    const double k = static_cast<double>(gamma[c]) * cache.inv_std[c] / count;
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t off = (t * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i)
        grad_in[off + i] = static_cast<T>(
            k * (count * grad_out[off + i] - sum_dy - cache.xhat[off + i] * sum_dy_xhat));
    }
  }
  return grad_in;
}

template <typename T>
void update_running_stats(const BatchNormCache<T>& cache, std::size_t count_per_channel,
                          Tensor<T>& running_mean, Tensor<T>& running_var) {
  const double n = static_cast<double>(count_per_channel);
  const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
  for (std::size_t c = 0; c < cache.batch_mean.size(); ++c) {
    running_mean[c] = static_cast<T>((1.0 - kBatchNormMomentum) * running_mean[c] +
                                     kBatchNormMomentum * cache.batch_mean[c]);
    running_var[c] = static_cast<T>((1.0 - kBatchNormMomentum) * running_var[c] +
                                    kBatchNormMomentum * cache.batch_var[c] * unbias);
  }
}

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  return out;
}

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& grad_out) {
  Tensor<T> out(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = grad_out[i] * (T(1) - y[i] * y[i]);
  return out;
}

template <typename T>
Tensor<T> attention_gate(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                         GateCache<T>& cache) {
  require_rank4(x.shape(), "attention_gate");
  const std::size_t frames = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  require(channels >= 1 && weight.size() == channels && bias.size() == 1,
          ErrorCode::kInvalidArgument, "attention_gate: weight does not match channels");
  cache.mask = Tensor<T>({frames, 1, x.dim(2), x.dim(3)});
  cache.gate = Tensor<T>({frames, 1, x.dim(2), x.dim(3)});
  cache.mask_sum.assign(frames, T(0));
  Tensor<T> out(x.shape());
  std::vector<T> z(hw);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(z.begin(), z.end(), bias[0]);
    for (std::size_t c = 0; c < channels; ++c) {
      const T* p = x.data() + (t * channels + c) * hw;
      const T wc = weight[c];
      for (std::size_t i = 0; i < hw; ++i) z[i] += wc * p[i];
    }
    T* m = cache.mask.data() + t * hw;
    double sum = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      m[i] = T(1) / (T(1) + std::exp(-z[i]));
      sum += std::abs(m[i]);
    }
    cache.mask_sum[t] = static_cast<T>(sum);
    const T scale = static_cast<T>(static_cast<double>(hw) / (2.0 * sum));
    T* g = cache.gate.data() + t * hw;
    for (std::size_t i = 0; i < hw; ++i) g[i] = scale * m[i];
    for (std::size_t c = 0; c < channels; ++c) {
      const T* p = x.data() + (t * channels + c) * hw;
      T* o = out.data() + (t * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) o[i] = p[i] * g[i];
    }
  }
  return out;
}

template <typename T>
Tensor<T> attention_gate_backward(const Tensor<T>& x, const Tensor<T>& weight,
                                  const GateCache<T>& cache, const Tensor<T>& grad_out,
                                  Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
  const std::size_t frames = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  grad_weight = Tensor<T>({channels});
  grad_bias = Tensor<T>({1});
  Tensor<T> grad_in(x.shape());
  std::vector<double> dg(hw), dz(hw);
  std::vector<double> gw(channels, 0.0);
  double gb = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    const T* g = cache.gate.data() + t * hw;
    const T* m = cache.mask.data() + t * hw;
    std::fill(dg.begin(), dg.end(), 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (t * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        dg[i] += static_cast<double>(grad_out[off + i]) * x[off + i];
        grad_in[off + i] = grad_out[off + i] * g[i];
      }
    }
    // g_p = K m_p / S with K = HW / 2, S = sum m: dg_p/dm_q = K/S (delta_pq - m_p / S)
    const double s = cache.mask_sum[t];
    const double k = static_cast<double>(hw) / 2.0 / s;
    double dg_dot_m = 0.0;
    for (std::size_t i = 0; i < hw; ++i) dg_dot_m += dg[i] * m[i];
    for (std::size_t i = 0; i < hw; ++i) {
      const double dm = k * (dg[i] - dg_dot_m / s);
      dz[i] = dm * m[i] * (1.0 - m[i]);
      gb += dz[i];
    }
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (t * channels + c) * hw;
      double acc = 0.0;
      const T wc = weight[c];
      for (std::size_t i = 0; i < hw; ++i) {
        acc += dz[i] * x[off + i];
        grad_in[off + i] += static_cast<T>(dz[i] * wc);
      }
      gw[c] += acc;
    }
  }
  for (std::size_t c = 0; c < channels; ++c) grad_weight[c] = static_cast<T>(gw[c]);
  grad_bias[0] = static_cast<T>(gb);
  return grad_in;
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  require_rank4(x.shape(), "avg_pool2");
  const std::size_t frames = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor<T> out({frames, channels, oh, ow});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx)
          out.at(t, c, y, xx) = T(0.25) * (x.at(t, c, 2 * y, 2 * xx) + x.at(t, c, 2 * y, 2 * xx + 1) +
                                           x.at(t, c, 2 * y + 1, 2 * xx) +
                                           x.at(t, c, 2 * y + 1, 2 * xx + 1));
  return out;
}

template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& in_shape) {
  Tensor<T> grad_in(in_shape);
  for (std::size_t t = 0; t < grad_out.dim(0); ++t)
    for (std::size_t c = 0; c < grad_out.dim(1); ++c)
      for (std::size_t y = 0; y < grad_out.dim(2); ++y)
        for (std::size_t xx = 0; xx < grad_out.dim(3); ++xx) {
          const T g = T(0.25) * grad_out.at(t, c, y, xx);
          grad_in.at(t, c, 2 * y, 2 * xx) = g;
          grad_in.at(t, c, 2 * y, 2 * xx + 1) = g;
          grad_in.at(t, c, 2 * y + 1, 2 * xx) = g;
          grad_in.at(t, c, 2 * y + 1, 2 * xx + 1) = g;
        }
  return grad_in;
}

template <typename T>
Tensor<T> global_avg(const Tensor<T>& x) {
  require_rank4(x.shape(), "global_avg");
  const std::size_t frames = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out({frames, channels});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < channels; ++c) {
      const T* p = x.data() + (t * channels + c) * hw;
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += p[i];
      out[t * channels + c] = static_cast<T>(acc / static_cast<double>(hw));
    }
  return out;
}

template <typename T>
Tensor<T> global_avg_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& in_shape) {
  Tensor<T> grad_in(in_shape);
  const std::size_t frames = in_shape[0], channels = in_shape[1], hw = in_shape[2] * in_shape[3];
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < channels; ++c) {
      const T g = static_cast<T>(grad_out[t * channels + c] / static_cast<double>(hw));
      T* p = grad_in.data() + (t * channels + c) * hw;
      std::fill(p, p + hw, g);
    }
  return grad_in;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& features, const Tensor<T>& weight, const Tensor<T>& bias) {
  require(features.rank() == 2 && weight.size() == features.dim(1) && bias.size() == 1,
          ErrorCode::kInvalidArgument, "dense: weight does not match features");
  const std::size_t frames = features.dim(0), channels = features.dim(1);
  Tensor<T> out({frames});
  for (std::size_t t = 0; t < frames; ++t) {
    T acc = bias[0];
    for (std::size_t c = 0; c < channels; ++c) acc += weight[c] * features[t * channels + c];
    out[t] = acc;
  }
  return out;
}

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& features, const Tensor<T>& weight,
                         const Tensor<T>& grad_out, Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
  const std::size_t frames = features.dim(0), channels = features.dim(1);
  grad_weight = Tensor<T>({channels});
  grad_bias = Tensor<T>({1});
  Tensor<T> grad_in(features.shape());
  for (std::size_t t = 0; t < frames; ++t) {
    const T g = grad_out[t];
    grad_bias[0] += g;
    for (std::size_t c = 0; c < channels; ++c) {
      grad_weight[c] += g * features[t * channels + c];
      grad_in[t * channels + c] = g * weight[c];
    }
  }
  return grad_in;
}

#define BREATHFLOW_INSTANTIATE(T)                                                              \
  template Tensor<T> temporal_shift(const Tensor<T>&, double, bool);                          \
  template Tensor<T> temporal_shift_backward(const Tensor<T>&, double);                       \
  template Tensor<T> conv3x3(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> conv3x3_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                      Tensor<T>&, Tensor<T>&, bool);                          \
  template Tensor<T> batchnorm_train(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                     BatchNormCache<T>&);                                     \
  template Tensor<T> batchnorm_eval(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                    const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> batchnorm_backward(const Tensor<T>&, const Tensor<T>&,                   \
                                        const BatchNormCache<T>&, Tensor<T>&, Tensor<T>&);    \
  template void update_running_stats(const BatchNormCache<T>&, std::size_t, Tensor<T>&,       \
                                     Tensor<T>&);                                             \
  template Tensor<T> tanh_forward(const Tensor<T>&);                                          \
  template Tensor<T> tanh_backward(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> attention_gate(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                    GateCache<T>&);                                           \
  template Tensor<T> attention_gate_backward(const Tensor<T>&, const Tensor<T>&,              \
                                             const GateCache<T>&, const Tensor<T>&,           \
                                             Tensor<T>&, Tensor<T>&);                         \
  template Tensor<T> avg_pool2(const Tensor<T>&);                                             \
  template Tensor<T> avg_pool2_backward(const Tensor<T>&, const std::vector<std::size_t>&);   \
  template Tensor<T> global_avg(const Tensor<T>&);                                            \
  template Tensor<T> global_avg_backward(const Tensor<T>&, const std::vector<std::size_t>&);  \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                    Tensor<T>&, Tensor<T>&);

BREATHFLOW_INSTANTIATE(float)
BREATHFLOW_INSTANTIATE(double)
#undef BREATHFLOW_INSTANTIATE

}  // namespace breathflow::nn
