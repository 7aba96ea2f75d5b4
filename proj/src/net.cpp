#include "breathflow/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "breathflow/error.hpp"
#include "breathflow/layers.hpp"

namespace breathflow {

void NetConfig::validate() const {
  require(chunk_len >= 50, ErrorCode::kInvalidArgument,
          "chunk_len must be >= 50 frames, got " + std::to_string(chunk_len));
  require(in_channels == 3, ErrorCode::kInvalidArgument, "in_channels must be 3 (HSV)");
  require(tsm_fraction >= 0.0 && tsm_fraction <= 0.5, ErrorCode::kInvalidArgument,
          "tsm_fraction must be in [0, 0.5]");
  require(!block_channels.empty(), ErrorCode::kInvalidArgument, "block_channels is empty");
  for (int c : block_channels)
    require(c > 0 && c % 4 == 0, ErrorCode::kInvalidArgument,
            "channel count " + std::to_string(c) + " is not a positive multiple of 4");
  require(input_size >= (1 << block_channels.size()), ErrorCode::kInvalidArgument,
          "input_size too small for " + std::to_string(block_channels.size()) + " pooling stages");
}

std::vector<std::string> param_names(const NetConfig& config) {
  std::vector<std::string> names{"stem.conv.weight", "stem.conv.bias", "stem.bn.gamma",
                                 "stem.bn.beta"};
  for (std::size_t i = 0; i < config.block_channels.size(); ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    for (const char* s : {"conv.weight", "conv.bias", "gate.weight", "gate.bias"})
      names.push_back(p + s);
  }
  names.push_back("head.weight");
  names.push_back("head.bias");
  return names;
}

std::vector<std::vector<std::size_t>> param_shapes(const NetConfig& config) {
  using Shape = std::vector<std::size_t>;
  const auto c0 = static_cast<std::size_t>(config.block_channels.front());
  const auto cin = static_cast<std::size_t>(config.in_channels);
  std::vector<Shape> shapes{{c0, cin, 3, 3}, {c0}, {c0}, {c0}};
  std::size_t prev = c0;
  for (int ci : config.block_channels) {
    const auto c = static_cast<std::size_t>(ci);
    shapes.push_back({c, prev, 3, 3});
    shapes.push_back({c});
    shapes.push_back({c});
    shapes.push_back({1});
    prev = c;
  }
  shapes.push_back({prev});
  shapes.push_back({1});
  return shapes;
}

namespace {

// Index helpers into ModelState::params.
constexpr std::size_t kStemW = 0, kStemB = 1, kGamma = 2, kBeta = 3;
std::size_t block_base(std::size_t i) { return 4 + 4 * i; }
std::size_t head_base(const NetConfig& c) { return 4 + 4 * c.block_channels.size(); }

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& layer) {
  if (!t.all_finite())
    throw Error(ErrorCode::kNumerical, "numerical divergence in " + layer);
}

template <typename T>
struct BlockTrace {
  Tensor<T> shifted;
  Tensor<T> act;  // tanh output
  nn::GateCache<T> gate;
  std::vector<std::size_t> gated_shape;
  Tensor<T> out;  // pooled
};

template <typename T>
struct Trace {
  nn::BatchNormCache<T> bn;
  std::vector<BlockTrace<T>> blocks;
  Tensor<T> features;  // [T, C]
  std::vector<T> output;
};

template <typename T>
Trace<T> run_forward(const ModelState<T>& s, const Tensor<T>& chunk, bool train_mode) {
  const auto& cfg = s.config;
  require(chunk.rank() == 4 && chunk.dim(1) == static_cast<std::size_t>(cfg.in_channels) &&
              chunk.dim(2) == static_cast<std::size_t>(cfg.input_size) &&
              chunk.dim(3) == static_cast<std::size_t>(cfg.input_size) && chunk.dim(0) > 0,
          ErrorCode::kInvalidArgument,
          "chunk shape " + shape_string(chunk.shape()) + " does not match the network input");
  check_finite(chunk, "input");
  const auto& p = s.params;
  Trace<T> tr;
  Tensor<T> h = nn::conv3x3(chunk, p[kStemW], p[kStemB]);
  check_finite(h, "stem.conv");
  h = train_mode ? nn::batchnorm_train(h, p[kGamma], p[kBeta], tr.bn)
                 : nn::batchnorm_eval(h, p[kGamma], p[kBeta], s.running_mean, s.running_var);
  check_finite(h, "stem.bn");
  for (std::size_t i = 0; i < cfg.block_channels.size(); ++i) {
    const std::size_t b = block_base(i);
    const std::string name = "blocks." + std::to_string(i);
    BlockTrace<T> bt;
    bt.shifted = nn::temporal_shift(h, cfg.tsm_fraction);
    Tensor<T> c = nn::conv3x3(bt.shifted, p[b], p[b + 1]);
    check_finite(c, name + ".conv");
    bt.act = nn::tanh_forward(c);
    Tensor<T> g = nn::attention_gate(bt.act, p[b + 2], p[b + 3], bt.gate);
    check_finite(g, name + ".gate");
    bt.gated_shape = g.shape();
    bt.out = nn::avg_pool2(g);
    h = bt.out;
    tr.blocks.push_back(std::move(bt));
  }
  tr.features = nn::global_avg(h);
  const std::size_t hb = head_base(cfg);
  Tensor<T> out = nn::dense(tr.features, p[hb], p[hb + 1]);
  check_finite(out, "head");
  tr.output.assign(out.data(), out.data() + out.size());
  return tr;
}

// Accumulates d loss / d params for one sample into grads.
template <typename T>
void run_backward(const ModelState<T>& s, const Tensor<T>& chunk, const Trace<T>& tr,
                  const std::vector<double>& grad_out, double scale,
                  std::vector<Tensor<T>>& grads) {
  const auto& cfg = s.config;
  const auto& p = s.params;
  auto accumulate = [&](std::size_t idx, const Tensor<T>& g) {
    for (std::size_t k = 0; k < g.size(); ++k) grads[idx][k] += static_cast<T>(scale * g[k]);
  };
  Tensor<T> gy({grad_out.size()});
  for (std::size_t t = 0; t < grad_out.size(); ++t) gy[t] = static_cast<T>(grad_out[t]);

  const std::size_t hb = head_base(cfg);
  Tensor<T> gw, gb;
  Tensor<T> gf = nn::dense_backward(tr.features, p[hb], gy, gw, gb);
  accumulate(hb, gw);
  accumulate(hb + 1, gb);
  const auto& last = tr.blocks.back().out;
  Tensor<T> gh = nn::global_avg_backward(gf, last.shape());
  for (std::size_t i = cfg.block_channels.size(); i-- > 0;) {
    const auto& bt = tr.blocks[i];
    const std::size_t b = block_base(i);
    Tensor<T> gg = nn::avg_pool2_backward(gh, bt.gated_shape);
    Tensor<T> gact = nn::attention_gate_backward(bt.act, p[b + 2], bt.gate, gg, gw, gb);
    accumulate(b + 2, gw);
    accumulate(b + 3, gb);
    Tensor<T> gc = nn::tanh_backward(bt.act, gact);
    Tensor<T> gsh = nn::conv3x3_backward(bt.shifted, p[b], gc, gw, gb, true);
    accumulate(b, gw);
    accumulate(b + 1, gb);
    gh = nn::temporal_shift_backward(gsh, cfg.tsm_fraction);
  }
  Tensor<T> gbn = nn::batchnorm_backward(gh, p[kGamma], tr.bn, gw, gb);
  accumulate(kGamma, gw);
  accumulate(kBeta, gb);
  nn::conv3x3_backward(chunk, p[kStemW], gbn, gw, gb, false);
  accumulate(kStemW, gw);
  accumulate(kStemB, gb);
}

std::vector<double> zscored(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(x.size()));
  std::vector<double> out(x.size(), 0.0);
  if (sd > 0.0)
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
  return out;
}

}  // namespace

template <typename T>
template <typename U>
ModelState<U> ModelState<T>::cast() const {
  ModelState<U> out;
  out.config = config;
  for (const auto& t : params) out.params.push_back(t.template cast<U>());
  out.running_mean = running_mean.template cast<U>();
  out.running_var = running_var.template cast<U>();
  out.step = step;
  out.seed = seed;
  for (const auto& t : adam_m) out.adam_m.push_back(t.template cast<U>());
  for (const auto& t : adam_v) out.adam_v.push_back(t.template cast<U>());
  return out;
}

template <typename T>
ModelState<T> init_model(const NetConfig& config, std::uint64_t seed) {
  config.validate();
  ModelState<T> s;
  s.config = config;
  s.seed = seed;
  std::mt19937_64 rng(seed);
  const auto names = param_names(config);
  const auto shapes = param_shapes(config);
  for (std::size_t i = 0; i < names.size(); ++i) {
    Tensor<T> t(shapes[i]);
    const std::string& n = names[i];
    const auto ends_with = [&](const char* suffix) {
      const std::string s(suffix);
      return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with("gamma")) {
      t.fill(T(1));
    } else if (ends_with("weight")) {
      // conv: fan_in = cin * 9; gate and head: fan_in = C
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < t.rank(); ++d) fan_in *= t.dim(d);
      if (t.rank() == 1) fan_in = t.dim(0);
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
      for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<T>(dist(rng));
    }
    s.params.push_back(std::move(t));
  }
  const auto c0 = static_cast<std::size_t>(config.block_channels.front());
  s.running_mean = Tensor<T>({c0}, T(0));
  s.running_var = Tensor<T>({c0}, T(1));
  return s;
}

template <typename T>
Tensor<T> prepare_chunk(const FlowClip& clip, std::size_t start, std::size_t len) {
  require(start + len <= clip.hsv.size() && len > 0, ErrorCode::kInvalidArgument,
          "chunk [" + std::to_string(start) + ", " + std::to_string(start + len) +
              ") outside clip of " + std::to_string(clip.hsv.size()) + " fields");
  const int w = clip.hsv[start].h.width(), h = clip.hsv[start].h.height();
  const std::size_t hw = static_cast<std::size_t>(w) * h;
  Tensor<T> out({len, 3, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const HsvFrame& f = clip.hsv[start + t];
      const Plane& pl = c == 0 ? f.h : (c == 1 ? f.s : f.v);
      require(pl.width() == w && pl.height() == h, ErrorCode::kDataError,
              "flow field size changes within clip");
      for (float v : pl.data()) sum += v;
    }
    const double n = static_cast<double>(len * hw);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const HsvFrame& f = clip.hsv[start + t];
      const Plane& pl = c == 0 ? f.h : (c == 1 ? f.s : f.v);
      for (float v : pl.data()) ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / n);
    // Tolerate float round-off on constant channels (S is identically 1).
    const bool constant = sd <= 1e-7 * std::max(1.0, std::abs(mean));
    for (std::size_t t = 0; t < len; ++t) {
      const HsvFrame& f = clip.hsv[start + t];
      const Plane& pl = c == 0 ? f.h : (c == 1 ? f.s : f.v);
      T* dst = out.data() + (t * 3 + static_cast<std::size_t>(c)) * hw;
      const auto src = pl.data();
      for (std::size_t k = 0; k < hw; ++k)
        dst[k] = constant ? T(0) : static_cast<T>((src[k] - mean) / sd);
    }
  }
  return out;
}

template <typename T>
std::vector<T> forward_chunk(const ModelState<T>& state, const Tensor<T>& chunk,
                             bool train_mode) {
  return run_forward(state, chunk, train_mode).output;
}

template <typename T>
LossAndGrads<T> loss_and_grads(const ModelState<T>& state,
                               const std::vector<TrainSample<T>>& batch, LossKind loss) {
  require(!batch.empty(), ErrorCode::kInvalidArgument, "empty training batch");
  LossAndGrads<T> out;
  for (const auto& p : state.params) out.grads.emplace_back(p.shape());
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& sample : batch) {
    require(sample.ref.size() == sample.chunk.dim(0), ErrorCode::kInvalidArgument,
            "reference length " + std::to_string(sample.ref.size()) +
                " does not match chunk length " + std::to_string(sample.chunk.dim(0)));
    require(std::all_of(sample.ref.begin(), sample.ref.end(), [](double v) { return std::isfinite(v); }),
            ErrorCode::kDataError, "non-finite reference sample");
    Trace<T> tr = run_forward(state, sample.chunk, true);
    std::vector<double> pred(tr.output.begin(), tr.output.end());
    const std::vector<double> ref = zscored(sample.ref);
    LossResult lr = compute_loss(loss, pred, ref, kFlowRateHz);
    require(std::isfinite(lr.value), ErrorCode::kNumerical, "non-finite loss");
    out.loss += scale * lr.value;
    run_backward(state, sample.chunk, tr, lr.grad_wrt_pred, scale, out.grads);
    out.batch_mean.push_back(tr.bn.batch_mean);
    out.batch_var.push_back(tr.bn.batch_var);
    out.count_per_channel = sample.chunk.dim(0) * sample.chunk.dim(2) * sample.chunk.dim(3);
  }
  const auto names = param_names(state.config);
  for (std::size_t i = 0; i < out.grads.size(); ++i)
    if (!out.grads[i].all_finite())
      throw Error(ErrorCode::kNumerical, "non-finite gradient for " + names[i]);
  return out;
}

template <typename T>
double train_step(ModelState<T>& state, const std::vector<TrainSample<T>>& batch,
                  const TrainConfig& cfg) {
  require(cfg.learning_rate >= 0.0 && std::isfinite(cfg.learning_rate),
          ErrorCode::kInvalidArgument, "learning rate must be finite and >= 0");
  LossAndGrads<T> lg = loss_and_grads(state, batch, cfg.loss);
  if (cfg.learning_rate == 0.0) return lg.loss;

  if (state.adam_m.empty()) {
    for (const auto& p : state.params) {
      state.adam_m.emplace_back(p.shape());
      state.adam_v.emplace_back(p.shape());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    auto& p = state.params[i];
    auto& m = state.adam_m[i];
    auto& v = state.adam_v[i];
    const auto& g = lg.grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * gk;
      const double vk = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(p[k] - cfg.learning_rate * (mk / c1) / (std::sqrt(vk / c2) + kAdamEps));
    }
  }
  for (std::size_t b = 0; b < lg.batch_mean.size(); ++b) {
    nn::BatchNormCache<T> stats;
    stats.batch_mean = lg.batch_mean[b];
    stats.batch_var = lg.batch_var[b];
    nn::update_running_stats(stats, lg.count_per_channel, state.running_mean, state.running_var);
  }
  return lg.loss;
}

template <typename T>
ClipPrediction predict_clip(const ModelState<T>& state, const FlowClip& clip) {
  const auto len = static_cast<std::size_t>(state.config.chunk_len);
  require(clip.hsv.size() >= len, ErrorCode::kDataError,
          "clip too short: " + std::to_string(clip.hsv.size()) + " fields < chunk_len " +
              std::to_string(len));
  const std::size_t chunks = clip.hsv.size() / len;
  std::vector<double> samples;
  samples.reserve(chunks * len);
  for (std::size_t k = 0; k < chunks; ++k) {
    const auto y = forward_chunk(state, prepare_chunk<T>(clip, k * len, len), false);
    samples.insert(samples.end(), y.begin(), y.end());
  }
  Waveform raw(std::move(samples), clip.rate_hz);
  Waveform filtered = bandpass_filter(raw);
  RateEstimate rate = estimate_rate(filtered);
  return ClipPrediction{std::move(raw), std::move(filtered), rate, chunks};
}

#define BREATHFLOW_INSTANTIATE(T)                                                           \
  template ModelState<T> init_model<T>(const NetConfig&, std::uint64_t);                   \
  template Tensor<T> prepare_chunk<T>(const FlowClip&, std::size_t, std::size_t);          \
  template std::vector<T> forward_chunk(const ModelState<T>&, const Tensor<T>&, bool);     \
  template LossAndGrads<T> loss_and_grads(const ModelState<T>&,                            \
                                          const std::vector<TrainSample<T>>&, LossKind);   \
  template double train_step(ModelState<T>&, const std::vector<TrainSample<T>>&,           \
                             const TrainConfig&);                                          \
  template ClipPrediction predict_clip(const ModelState<T>&, const FlowClip&);

BREATHFLOW_INSTANTIATE(float)
BREATHFLOW_INSTANTIATE(double)
#undef BREATHFLOW_INSTANTIATE

template ModelState<double> ModelState<float>::cast<double>() const;
template ModelState<float> ModelState<double>::cast<float>() const;
template ModelState<float> ModelState<float>::cast<float>() const;
template ModelState<double> ModelState<double>::cast<double>() const;

}  // namespace breathflow
