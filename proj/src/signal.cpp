#include "breathflow/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "breathflow/dft.hpp"
#include "breathflow/error.hpp"

namespace breathflow {
namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

Waveform::Waveform(std::vector<double> samples, double sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  require(samples_.size() >= 2, ErrorCode::kInvalidArgument,
          "waveform needs at least 2 samples");
  require(std::isfinite(sample_rate_hz_) && sample_rate_hz_ > 0.0,
          ErrorCode::kInvalidArgument, "sample rate must be finite and positive");
  for (double s : samples_)
    require(std::isfinite(s), ErrorCode::kNumerical, "waveform sample is not finite");
}

void AnnotationTrack::validate() const {
  require(std::isfinite(clip_duration_s) && clip_duration_s > 0.0,
          ErrorCode::kDataError, "clip '" + clip_id + "': duration must be positive");
  for (std::size_t i = 0; i < exhalation_times_s.size(); ++i) {
    const double t = exhalation_times_s[i];
    require(std::isfinite(t) && t >= 0.0 && t <= clip_duration_s, ErrorCode::kDataError,
            "clip '" + clip_id + "': timestamp " + fmt(t) + " s outside [0, " +
                fmt(clip_duration_s) + "]");
    if (i > 0)
      require(t > exhalation_times_s[i - 1], ErrorCode::kDataError,
              "clip '" + clip_id + "': timestamps not strictly increasing at " + fmt(t) + " s");
  }
}

Waveform annotations_to_waveform(const AnnotationTrack& track, double frame_rate_hz,
                                 double radius_frames) {
  require(std::isfinite(frame_rate_hz) && frame_rate_hz > 0.0, ErrorCode::kInvalidArgument,
          "frame rate must be positive");
  require(radius_frames >= 0.0, ErrorCode::kInvalidArgument, "radius must be non-negative");
  require(!track.exhalation_times_s.empty(), ErrorCode::kDataError,
          "clip '" + track.clip_id + "': no annotations");
  track.validate();

  const auto n = static_cast<std::size_t>(
      std::max(2.0, std::ceil(track.clip_duration_s * frame_rate_hz - 1e-9)));
  std::vector<double> impulses(n, 0.0);
  for (double t : track.exhalation_times_s) {
    // round half up
    auto idx = static_cast<std::size_t>(std::floor(t * frame_rate_hz + 0.5));
    impulses[std::min(idx, n - 1)] += 1.0;
  }
  if (radius_frames == 0.0) return Waveform(std::move(impulses), frame_rate_hz);

  const auto half = static_cast<std::ptrdiff_t>(std::ceil(4.0 * radius_frames));
  std::vector<double> kernel(2 * half + 1);
  for (std::ptrdiff_t k = -half; k <= half; ++k)
    kernel[k + half] = std::exp(-0.5 * (k * k) / (radius_frames * radius_frames));

  std::vector<double> out(n, 0.0);
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    if (impulses[i] == 0.0) continue;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      const std::ptrdiff_t j = i + k;
      if (j >= 0 && j < sn) out[j] += impulses[i] * kernel[k + half];
    }
  }
  return Waveform(std::move(out), frame_rate_hz);
}

Waveform resample(const Waveform& w, double target_hz) {
  require(std::isfinite(target_hz) && target_hz > 0.0, ErrorCode::kInvalidArgument,
          "target rate must be positive");
  const double step = w.sample_rate_hz() / target_hz;  // input samples per output sample
  const double last = static_cast<double>(w.size() - 1);
  const auto n_out = static_cast<std::size_t>(std::floor(last / step + 1e-9)) + 1;
  require(n_out >= 2, ErrorCode::kInvalidArgument, "resampled grid has fewer than 2 samples");

  const auto& x = w.samples();
  std::vector<double> out(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double p = static_cast<double>(k) * step;
    const auto i = static_cast<std::size_t>(std::floor(p));
    if (i >= x.size() - 1) {
      out[k] = x.back();
      continue;
    }
    const double frac = p - static_cast<double>(i);
    out[k] = frac == 0.0 ? x[i] : x[i] + frac * (x[i + 1] - x[i]);
  }
  return Waveform(std::move(out), target_hz);
}

Waveform zscore(const Waveform& w) {
  const auto& x = w.samples();
  const double mu = mean_of(x);
  double ss = 0.0, max_abs = 0.0;
  for (double v : x) {
    ss += (v - mu) * (v - mu);
    max_abs = std::max(max_abs, std::abs(v));
  }
  const double sd = std::sqrt(ss / static_cast<double>(x.size()));
  require(sd > 1e-12 * std::max(1.0, max_abs), ErrorCode::kDataError, "zero variance");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mu) / sd;
  return Waveform(std::move(out), w.sample_rate_hz());
}

Waveform bandpass_filter(const Waveform& w, double lo_hz, double hi_hz) {
  const double fs = w.sample_rate_hz();
  require(lo_hz >= 0.0 && lo_hz < hi_hz, ErrorCode::kInvalidArgument,
          "bandpass needs 0 <= lo < hi");
  require(hi_hz <= fs / 2.0 + kBandEdgeTolHz, ErrorCode::kInvalidArgument,
          "bandpass upper edge above Nyquist");
  const Band band{lo_hz, hi_hz};
  const std::size_t n = w.size();
  auto spec = dft::forward(std::span<const double>(w.samples()));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t mirrored = k <= n / 2 ? k : n - k;
    const double f = static_cast<double>(mirrored) * fs / static_cast<double>(n);
    if (k == 0 || !band.contains(f)) spec[k] = 0.0;
  }
  const auto time = dft::inverse(spec);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = time[i].real();
  return Waveform(std::move(out), fs);
}

PowerSpectrum power_spectrum(const Waveform& w, std::optional<Band> band, bool normalize) {
  const std::size_t n = w.size();
  require(n >= 4, ErrorCode::kInvalidArgument, "power spectrum needs at least 4 samples");
  const double mu = mean_of(w.samples());
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i) centred[i] = w[i] - mu;
  const auto spec = dft::forward(std::span<const double>(centred));

  PowerSpectrum ps;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * w.sample_rate_hz() / static_cast<double>(n);
    if (band && !band->contains(f)) continue;
    ps.freqs_hz.push_back(f);
    ps.power.push_back(std::norm(spec[k]));
  }
  require(!ps.freqs_hz.empty(), ErrorCode::kDataError, "empty band");
  if (normalize) {
    const double total = std::accumulate(ps.power.begin(), ps.power.end(), 0.0);
    require(total > 0.0, ErrorCode::kNumerical, "degenerate spectrum");
    for (double& p : ps.power) p /= total;
    ps.normalized = true;
  }
  return ps;
}

RateEstimate estimate_rate(const Waveform& w, double lo_hz, double hi_hz, int pad_factor) {
  require(w.duration_s() >= 10.0 - 1e-9, ErrorCode::kInvalidArgument,
          "rate estimation needs at least 10 s of signal");
  require(pad_factor >= 1, ErrorCode::kInvalidArgument, "pad factor must be >= 1");
  require(lo_hz >= 0.0 && lo_hz < hi_hz, ErrorCode::kInvalidArgument,
          "rate band needs 0 <= lo < hi");
  const std::size_t n = w.size();
  const std::size_t padded = static_cast<std::size_t>(pad_factor) * dft::next_pow2(n);
  const double mu = mean_of(w.samples());
  std::vector<double> x(padded, 0.0);
  for (std::size_t i = 0; i < n; ++i) x[i] = w[i] - mu;
  const auto spec = dft::forward(std::span<const double>(x));

  const Band band{lo_hz, hi_hz};
  const double fs = w.sample_rate_hz();
  bool found = false;
  double best_power = -1.0, best_f = 0.0;
  for (std::size_t k = 1; k <= padded / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(padded);
    if (!band.contains(f)) continue;
    const double p = std::norm(spec[k]);
    if (!found || p > best_power) {
      best_power = p;
      best_f = f;
      found = true;
    }
  }
  require(found, ErrorCode::kDataError, "empty band");
  return RateEstimate{60.0 * best_f, best_f};
}

MetricsReport compute_metrics(std::span<const double> pred_bpm, std::span<const double> ref_bpm) {
  require(pred_bpm.size() == ref_bpm.size(), ErrorCode::kInvalidArgument,
          "metrics need sequences of equal length");
  require(!pred_bpm.empty(), ErrorCode::kInvalidArgument, "metrics need at least one pair");
  const std::size_t n = pred_bpm.size();
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred_bpm[i] - ref_bpm[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  MetricsReport r;
  r.n = n;
  r.mae_bpm = abs_sum / static_cast<double>(n);
  // rmse >= mae holds exactly; rounding in the sqrt can otherwise break it by an ulp
  r.rmse_bpm = std::max(std::sqrt(sq_sum / static_cast<double>(n)), r.mae_bpm);
  if (n >= 2) {
    const double mp = mean_of(pred_bpm), mr = mean_of(ref_bpm);
    double spp = 0.0, srr = 0.0, spr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = pred_bpm[i] - mp, b = ref_bpm[i] - mr;
      spp += a * a;
      srr += b * b;
      spr += a * b;
    }
    if (spp > 0.0 && srr > 0.0)
      r.pearson_r = std::clamp(spr / std::sqrt(spp * srr), -1.0, 1.0);
  }
  return r;
}

}  // namespace breathflow
