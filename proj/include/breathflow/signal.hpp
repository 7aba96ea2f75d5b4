#pragma once

// Respiration waveforms: synthesis from exhalation annotations, filtering,
// spectral analysis, rate extraction and evaluation metrics.

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace breathflow {

/// Normal infant breathing band, 18-60 breaths per minute.
inline constexpr double kBandLoHz = 0.3;
inline constexpr double kBandHiHz = 1.0;

/// Slack applied to both band edges so that bins sitting exactly on 0.3 Hz or
/// 1.0 Hz are kept despite rounding in k * fs / n.
inline constexpr double kBandEdgeTolHz = 1e-9;

struct Band {
  double lo_hz = kBandLoHz;
  double hi_hz = kBandHiHz;

  bool contains(double f) const {
    return f >= lo_hz - kBandEdgeTolHz && f <= hi_hz + kBandEdgeTolHz;
  }
};

/// Uniformly sampled real signal. Construction validates length >= 2, a
/// finite positive rate and finite samples.
class Waveform {
 public:
  Waveform(std::vector<double> samples, double sample_rate_hz);

  const std::vector<double>& samples() const { return samples_; }
  double sample_rate_hz() const { return sample_rate_hz_; }
  std::size_t size() const { return samples_.size(); }
  double duration_s() const { return static_cast<double>(samples_.size()) / sample_rate_hz_; }
  double operator[](std::size_t i) const { return samples_[i]; }

 private:
  std::vector<double> samples_;
  double sample_rate_hz_;
};

/// Exhalation-start timestamps for one clip.
struct AnnotationTrack {
  std::string clip_id;
  std::vector<double> exhalation_times_s;
  double clip_duration_s = 0.0;

  /// Throws if times are not strictly increasing or fall outside the clip.
  void validate() const;
};

struct PowerSpectrum {
  std::vector<double> freqs_hz;
  std::vector<double> power;
  bool normalized = false;
};

struct RateEstimate {
  double bpm = 0.0;
  double peak_freq_hz = 0.0;
};

struct MetricsReport {
  double mae_bpm = 0.0;
  double rmse_bpm = 0.0;
  std::optional<double> pearson_r;  // absent for n < 2 or zero variance
  std::size_t n = 0;
};

// Impulse at the nearest frame of each exhalation start, smoothed with a
// unit-peak Gaussian of sigma = radius_frames samples truncated at +-4 sigma.
// radius_frames == 0 yields the bare impulse train.
Waveform annotations_to_waveform(const AnnotationTrack& track, double frame_rate_hz,
                                 double radius_frames = 4.0);

// Linear interpolation onto a uniform grid at target_hz starting at t = 0.
Waveform resample(const Waveform& w, double target_hz);

Waveform zscore(const Waveform& w);

// Ideal zero-phase DFT mask keeping |f| in [lo, hi]; DC is always removed.
Waveform bandpass_filter(const Waveform& w, double lo_hz = kBandLoHz,
                         double hi_hz = kBandHiHz);

// One-sided |DFT(x - mean)|^2 over bins k = 1 .. n/2.
PowerSpectrum power_spectrum(const Waveform& w, std::optional<Band> band = std::nullopt,
                             bool normalize = false);

// Band-limited PSD argmax on a zero-padded transform of length
// pad_factor * next_pow2(n). Ties go to the lower frequency.
RateEstimate estimate_rate(const Waveform& w, double lo_hz = kBandLoHz,
                           double hi_hz = kBandHiHz, int pad_factor = 4);

MetricsReport compute_metrics(std::span<const double> pred_bpm,
                              std::span<const double> ref_bpm);

}  // namespace breathflow
