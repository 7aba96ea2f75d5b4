#include "breathflow/spectral_loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "breathflow/error.hpp"

namespace breathflow {
namespace {

// Band-limited one-sided spectrum of the mean-removed signal, restricted to
// the bins we need so the transform is O(n * bins).
struct BandSpectrum {
  std::vector<std::size_t> bins;
  std::vector<double> re, im;  // X_k = sum_j x~_j exp(-2 pi i j k / n)
  std::vector<double> prob;    // |X_k|^2 / total
  double total = 0.0;
};

std::vector<std::size_t> band_bins(std::size_t n, double fs, const Band& band) {
  std::vector<std::size_t> bins;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    if (band.contains(f)) bins.push_back(k);
  }
  return bins;
}

struct Twiddles {
  std::vector<double> c, s;
  explicit Twiddles(std::size_t n) : c(n), s(n) {
    for (std::size_t m = 0; m < n; ++m) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
      c[m] = std::cos(a);
      s[m] = std::sin(a);
    }
  }
};

BandSpectrum band_spectrum(std::span<const double> x, const std::vector<std::size_t>& bins,
                           const Twiddles& tw) {
  const std::size_t n = x.size();
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  BandSpectrum bs;
  bs.bins = bins;
  bs.re.resize(bins.size());
  bs.im.resize(bins.size());
  bs.prob.resize(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const std::size_t k = bins[b];
    double re = 0.0, im = 0.0;
    std::size_t idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = x[j] - mu;
      re += v * tw.c[idx];
      im -= v * tw.s[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
    bs.re[b] = re;
    bs.im[b] = im;
    bs.prob[b] = re * re + im * im;
    bs.total += bs.prob[b];
  }
  // In-band power at rounding level relative to the whole spectrum (n * energy
  // by Parseval) is treated as none at all.
  double energy = 0.0;
  for (double v : x) energy += (v - mu) * (v - mu);
  require(bs.total > 1e-20 * static_cast<double>(n) * energy && bs.total > 0.0,
          ErrorCode::kNumerical, "degenerate spectrum");
  for (double& p : bs.prob) p /= bs.total;
  return bs;
}

double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

void check_pair(std::span<const double> pred, std::span<const double> ref) {
  require(pred.size() == ref.size(), ErrorCode::kInvalidArgument,
          "loss needs prediction and reference of equal length");
  require(pred.size() >= 2, ErrorCode::kInvalidArgument, "loss needs at least 2 samples");
}

void check_waveforms(const Waveform& pred, const Waveform& ref) {
  require(pred.sample_rate_hz() == ref.sample_rate_hz(), ErrorCode::kInvalidArgument,
          "loss needs prediction and reference at the same sample rate");
}

}  // namespace

LossKind parse_loss_kind(std::string_view name) {
  if (name == "sb") return LossKind::kSpectralBandpass;
  if (name == "l1") return LossKind::kL1;
  if (name == "l2") return LossKind::kL2;
  if (name == "negpearson") return LossKind::kNegPearson;
  throw Error(ErrorCode::kInvalidArgument, "unknown loss '" + std::string(name) + "'");
}

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kSpectralBandpass: return "sb";
    case LossKind::kL1: return "l1";
    case LossKind::kL2: return "l2";
    case LossKind::kNegPearson: return "negpearson";
  }
  return "?";
}

LossResult spectral_bandpass_loss(std::span<const double> pred, std::span<const double> ref,
                                  double sample_rate_hz, Band band) {
  check_pair(pred, ref);
  const std::size_t n = pred.size();
  const auto bins = band_bins(n, sample_rate_hz, band);
  require(!bins.empty(), ErrorCode::kDataError, "empty band");
  const Twiddles tw(n);
  const BandSpectrum p = band_spectrum(pred, bins, tw);
  const BandSpectrum q = band_spectrum(ref, bins, tw);

  double ss = 0.0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const double d = p.prob[b] - q.prob[b];
    ss += d * d;
  }
  LossResult out;
  out.value = std::sqrt(ss);
  out.grad_wrt_pred.assign(n, 0.0);
  // At value 0 the norm is not differentiable; report the zero subgradient.
  if (out.value == 0.0) return out;

  // dL/dprob_k, then through the normalisation prob_k = P_k / S.
  std::vector<double> g(bins.size());
  double g_dot_p = 0.0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    g[b] = (p.prob[b] - q.prob[b]) / out.value;
    g_dot_p += g[b] * p.prob[b];
  }
  // dL/dP_k = (g_k - <g, prob>) / S; dP_k/dx~_j = 2 (Re X_k cos - Im X_k sin).
  std::vector<double> a(bins.size()), c(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const double dp = (g[b] - g_dot_p) / p.total;
    a[b] = 2.0 * dp * p.re[b];
    c[b] = 2.0 * dp * p.im[b];
  }
  std::vector<double> grad(n, 0.0);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const std::size_t k = bins[b];
    std::size_t idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      grad[j] += a[b] * tw.c[idx] - c[b] * tw.s[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
  }
  // mean removal: project out the constant direction
  const double gm = mean(grad);
  for (std::size_t j = 0; j < n; ++j) out.grad_wrt_pred[j] = grad[j] - gm;
  return out;
}

LossResult spectral_bandpass_loss(const Waveform& pred, const Waveform& ref, double lo_hz,
                                  double hi_hz) {
  check_waveforms(pred, ref);
  return spectral_bandpass_loss(pred.samples(), ref.samples(), pred.sample_rate_hz(),
                                Band{lo_hz, hi_hz});
}

LossResult baseline_loss(LossKind kind, std::span<const double> pred,
                         std::span<const double> ref) {
  check_pair(pred, ref);
  const std::size_t n = pred.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossResult out;
  out.grad_wrt_pred.assign(n, 0.0);
  switch (kind) {
    case LossKind::kL1:
      for (std::size_t i = 0; i < n; ++i) {
        const double d = pred[i] - ref[i];
        out.value += std::abs(d);
        out.grad_wrt_pred[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
      }
      out.value *= inv_n;
      return out;
    case LossKind::kL2:
      for (std::size_t i = 0; i < n; ++i) {
        const double d = pred[i] - ref[i];
        out.value += d * d;
        out.grad_wrt_pred[i] = 2.0 * d * inv_n;
      }
      out.value *= inv_n;
      return out;
    case LossKind::kNegPearson: {
      const double mp = mean(pred), mr = mean(ref);
      double saa = 0.0, sbb = 0.0, sab = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double a = pred[i] - mp, b = ref[i] - mr;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
      }
      require(saa > 0.0 && sbb > 0.0, ErrorCode::kDataError, "zero variance");
      const double norm = std::sqrt(saa * sbb);
      const double rho = sab / norm;
      out.value = -rho;
      // Both centred vectors sum to zero, so the mean-removal Jacobian is a no-op.
      for (std::size_t i = 0; i < n; ++i)
        out.grad_wrt_pred[i] = -((ref[i] - mr) / norm - rho * (pred[i] - mp) / saa);
      return out;
    }
    case LossKind::kSpectralBandpass:
      break;
  }
  throw Error(ErrorCode::kInvalidArgument, "baseline_loss: spectral loss needs a sample rate");
}

LossResult baseline_loss(LossKind kind, const Waveform& pred, const Waveform& ref) {
  return baseline_loss(kind, std::span<const double>(pred.samples()),
                       std::span<const double>(ref.samples()));
}

LossResult compute_loss(LossKind kind, std::span<const double> pred, std::span<const double> ref,
                        double sample_rate_hz) {
  if (kind == LossKind::kSpectralBandpass)
    return spectral_bandpass_loss(pred, ref, sample_rate_hz);
  return baseline_loss(kind, pred, ref);
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  require(analytic.size() == numeric.size(), ErrorCode::kInvalidArgument,
          "gradient size mismatch");
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  const double floor = std::max(1e-3 * scale, 1e-300);
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

double finite_diff_gradcheck(const LossFn& loss, const Waveform& pred, const Waveform& ref,
                             double h) {
  std::vector<double> x = pred.samples();
  const auto analytic = loss(x, ref.samples()).grad_wrt_pred;
  std::vector<double> numeric(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = loss(x, ref.samples()).value;
    x[i] = keep - h;
    const double down = loss(x, ref.samples()).value;
    x[i] = keep;
    numeric[i] = (up - down) / (2.0 * h);
  }
  return max_relative_error(analytic, numeric);
}

}  // namespace breathflow
