#pragma once

// Training losses on predicted vs reference waveforms, each returning its
// value and the exact gradient with respect to the prediction.

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "breathflow/signal.hpp"

namespace breathflow {

enum class LossKind { kSpectralBandpass, kL1, kL2, kNegPearson };

LossKind parse_loss_kind(std::string_view name);  // "sb", "l1", "l2", "negpearson"
std::string_view loss_kind_name(LossKind kind);

struct LossResult {
  double value = 0.0;
  std::vector<double> grad_wrt_pred;
};

/// Spectral bandpass loss: the L2 distance between the unit-sum normalised,
/// band-limited one-sided power spectra of the mean-removed prediction and
/// reference. Invariant to amplitude, offset and circular time shifts of
/// either argument; bounded in [0, sqrt(2)]. The band is inclusive at both
/// edges. Throws "degenerate spectrum" if either input has no in-band power.
LossResult spectral_bandpass_loss(std::span<const double> pred, std::span<const double> ref,
                                  double sample_rate_hz, Band band = {});
LossResult spectral_bandpass_loss(const Waveform& pred, const Waveform& ref,
                                  double lo_hz = kBandLoHz, double hi_hz = kBandHiHz);

/// L1 (mean |p - r|, subgradient 0 at equality), L2 (mean (p - r)^2) or
/// NegPearson (-corr(p, r)).
LossResult baseline_loss(LossKind kind, std::span<const double> pred,
                         std::span<const double> ref);
LossResult baseline_loss(LossKind kind, const Waveform& pred, const Waveform& ref);

/// Dispatch on kind; sample_rate_hz is only used by the spectral loss.
LossResult compute_loss(LossKind kind, std::span<const double> pred, std::span<const double> ref,
                        double sample_rate_hz);

using LossFn =
    std::function<LossResult(std::span<const double> pred, std::span<const double> ref)>;

/// Largest per-coordinate relative error between two gradients. Each
/// coordinate is scaled by max(|a|, |b|, 1e-3 * the largest magnitude in
/// either gradient), so coordinates that are numerically zero compared with
/// the rest do not dominate the ratio.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Central differences on every prediction coordinate compared with the
/// analytic gradient; returns max_relative_error of the two.
double finite_diff_gradcheck(const LossFn& loss, const Waveform& pred, const Waveform& ref,
                             double h = 1e-5);

}  // namespace breathflow
