#pragma once

// Coarse-to-fine variational optical flow and the HSV encoding fed to the
// network.

#include <vector>

#include "breathflow/image.hpp"

namespace breathflow {

inline constexpr int kFlowSide = 96;
inline constexpr double kFlowRateHz = 5.0;

struct FlowField {
  Plane u;  // horizontal displacement, pixels per frame step
  Plane v;  // vertical displacement, +y is down

  FlowField() = default;
  FlowField(int width, int height) : u(width, height), v(width, height) {}
  int width() const { return u.width(); }
  int height() const { return u.height(); }
};

struct FlowEstimate {
  FlowField flow;
  bool low_confidence = false;  // set when the input had no usable texture
};

struct HsvFrame {
  Plane h, s, v;
};

struct FlowClip {
  std::vector<FlowField> fields;
  std::vector<HsvFrame> hsv;
  double rate_hz = kFlowRateHz;
};

struct FlowParams {
  double pyramid_scale = 0.5;
  int min_side = 16;
  double alpha = 0.02;          // smoothness weight, intensities in [0, 1]
  double epsilon = 1e-3;        // Charbonnier epsilon for data and smoothness
  int warp_iterations = 3;      // per pyramid level
  int irls_iterations = 2;      // reweightings per warp
  int relaxation_sweeps = 30;   // red-black sweeps per reweighting
  double omega = 1.8;           // over-relaxation factor
  double hsv_mag_ref = 1.0;     // pixels mapped to V = 1
};

/// Level 0 is the input; each further level is low-passed then bilinearly
/// resampled by `scale`. Stops before either side drops below min_side.
std::vector<Plane> build_pyramid(const Plane& frame, double scale = 0.5, int min_side = 16);

/// Charbonnier-penalised brightness constancy plus smoothness, minimised per
/// pyramid level with incremental warping and IRLS. Flow maps pixels of `a`
/// into `b`: b(x + u, y + v) ~ a(x, y).
FlowEstimate estimate_flow(const GrayFrame& a, const GrayFrame& b, const FlowParams& params = {});

/// H = atan2(v, u) in turns [0, 1), S = 1, V = min(1, |flow| / mag_ref).
HsvFrame flow_to_hsv(const FlowField& f, double mag_ref = 1.0);

/// Mean over a rectangle of V * sin(2 pi H), i.e. the vertical flow recovered
/// from the encoding (scaled by 1 / mag_ref, saturating with V).
double hsv_vertical_mean(const HsvFrame& hsv, int x0, int y0, int x1, int y1);

/// Picks the frame nearest each 5 Hz instant, resizes to 96x96 and estimates
/// flow between consecutive picks. Frame pairs are processed in parallel.
FlowClip preprocess_clip(const std::vector<GrayFrame>& frames, double native_fps,
                         const FlowParams& params = {});

/// Indices of the frames preprocess_clip selects.
std::vector<std::size_t> select_grid_frames(std::size_t frame_count, double native_fps);

/// Builds a FlowClip (with HSV) from precomputed fields.
FlowClip make_flow_clip(std::vector<FlowField> fields, double mag_ref = 1.0);

}  // namespace breathflow
