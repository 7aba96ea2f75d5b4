#pragma once

// Synthetic breathing oracles: waveforms, flow clips that bypass the solver,
// rendered frame clips that exercise it, and whole datasets on disk.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "breathflow/flow.hpp"
#include "breathflow/image.hpp"
#include "breathflow/signal.hpp"

namespace breathflow {

enum class Distractor { kNone, kGlobalJitter, kSecondaryOscillator };

Distractor parse_distractor(const std::string& name);  // "none", "global_jitter", "secondary_oscillator"

inline constexpr double kSecondaryOscillatorHz = 1.5;
inline constexpr int kRegionSide = 24;       // central breathing region of a 96x96 flow clip
inline constexpr int kFrameClipSide = 128;
inline constexpr double kFrameClipFps = 15.0;

struct SynthSpec {
  double rate_bpm = 30.0;
  double duration_s = 60.0;
  double amplitude_px = 0.5;
  double noise_std = 0.0;
  Distractor distractor = Distractor::kNone;
  std::uint64_t seed = 0;
  double phase_rad = 0.0;  // breathing phase at t = 0

  /// rate in [18, 60], duration >= 20 s, amplitude in [0, 2] (0 = static),
  /// noise_std >= 0.
  void validate() const;
};

/// sin(2 pi rate / 60 t + phase) + N(0, noise_std^2) at 5 Hz.
Waveform synth_waveform(const SynthSpec& spec);

/// Square region [x0, x1) x [y0, y1) carrying the breathing motion.
struct Region {
  int x0, y0, x1, y1;
};
Region central_region(int side = kFlowSide, int region = kRegionSide);

/// round(duration * 5) fields of 96x96. Inside the central region
/// v = amplitude sin(2 pi rate / 60 t + phase); both components carry
/// N(0, noise_std^2) everywhere. HSV encoded with mag_ref = 1.
FlowClip synth_flow_clip(const SynthSpec& spec);

/// Exhalation-start analog: the instants where the breathing phase wraps to
/// zero, i.e. upward zero crossings of the flow-clip signal and minima of the
/// frame-clip displacement.
AnnotationTrack synth_annotations(const SynthSpec& spec, const std::string& clip_id = "synth");

struct SynthFrameClip {
  std::vector<GrayFrame> frames;
  AnnotationTrack annotations;
  double fps = kFrameClipFps;
};

/// 128x128 frames at 15 fps: a soft-edged, textured bright ellipse displaced
/// vertically by amplitude * sin(2 pi rate / 60 t + phase - pi / 2) over a
/// static textured background, rendered at sub-pixel precision.
SynthFrameClip synth_frame_clip(const SynthSpec& spec, const std::string& clip_id = "synth");

/// Smooth random texture in [0.1, 0.9] that is periodic over the image, built
/// from integer-frequency cosines and evaluated at (x - shift_x, y - shift_y),
/// so that the shifted image is an exact wrap-around translation.
Plane periodic_texture(int width, int height, double shift_x, double shift_y, std::uint64_t seed);

struct DatasetOptions {
  int n_clips = 40;
  double rate_lo_bpm = 18.0;
  double rate_hi_bpm = 42.0;
  std::uint64_t seed = 0;
  double duration_s = 30.0;
  double amplitude_px = 0.5;
  double noise_std = 0.1;
  Distractor distractor = Distractor::kNone;
  bool render_frames = false;       // frame clips (flow computed later) vs flow caches
  double annotation_jitter_s = 0.0;  // per-clip uniform shift in [-j, j] of the annotations
  int subjects = 5;
  int train_subjects = 3;
};

struct DatasetClip {
  std::string clip_id;
  int subject_id = 0;
  double rate_bpm = 0.0;
  bool train = false;
};

/// Rates linspace(lo, hi, n); clip i belongs to subject i % subjects and
/// subjects below train_subjects form the training split.
std::vector<DatasetClip> plan_dataset(const DatasetOptions& opts);

/// Writes manifest.csv, annotations.csv and either frames/<clip>/ image
/// sequences or cache/<clip>.aflw flow caches under out_dir. Returns the
/// manifest path.
std::filesystem::path make_synthetic_dataset(const std::filesystem::path& out_dir,
                                             const DatasetOptions& opts);

}  // namespace breathflow
