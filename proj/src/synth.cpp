#include "breathflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <random>

#include "breathflow/annotations.hpp"
#include "breathflow/error.hpp"
#include "breathflow/flow_cache.hpp"
#include "breathflow/manifest.hpp"
#include "breathflow/netpbm.hpp"

namespace breathflow {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double omega(const SynthSpec& s) { return kTwoPi * s.rate_bpm / 60.0; }

// Sum of integer-frequency cosines over a period, scaled into [0.1, 0.9].
class CosineTexture {
 public:
  CosineTexture(double period_x, double period_y, std::uint64_t seed, int components = 12,
                int max_freq = 6)
      : px_(period_x), py_(period_y) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> freq(-max_freq, max_freq);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    double total = 0.0;
    while (static_cast<int>(waves_.size()) < components) {
      Wave w{freq(rng), freq(rng), phase(rng), 0.0};
      if (w.fx == 0 && w.fy == 0) continue;
      w.amp = 1.0 / std::hypot(w.fx, w.fy);
      total += w.amp;
      waves_.push_back(w);
    }
    for (auto& w : waves_) w.amp *= 0.4 / total;
  }

  double operator()(double x, double y) const {
    double v = 0.5;
    for (const auto& w : waves_)
      v += w.amp * std::cos(kTwoPi * (w.fx * x / px_ + w.fy * y / py_) + w.phase);
    return v;
  }

 private:
  struct Wave {
    int fx, fy;
    double phase, amp;
  };
  double px_, py_;
  std::vector<Wave> waves_;
};

}  // namespace

Distractor parse_distractor(const std::string& name) {
  if (name == "none") return Distractor::kNone;
  if (name == "global_jitter") return Distractor::kGlobalJitter;
  if (name == "secondary_oscillator") return Distractor::kSecondaryOscillator;
  throw Error(ErrorCode::kInvalidArgument, "unknown distractor '" + name + "'");
}

void SynthSpec::validate() const {
  require(rate_bpm >= 18.0 && rate_bpm <= 60.0, ErrorCode::kInvalidArgument,
          "synthetic rate must be in [18, 60] bpm");
  require(duration_s >= 20.0 && std::isfinite(duration_s), ErrorCode::kInvalidArgument,
          "synthetic duration must be >= 20 s");
  require(amplitude_px >= 0.0 && amplitude_px <= 2.0, ErrorCode::kInvalidArgument,
          "amplitude_px must be in [0, 2]");
  require(noise_std >= 0.0 && std::isfinite(noise_std), ErrorCode::kInvalidArgument,
          "noise_std must be >= 0");
}

Waveform synth_waveform(const SynthSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(std::lround(spec.duration_s * kFlowRateHz));
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kFlowRateHz;
    x[i] = std::sin(omega(spec) * t + spec.phase_rad);
    if (spec.noise_std > 0.0) x[i] += spec.noise_std * noise(rng);
  }
  return Waveform(std::move(x), kFlowRateHz);
}

Region central_region(int side, int region) {
  const int x0 = (side - region) / 2;
  return Region{x0, x0, x0 + region, x0 + region};
}

FlowClip synth_flow_clip(const SynthSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(std::lround(spec.duration_s * kFlowRateHz));
  const Region r = central_region();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  const auto sd = static_cast<float>(spec.noise_std);
  std::vector<FlowField> fields;
  fields.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / kFlowRateHz;
    const double breath = spec.amplitude_px * std::sin(omega(spec) * t + spec.phase_rad);
    double gu = 0.0, gv = 0.0;  // whole-frame distractor motion
    if (spec.distractor == Distractor::kSecondaryOscillator) {
      gv = spec.amplitude_px * std::sin(kTwoPi * kSecondaryOscillatorHz * t);
    } else if (spec.distractor == Distractor::kGlobalJitter) {
      std::normal_distribution<double> jitter(0.0, 0.5 * spec.amplitude_px);
      gu = jitter(rng);
      gv = jitter(rng);
    }
    FlowField f(kFlowSide, kFlowSide);
    for (int y = 0; y < kFlowSide; ++y)
      for (int x = 0; x < kFlowSide; ++x) {
        const bool inside = x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1;
        double u = gu, v = gv + (inside ? breath : 0.0);
        if (sd > 0.0f) {
          u += sd * noise(rng);
          v += sd * noise(rng);
        }
        f.u.at(x, y) = static_cast<float>(u);
        f.v.at(x, y) = static_cast<float>(v);
      }
    fields.push_back(std::move(f));
  }
  return make_flow_clip(std::move(fields));
}

AnnotationTrack synth_annotations(const SynthSpec& spec, const std::string& clip_id) {
  spec.validate();
  AnnotationTrack track{clip_id, {}, spec.duration_s};
  const double w = omega(spec);
  // phase wraps to zero at w t + phase = 2 pi k
  for (auto k = static_cast<long>(std::ceil(spec.phase_rad / kTwoPi));; ++k) {
    const double t = (kTwoPi * static_cast<double>(k) - spec.phase_rad) / w;
    if (t < 0.0) continue;
    if (t > spec.duration_s) break;
    track.exhalation_times_s.push_back(t);
  }
  return track;
}

SynthFrameClip synth_frame_clip(const SynthSpec& spec, const std::string& clip_id) {
  spec.validate();
  const int side = kFrameClipSide;
  const auto n = static_cast<std::size_t>(std::lround(spec.duration_s * kFrameClipFps));
  const CosineTexture background(side, side, splitmix64(spec.seed ^ 0xB6ull));
  const CosineTexture torso(side / 2.0, side / 2.0, splitmix64(spec.seed ^ 0x70ull), 16, 5);
  const double cx = side / 2.0, cy = side / 2.0;
  const double ax = 0.34 * side, ay = 0.26 * side;
  const double edge = 3.0;  // soft edge width, px

  // The background never moves; render it once.
  Plane bg(side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      bg.at(x, y) = static_cast<float>(0.1 + 0.3 * background(x + 0.5, y + 0.5));

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  SynthFrameClip clip;
  clip.fps = kFrameClipFps;
  clip.frames.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kFrameClipFps;
    double dy = -spec.amplitude_px * std::cos(omega(spec) * t + spec.phase_rad);
    double dx = 0.0;
    if (spec.distractor == Distractor::kSecondaryOscillator)
      dy += spec.amplitude_px * std::sin(kTwoPi * kSecondaryOscillatorHz * t);
    else if (spec.distractor == Distractor::kGlobalJitter) {
      dx += 0.25 * spec.amplitude_px * noise(rng);
      dy += 0.25 * spec.amplitude_px * noise(rng);
    }
    Plane img(side, side);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        // pixel centre in torso-local coordinates
        const double lx = x + 0.5 - cx - dx, ly = y + 0.5 - cy - dy;
        const double r = std::hypot(lx / ax, ly / ay);
        const double dist = (r - 1.0) * std::min(ax, ay);
        const double s = std::clamp(0.5 - dist / edge, 0.0, 1.0);
        const double alpha = s * s * (3.0 - 2.0 * s);
        double v = bg.at(x, y);
        if (alpha > 0.0) v = alpha * (0.5 + 0.4 * torso(lx, ly)) + (1.0 - alpha) * v;
        if (spec.noise_std > 0.0) v += spec.noise_std * noise(rng);
        img.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    clip.frames.emplace_back(std::move(img));
  }
  clip.annotations = synth_annotations(spec, clip_id);
  return clip;
}

Plane periodic_texture(int width, int height, double shift_x, double shift_y, std::uint64_t seed) {
  const CosineTexture tex(width, height, seed);
  Plane p(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) p.at(x, y) = static_cast<float>(tex(x - shift_x, y - shift_y));
  return p;
}

std::vector<DatasetClip> plan_dataset(const DatasetOptions& o) {
  require(o.n_clips >= 2, ErrorCode::kInvalidArgument, "need at least 2 synthetic clips");
  require(o.rate_lo_bpm <= o.rate_hi_bpm, ErrorCode::kInvalidArgument, "rate range is empty");
  require(o.subjects >= 2 && o.train_subjects >= 1 && o.train_subjects < o.subjects,
          ErrorCode::kInvalidArgument, "need at least one train and one test subject");
  std::vector<DatasetClip> plan;
  for (int i = 0; i < o.n_clips; ++i) {
    DatasetClip c;
    char id[32];
    std::snprintf(id, sizeof id, "clip_%03d", i);
    c.clip_id = id;
    c.subject_id = i % o.subjects;
    c.rate_bpm = o.rate_lo_bpm + (o.rate_hi_bpm - o.rate_lo_bpm) * i / (o.n_clips - 1);
    c.train = c.subject_id < o.train_subjects;
    plan.push_back(c);
  }
  return plan;
}

std::filesystem::path make_synthetic_dataset(const std::filesystem::path& out_dir,
                                             const DatasetOptions& o) {
  namespace fs = std::filesystem;
  const auto plan = plan_dataset(o);
  fs::create_directories(out_dir);
  if (!o.render_frames) fs::create_directories(out_dir / "cache");
  Manifest manifest;
  manifest.base_dir = out_dir;
  std::vector<AnnotationTrack> tracks(plan.size());
  std::vector<ManifestEntry> entries(plan.size());

  // clips are independent; each gets its own seed stream
  std::exception_ptr failure;
  auto make_clip = [&](std::size_t i) {
    const auto& c = plan[i];
    const std::uint64_t clip_seed = splitmix64(o.seed * 0x100000001B3ull + i);
    std::mt19937_64 rng(clip_seed);
    SynthSpec spec;
    spec.rate_bpm = c.rate_bpm;
    spec.duration_s = o.duration_s;
    spec.amplitude_px = o.amplitude_px;
    spec.noise_std = o.noise_std;
    spec.distractor = o.distractor;
    spec.seed = splitmix64(clip_seed);
    spec.phase_rad = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
    const double jitter =
        o.annotation_jitter_s > 0.0
            ? std::uniform_real_distribution<double>(-o.annotation_jitter_s, o.annotation_jitter_s)(rng)
            : 0.0;

    ManifestEntry e;
    e.clip_id = c.clip_id;
    e.subject_id = "s" + std::to_string(c.subject_id);
    e.native_fps = kFrameClipFps;
    e.annotation_path = "annotations.csv";
    e.split = c.train ? Split::kTrain : Split::kTest;
    e.duration_s = o.duration_s;
    if (o.render_frames) {
      const auto clip = synth_frame_clip(spec, c.clip_id);
      const fs::path dir = out_dir / "frames" / c.clip_id;
      fs::create_directories(dir);
      for (std::size_t k = 0; k < clip.frames.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu.pgm", k);
        write_pgm16(dir / name, clip.frames[k].pixels());
      }
      e.frames_path = "frames/" + c.clip_id;
    } else {
      auto clip = synth_flow_clip(spec);
      write_flow_cache(out_dir / "cache" / (c.clip_id + ".aflw"), clip.fields, clip.rate_hz);
      e.frames_path = "-";
    }
    AnnotationTrack track = synth_annotations(spec, c.clip_id);
    if (jitter != 0.0) {
      std::vector<double> shifted;
      for (double t : track.exhalation_times_s)
        if (t + jitter >= 0.0 && t + jitter <= o.duration_s) shifted.push_back(t + jitter);
      track.exhalation_times_s = std::move(shifted);
    }
    tracks[i] = std::move(track);
    entries[i] = std::move(e);
  };
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < plan.size(); ++i) {
    try {
      make_clip(i);
    } catch (...) {
#pragma omp critical(breathflow_synth_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  manifest.entries = std::move(entries);
  manifest.validate();
  write_annotations(out_dir / "annotations.csv", tracks);
  const fs::path manifest_path = out_dir / "manifest.csv";
  write_manifest(manifest_path, manifest);
  return manifest_path;
}

}  // namespace breathflow
