#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "breathflow/annotations.hpp"
#include "breathflow/error.hpp"
#include "breathflow/flow.hpp"
#include "breathflow/manifest.hpp"
#include "breathflow/synth.hpp"

using namespace breathflow;
namespace fs = std::filesystem;

namespace {

Waveform region_signal(const FlowClip& clip) {
  const Region r = central_region();
  std::vector<double> s;
  for (const auto& f : clip.fields) {
    double acc = 0;
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) acc += f.v.at(x, y);
    s.push_back(acc / ((r.x1 - r.x0) * (r.y1 - r.y0)));
  }
  return Waveform(std::move(s), clip.rate_hz);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("spec validation") {
  SynthSpec s;
  CHECK_NOTHROW(s.validate());
  s.rate_bpm = 17;
  CHECK_THROWS_AS(s.validate(), Error);
  s = SynthSpec{};
  s.duration_s = 19.9;
  CHECK_THROWS_AS(s.validate(), Error);
  s = SynthSpec{};
  s.amplitude_px = 2.5;
  CHECK_THROWS_AS(s.validate(), Error);
  s = SynthSpec{};
  s.noise_std = -1;
  CHECK_THROWS_AS(s.validate(), Error);
  CHECK(parse_distractor("secondary_oscillator") == Distractor::kSecondaryOscillator);
  CHECK_THROWS_AS(parse_distractor("wobble"), Error);
}

TEST_CASE("noiseless waveforms land on their rate across the band") {
  for (int bpm = 18; bpm <= 60; ++bpm) {
    SynthSpec s;
    s.rate_bpm = bpm;
    const Waveform w = synth_waveform(s);
    CHECK(w.sample_rate_hz() == 5.0);
    CHECK(w.size() == 300);
    CHECK(std::abs(estimate_rate(w).bpm - bpm) <= 0.5);
  }
}

TEST_CASE("42 bpm at 0 dB SNR") {
  SynthSpec s;
  s.rate_bpm = 42;
  s.noise_std = std::sqrt(0.5);  // sine power 1/2
  s.seed = 11;
  CHECK(std::abs(estimate_rate(synth_waveform(s)).bpm - 42.0) <= 1.0);
}

TEST_CASE("generators are deterministic in the seed") {
  SynthSpec s;
  s.noise_std = 0.3;
  s.seed = 5;
  CHECK(synth_waveform(s).samples() == synth_waveform(s).samples());
  SynthSpec t = s;
  t.seed = 6;
  CHECK_FALSE(synth_waveform(s).samples() == synth_waveform(t).samples());

  s.duration_s = 20;
  const FlowClip a = synth_flow_clip(s), b = synth_flow_clip(s);
  REQUIRE(a.fields.size() == b.fields.size());
  for (std::size_t i = 0; i < a.fields.size(); ++i) {
    CHECK(a.fields[i].u == b.fields[i].u);
    CHECK(a.fields[i].v == b.fields[i].v);
  }
}

TEST_CASE("flow clip region carries the breathing signal") {
  SynthSpec s;
  s.rate_bpm = 27;
  s.duration_s = 30;
  s.noise_std = 0.5;
  s.seed = 2;
  s.phase_rad = 1.0;
  const FlowClip clip = synth_flow_clip(s);
  CHECK(clip.fields.size() == 150);
  CHECK(clip.hsv.size() == 150);
  CHECK(clip.fields[0].width() == 96);
  CHECK(std::abs(estimate_rate(region_signal(clip)).bpm - 27.0) <= 1.0);

  const Region r = central_region();
  CHECK(r.x1 - r.x0 == 24);
  CHECK(r.x0 == 36);

  // noiseless: region exactly A sin(wt + phi), zero outside
  s.noise_std = 0;
  const FlowClip clean = synth_flow_clip(s);
  const double t = 7 / 5.0;
  CHECK(clean.fields[7].v.at(40, 40) == doctest::Approx(0.5 * std::sin(2 * M_PI * 27 / 60.0 * t + 1.0)));
  CHECK(clean.fields[7].v.at(5, 5) == 0.0f);
  CHECK(clean.fields[7].u.at(40, 40) == 0.0f);
}

TEST_CASE("secondary oscillator stays out of band") {
  SynthSpec s;
  s.rate_bpm = 33;
  s.duration_s = 40;
  s.noise_std = 0.1;
  s.seed = 3;
  const double base = estimate_rate(region_signal(synth_flow_clip(s))).bpm;
  s.distractor = Distractor::kSecondaryOscillator;
  const double dis = estimate_rate(region_signal(synth_flow_clip(s))).bpm;
  CHECK(std::abs(dis - 33.0) <= 1.0);
  CHECK(std::abs(dis - base) <= 1.0);
}

TEST_CASE("annotations sit where the phase wraps") {
  SynthSpec s;
  s.rate_bpm = 30;  // 2 s period
  s.duration_s = 20;
  s.phase_rad = M_PI / 2;
  const AnnotationTrack t = synth_annotations(s);
  CHECK_NOTHROW(t.validate());
  REQUIRE(t.exhalation_times_s.size() == 10);
  CHECK(t.exhalation_times_s[0] == doctest::Approx(1.5));
  CHECK(t.exhalation_times_s[1] == doctest::Approx(3.5));
  const Waveform w = annotations_to_waveform(t, 15.0);
  CHECK(std::abs(estimate_rate(resample(w, 5.0)).bpm - 30.0) <= 1.0);
}

TEST_CASE("frame clip: annotations and rendering") {
  SynthSpec s;
  s.rate_bpm = 36;
  s.duration_s = 20;
  s.seed = 4;
  const SynthFrameClip c = synth_frame_clip(s, "fc");
  CHECK(c.fps == 15.0);
  CHECK(c.frames.size() == 300);
  CHECK(c.frames[0].width() == 128);
  CHECK(c.annotations.clip_id == "fc");
  CHECK(c.annotations.clip_duration_s == 20.0);
  CHECK_NOTHROW(c.annotations.validate());
  const Waveform ref = annotations_to_waveform(c.annotations, c.fps);
  CHECK(std::abs(estimate_rate(resample(ref, 5.0)).bpm - 36.0) <= 1.0);
  float lo = 1.0f, hi = 0.0f;
  for (const auto& f : c.frames)
    for (float p : f.pixels().data()) lo = std::min(lo, p), hi = std::max(hi, p);
  CHECK(lo >= 0.0f);
  CHECK(hi <= 1.0f);
  // the torso moves
  CHECK(c.frames[0].pixels() != c.frames[2].pixels());
}

TEST_CASE("static frame clip yields near-zero flow") {
  SynthSpec s;
  s.amplitude_px = 0;
  s.duration_s = 20;
  s.seed = 8;
  const SynthFrameClip c = synth_frame_clip(s);
  // a few seconds suffice; the remainder is identical by construction
  std::vector<GrayFrame> head(c.frames.begin(), c.frames.begin() + 31);
  const FlowClip flow = preprocess_clip(head, c.fps);
  CHECK(flow.fields.size() == 9);  // 10 picks at 5 Hz
  double ss = 0;
  std::size_t n = 0;
  for (const auto& f : flow.fields)
    for (std::size_t i = 0; i < f.u.size(); ++i) {
      ss += f.u.data()[i] * f.u.data()[i] + f.v.data()[i] * f.v.data()[i];
      ++n;
    }
  CHECK(std::sqrt(ss / n) < 1e-2);
}

TEST_CASE("periodic texture wraps exactly") {
  const Plane a = periodic_texture(64, 48, 0, 0, 9);
  const Plane b = periodic_texture(64, 48, 3, 0, 9);
  double lo = 1, hi = 0, err = 0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) {
      lo = std::min<double>(lo, a.at(x, y));
      hi = std::max<double>(hi, a.at(x, y));
      err = std::max<double>(err, std::abs(b.at((x + 3) % 64, y) - a.at(x, y)));
    }
  CHECK(lo >= 0.1 - 1e-6);
  CHECK(hi <= 0.9 + 1e-6);
  CHECK(err < 1e-5);
}

TEST_CASE("dataset plan") {
  DatasetOptions o;
  o.n_clips = 5;
  const auto p5 = plan_dataset(o);
  REQUIRE(p5.size() == 5);
  const double want[] = {18, 24, 30, 36, 42};
  for (int i = 0; i < 5; ++i) CHECK(p5[i].rate_bpm == doctest::Approx(want[i]));

  o.n_clips = 40;
  const auto p = plan_dataset(o);
  std::set<int> train_subj, test_subj;
  int ntrain = 0;
  for (const auto& c : p) {
    (c.train ? train_subj : test_subj).insert(c.subject_id);
    ntrain += c.train;
    CHECK(c.rate_bpm >= 18.0);
    CHECK(c.rate_bpm <= 42.0);
  }
  CHECK(ntrain == 24);
  CHECK(p.size() - ntrain == 16);
  for (int s : train_subj) CHECK(test_subj.count(s) == 0);

  o.n_clips = 1;
  CHECK_THROWS_AS(plan_dataset(o), Error);
}

TEST_CASE("dataset on disk is deterministic and valid") {
  const fs::path root = fs::temp_directory_path() / "breathflow_test_dataset";
  fs::remove_all(root);
  DatasetOptions o;
  o.n_clips = 6;
  o.duration_s = 20;
  o.seed = 7;
  const fs::path m1 = make_synthetic_dataset(root / "a", o);
  const fs::path m2 = make_synthetic_dataset(root / "b", o);
  CHECK(slurp(m1) == slurp(m2));
  CHECK(slurp(root / "a" / "annotations.csv") == slurp(root / "b" / "annotations.csv"));
  CHECK(slurp(root / "a" / "cache" / "clip_000.aflw") == slurp(root / "b" / "cache" / "clip_000.aflw"));
  const Manifest m = read_manifest(m1);
  CHECK_NOTHROW(m.validate());
  CHECK(m.entries.size() == 6);
  CHECK_FALSE(m.entries[0].has_frames());
  const auto tracks = read_annotations(root / "a" / "annotations.csv");
  CHECK(tracks.size() == 6);

  o.n_clips = 2;
  o.render_frames = true;
  const Manifest mf = read_manifest(make_synthetic_dataset(root / "f", o));
  REQUIRE(mf.entries[0].has_frames());
  CHECK(mf.entries[0].native_fps == 15.0);
  std::size_t frames = 0;
  for (const auto& e : fs::directory_iterator(mf.resolve(mf.entries[0].frames_path))) frames += e.is_regular_file();
  CHECK(frames == 300);
  fs::remove_all(root);
}
