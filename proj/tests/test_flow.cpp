#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "breathflow/error.hpp"
#include "breathflow/flow.hpp"
#include "breathflow/flow_cache.hpp"
#include "breathflow/synth.hpp"

using namespace breathflow;

namespace {

double mean_of(const Plane& p) {
  double s = 0;
  for (float v : p.data()) s += v;
  return s / p.size();
}

double rms_flow(const FlowField& f) {
  double s = 0;
  for (std::size_t i = 0; i < f.u.size(); ++i) s += f.u.data()[i] * f.u.data()[i] + f.v.data()[i] * f.v.data()[i];
  return std::sqrt(s / f.u.size());
}

GrayFrame textured(std::uint64_t seed, double dx = 0.0, double dy = 0.0, int side = 96) {
  return GrayFrame(periodic_texture(side, side, dx, dy, seed));
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("breathflow_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("gray frame validation") {
  CHECK_THROWS_AS(GrayFrame(Plane(15, 20, 0.5f)), Error);
  Plane p(16, 16, 0.5f);
  p.at(3, 3) = 1.5f;
  CHECK_THROWS_AS(GrayFrame{p}, Error);
  p.at(3, 3) = NAN;
  CHECK_THROWS_AS(GrayFrame{p}, Error);
  CHECK_NOTHROW(GrayFrame(Plane(16, 16, 1.0f)));
}

TEST_CASE("pyramid geometry") {
  auto levels = build_pyramid(Plane(96, 96, 0.3f));
  REQUIRE(levels.size() == 3);
  CHECK(levels[0].width() == 96);
  CHECK(levels[1].width() == 48);
  CHECK(levels[2].width() == 24);
  for (const auto& l : levels)
    for (float v : l.data()) CHECK(v == doctest::Approx(0.3f));
  CHECK(build_pyramid(Plane(16, 16, 0.1f)).size() == 1);
  CHECK(build_pyramid(Plane(10, 10, 0.1f)).size() == 1);
  CHECK(build_pyramid(Plane(128, 64, 0.1f)).back().height() >= 16);
}

TEST_CASE("zero motion") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const GrayFrame a = textured(seed);
    FlowEstimate e = estimate_flow(a, a);
    CHECK_FALSE(e.low_confidence);
    CHECK(rms_flow(e.flow) < 1e-3);
  }
}

TEST_CASE("integer translation") {
  const GrayFrame a = textured(42), b = textured(42, 1.0, 0.0);
  FlowEstimate e = estimate_flow(a, b);
  const double mu = mean_of(e.flow.u), mv = mean_of(e.flow.v);
  CHECK(mu >= 0.8);
  CHECK(mu <= 1.2);
  CHECK(std::abs(mv) <= 0.1);
}

TEST_CASE("vertical translation sign convention") {
  // b(x, y) = a(x, y - 0.5): content moves down, v > 0
  const GrayFrame a = textured(7), b = textured(7, 0.0, 0.5);
  FlowEstimate e = estimate_flow(a, b);
  CHECK(mean_of(e.flow.v) == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(mean_of(e.flow.u)) < 0.05);
}

TEST_CASE("sub-pixel bilinear shift") {
  const GrayFrame a = textured(9);
  Plane shifted(96, 96);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) shifted.at(x, y) = a.pixels().sample(x - 0.25f, static_cast<float>(y));
  FlowEstimate e = estimate_flow(a, GrayFrame(shifted));
  const double mu = mean_of(e.flow.u);
  CHECK(mu >= 0.15);
  CHECK(mu <= 0.35);
}

TEST_CASE("flow errors and low confidence") {
  CHECK_THROWS_AS(estimate_flow(textured(1, 0, 0, 96), textured(1, 0, 0, 64)), Error);
  const GrayFrame flat(Plane(48, 48, 0.4f));
  FlowEstimate e = estimate_flow(flat, flat);
  CHECK(e.low_confidence);
  CHECK(rms_flow(e.flow) == 0.0);
}

TEST_CASE("hsv encoding") {
  FlowField zero(8, 8);
  HsvFrame h0 = flow_to_hsv(zero);
  for (std::size_t i = 0; i < h0.v.size(); ++i) {
    CHECK(h0.v.data()[i] == 0.0f);
    CHECK(h0.h.data()[i] == 0.0f);
    CHECK(h0.s.data()[i] == 1.0f);
  }
  FlowField right(8, 8);
  for (auto& v : right.u.data()) v = 1.0f;
  HsvFrame hr = flow_to_hsv(right);
  CHECK(hr.h.at(3, 3) == 0.0f);
  CHECK(hr.v.at(3, 3) == 1.0f);
  FlowField down(8, 8);
  for (auto& v : down.v.data()) v = 1.0f;
  CHECK(flow_to_hsv(down).h.at(0, 0) == doctest::Approx(0.25));
  FlowField left(8, 8);
  for (auto& v : left.u.data()) v = -0.5f;
  HsvFrame hl = flow_to_hsv(left);
  CHECK(hl.h.at(1, 1) == doctest::Approx(0.5));
  CHECK(hl.v.at(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("property: hsv is bounded and V is monotone in magnitude") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.0f, 3.0f);
  FlowField f(16, 16);
  for (auto& v : f.u.data()) v = n(rng);
  for (auto& v : f.v.data()) v = n(rng);
  f.u.at(0, 0) = -1e30f;
  f.v.at(1, 0) = 1e-30f;
  const HsvFrame h = flow_to_hsv(f, 2.0);
  for (const Plane* p : {&h.h, &h.s, &h.v})
    for (float v : p->data()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  CHECK(h.h.data()[0] < 1.0f);
  double last = -1;
  for (double m = 0.0; m <= 3.0; m += 0.05) {
    FlowField g(1, 1);
    g.u.at(0, 0) = static_cast<float>(m * 0.6);
    g.v.at(0, 0) = static_cast<float>(m * -0.8);
    const double v = flow_to_hsv(g, 2.0).v.at(0, 0);
    CHECK(v >= last);
    last = v;
  }
  CHECK(last == 1.0);
}

TEST_CASE("region vertical mean inverts the encoding below saturation") {
  FlowField f(10, 10);
  for (auto& v : f.v.data()) v = -0.3f;
  for (auto& v : f.u.data()) v = 0.2f;
  CHECK(hsv_vertical_mean(flow_to_hsv(f), 0, 0, 10, 10) == doctest::Approx(-0.3).epsilon(1e-5));
}

TEST_CASE("grid frame selection") {
  CHECK(select_grid_frames(1800, 30.0).size() == 300);
  const auto idx = select_grid_frames(450, 15.0);
  REQUIRE(idx.size() == 150);
  CHECK(idx[1] == 3);
  CHECK(idx.back() == 447);
  // 12.5 fps: 2.5 frames per step, nearest with half up
  const auto odd = select_grid_frames(25, 12.5);
  REQUIRE(odd.size() == 10);
  CHECK(odd[1] == 3);
  CHECK(odd[2] == 5);
  CHECK_THROWS_AS(select_grid_frames(100, 4.0), Error);
}

TEST_CASE("property: output length is floor(duration x 5) - 1 +- 1") {
  for (double fps : {10.0, 12.0, 15.0, 24.0, 25.0, 29.97, 30.0})
    for (double dur : {2.0, 7.3, 20.0, 61.1}) {
      const auto frames = static_cast<std::size_t>(std::floor(dur * fps));
      const long fields = static_cast<long>(select_grid_frames(frames, fps).size()) - 1;
      CAPTURE(fps);
      CAPTURE(dur);
      CHECK(std::abs(fields - (static_cast<long>(std::floor(dur * 5)) - 1)) <= 1);
    }
}

TEST_CASE("preprocess clip") {
  std::vector<GrayFrame> frames(9, textured(5, 0, 0, 64));
  FlowClip clip = preprocess_clip(frames, 15.0);
  REQUIRE(clip.fields.size() == 2);
  CHECK(clip.rate_hz == 5.0);
  CHECK(clip.hsv.size() == 2);
  for (const auto& f : clip.fields) {
    CHECK(f.width() == 96);
    CHECK(f.height() == 96);
    for (float v : f.u.data()) CHECK(v == 0.0f);
    for (float v : f.v.data()) CHECK(v == 0.0f);
  }
  std::vector<GrayFrame> few(3, textured(5, 0, 0, 64));
  CHECK_THROWS_WITH_AS(preprocess_clip(few, 15.0), doctest::Contains("clip too short"), Error);
}

TEST_CASE("preprocess keeps temporal order") {
  // alternating shifts: fields must alternate sign in u
  std::vector<GrayFrame> frames;
  for (int i = 0; i < 6; ++i) frames.push_back(textured(11, (i % 2) * 0.5, 0.0));
  FlowClip clip = preprocess_clip(frames, 5.0);
  REQUIRE(clip.fields.size() == 5);
  for (std::size_t k = 0; k < clip.fields.size(); ++k) {
    const double mu = mean_of(clip.fields[k].u);
    CHECK((k % 2 == 0 ? mu > 0.3 : mu < -0.3));
  }
}

TEST_CASE("synthetic breathing clip through the flow solver") {
  SynthSpec spec;
  spec.rate_bpm = 24.0;
  spec.duration_s = 30.0;
  spec.seed = 3;
  const SynthFrameClip sc = synth_frame_clip(spec);
  CHECK(sc.frames.size() == 450);
  const FlowClip clip = preprocess_clip(sc.frames, sc.fps);
  const Region r = central_region();
  std::vector<double> sig;
  for (const auto& h : clip.hsv) sig.push_back(hsv_vertical_mean(h, r.x0, r.y0, r.x1, r.y1));
  CHECK(std::abs(estimate_rate(Waveform(sig, 5.0)).bpm - 24.0) <= 2.0);
}

TEST_CASE("flow cache round trip and corruption") {
  const auto dir = temp_dir("cache");
  std::vector<FlowField> fields(3, FlowField(96, 96));
  fields[1].u.at(5, 7) = 0.125f;
  fields[2].v.at(95, 95) = -3.5f;
  const auto path = dir / "c.aflw";
  write_flow_cache(path, fields);
  auto header = probe_flow_cache(path);
  REQUIRE(header);
  CHECK(header->field_count == 3);
  CHECK(header->width == 96);
  CHECK(header->rate_hz == 5.0f);
  const auto back = read_flow_cache(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].u == fields[i].u);
    CHECK(back[i].v == fields[i].v);
  }
  // bytes on disk: little-endian header
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "AFLW");
  CHECK(std::filesystem::file_size(path) == 18 + 3 * 2 * 96 * 96 * 4);

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_FALSE(probe_flow_cache(path));
  CHECK_THROWS_AS(read_flow_cache(path), Error);
  write_flow_cache(path, fields);
  std::filesystem::resize_file(path, 100);
  CHECK_FALSE(probe_flow_cache(path));
  CHECK_FALSE(probe_flow_cache(dir / "missing.aflw"));
}
