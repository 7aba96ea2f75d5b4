#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "breathflow/checkpoint.hpp"
#include "breathflow/error.hpp"
#include "breathflow/net.hpp"
#include "breathflow/synth.hpp"
#include "gradcheck.hpp"

using namespace breathflow;
using namespace testutil;

namespace {

NetConfig mini_config(int chunk = 50) {
  NetConfig c;
  c.chunk_len = chunk;
  c.block_channels = {4, 4};
  c.input_size = 8;
  return c;
}

std::vector<double> ref_wave(std::size_t n, double bpm, double phase = 0.0) {
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = std::sin(2 * M_PI * bpm / 60.0 * i / 5.0 + phase);
  return r;
}

// Nudge parameters off their symmetric init so every gradient path is active.
template <typename T>
void perturb(ModelState<T>& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.2);
  for (auto& p : s.params)
    for (auto& v : p.values()) v += static_cast<T>(n(rng));
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("breathflow_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("net config validation") {
  NetConfig c;
  CHECK_NOTHROW(c.validate());
  c.chunk_len = 49;
  CHECK_THROWS_AS(c.validate(), Error);
  c = NetConfig{};
  c.tsm_fraction = 0.51;
  CHECK_THROWS_AS(c.validate(), Error);
  c = NetConfig{};
  c.block_channels = {16, 30};
  CHECK_THROWS_AS(c.validate(), Error);
  c = NetConfig{};
  c.block_channels = {};
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("parameter layout and initialisation") {
  const NetConfig c;
  const auto names = param_names(c);
  const auto shapes = param_shapes(c);
  REQUIRE(names.size() == 14);
  CHECK(names.front() == "stem.conv.weight");
  CHECK(names[6] == "blocks.0.gate.weight");
  CHECK(names.back() == "head.bias");
  CHECK(shapes[0] == std::vector<std::size_t>{16, 3, 3, 3});
  CHECK(shapes[8] == std::vector<std::size_t>{32, 16, 3, 3});
  CHECK(shapes[12] == std::vector<std::size_t>{32});

  const auto s = init_model<float>(c, 5);
  for (std::size_t i = 0; i < names.size(); ++i) {
    CHECK(s.params[i].shape() == shapes[i]);
    if (names[i].ends_with("bias") || names[i].ends_with("beta"))
      for (float v : s.params[i].values()) CHECK(v == 0.0f);
    if (names[i].ends_with("gamma"))
      for (float v : s.params[i].values()) CHECK(v == 1.0f);
  }
  // conv weights ~ N(0, 1 / fan_in)
  double ss = 0;
  for (float v : s.params[8].values()) ss += v * v;
  CHECK(ss / s.params[8].size() == doctest::Approx(1.0 / 144).epsilon(0.15));
  CHECK(init_model<float>(c, 5).params == s.params);
  CHECK_FALSE(init_model<float>(c, 6).params == s.params);
}

TEST_CASE("forward shape contract") {
  const auto s = init_model<double>(mini_config(), 1);
  std::mt19937_64 rng(2);
  for (std::size_t T : {50u, 77u, 300u}) {
    const auto x = random_tensor({T, 3, 8, 8}, rng);
    CHECK(forward_chunk(s, x, true).size() == T);
    CHECK(forward_chunk(s, x, false).size() == T);
  }
  CHECK_THROWS_AS(forward_chunk(s, random_tensor({50, 3, 9, 9}, rng), true), Error);
  CHECK_THROWS_AS(forward_chunk(s, random_tensor({50, 2, 8, 8}, rng), true), Error);
}

TEST_CASE("full-size forward on a 96x96 chunk") {
  NetConfig c;
  c.chunk_len = 50;
  c.block_channels = {4, 8};
  const auto s = init_model<float>(c, 3);
  SynthSpec spec;
  spec.duration_s = 20.0;
  spec.noise_std = 0.1;
  const FlowClip clip = synth_flow_clip(spec);
  const auto x = prepare_chunk<float>(clip, 0, 50);
  CHECK(x.shape() == std::vector<std::size_t>{50, 3, 96, 96});
  const auto y1 = forward_chunk(s, x, false);
  const auto y2 = forward_chunk(s, x, false);
  CHECK(y1.size() == 50);
  CHECK(y1 == y2);  // bit-identical
}

TEST_CASE("zero chunk gives the head bias everywhere") {
  auto s = init_model<double>(mini_config(), 4);
  s.params.back()[0] = 0.3;
  const Tensor<double> zero({60, 3, 8, 8});
  for (bool train : {true, false})
    for (double y : forward_chunk(s, zero, train)) CHECK(y == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("divergence is reported with the layer name") {
  auto s = init_model<float>(mini_config(), 4);
  std::mt19937_64 rng(1);
  const auto x = random_tensor({50, 3, 8, 8}, rng).cast<float>();
  for (auto& v : s.params[0].values()) v = 1e38f;
  CHECK_THROWS_WITH_AS(forward_chunk(s, x, true), doctest::Contains("numerical divergence in stem"), Error);
  auto s2 = init_model<float>(mini_config(), 4);
  auto bad = x;
  bad[7] = NAN;
  CHECK_THROWS_WITH_AS(forward_chunk(s2, bad, true), doctest::Contains("numerical divergence in input"), Error);
}

TEST_CASE("prepare_chunk z-scores each channel") {
  SynthSpec spec;
  spec.duration_s = 20.0;
  spec.noise_std = 0.2;
  const FlowClip clip = synth_flow_clip(spec);
  const auto x = prepare_chunk<double>(clip, 10, 60);
  const std::size_t hw = 96 * 96;
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (std::size_t t = 0; t < 60; ++t)
      for (std::size_t i = 0; i < hw; ++i) m += x[(t * 3 + c) * hw + i];
    m /= 60.0 * hw;
    for (std::size_t t = 0; t < 60; ++t)
      for (std::size_t i = 0; i < hw; ++i) v += std::pow(x[(t * 3 + c) * hw + i] - m, 2);
    v /= 60.0 * hw;
    CHECK(std::abs(m) < 1e-6);
    CHECK(v == doctest::Approx(c == 1 ? 0.0 : 1.0).epsilon(1e-6));  // S is constant
  }
  CHECK_THROWS_AS(prepare_chunk<double>(clip, 90, 20), Error);
}

TEST_CASE("train_step gradients match finite differences on a miniature network") {
  for (LossKind kind : {LossKind::kSpectralBandpass, LossKind::kL2, LossKind::kNegPearson}) {
    CAPTURE(loss_kind_name(kind));
    auto s = init_model<double>(mini_config(), 7);
    perturb(s, 8);
    std::mt19937_64 rng(9);
    std::vector<TrainSample<double>> batch(2);
    batch[0] = {random_tensor({50, 3, 8, 8}, rng), ref_wave(50, 30)};
    batch[1] = {random_tensor({50, 3, 8, 8}, rng), ref_wave(50, 42, 1.0)};
    const auto lg = loss_and_grads(s, batch, kind);
    const auto names = param_names(s.config);
    std::vector<Tensor<double>> numeric;
    double scale = 0.0;
    for (std::size_t i = 0; i < s.params.size(); ++i) {
      auto probe = s;
      numeric.push_back(numeric_grad(
          [&](const Tensor<double>& v) {
            probe.params[i] = v;
            return loss_and_grads(probe, batch, kind).loss;
          },
          s.params[i], 1e-5));
      for (std::size_t k = 0; k < numeric[i].size(); ++k)
        scale = std::max({scale, std::abs(numeric[i][k]), std::abs(lg.grads[i][k])});
    }
    // Some gradients vanish identically (a bias feeding batch norm, the head
    // bias under shift-invariant losses); the floor keeps their finite-
    // difference noise from reading as relative error.
    const double floor = 1e-3 * scale;
    for (std::size_t i = 0; i < s.params.size(); ++i) {
      CAPTURE(names[i]);
      double worst = 0.0;
      for (std::size_t k = 0; k < numeric[i].size(); ++k) {
        const double a = lg.grads[i][k], n = numeric[i][k];
        worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}));
      }
      CHECK(worst < 1e-3);
    }
  }
}

TEST_CASE("zero learning rate leaves the state untouched") {
  auto s = init_model<float>(mini_config(), 1);
  std::mt19937_64 rng(2);
  std::vector<TrainSample<float>> batch{{random_tensor({50, 3, 8, 8}, rng).cast<float>(), ref_wave(50, 30)}};
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  const auto before = s;
  const double loss = train_step(s, batch, cfg);
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);
  CHECK(s.params == before.params);
  CHECK(s.running_mean == before.running_mean);
  CHECK(s.running_var == before.running_var);
  CHECK(s.step == 0);

  cfg.learning_rate = 1e-3;
  train_step(s, batch, cfg);
  CHECK(s.step == 1);
  CHECK_FALSE(s.params == before.params);
  CHECK_FALSE(s.running_mean == before.running_mean);
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(train_step(s, batch, cfg), Error);
}

TEST_CASE("spectral loss ignores circular shifts of the reference") {
  auto s = init_model<double>(mini_config(), 3);
  perturb(s, 4);
  std::mt19937_64 rng(5);
  const auto x = random_tensor({50, 3, 8, 8}, rng);
  const auto r = ref_wave(50, 36, 0.4);
  std::vector<double> shifted(50);
  for (std::size_t i = 0; i < 50; ++i) shifted[i] = r[(i + 13) % 50];
  const auto a = loss_and_grads(s, {{x, r}}, LossKind::kSpectralBandpass);
  const auto b = loss_and_grads(s, {{x, shifted}}, LossKind::kSpectralBandpass);
  CHECK(std::abs(a.loss - b.loss) < 1e-9);
  for (std::size_t i = 0; i < a.grads.size(); ++i) CHECK(rel_error(a.grads[i], b.grads[i]) < 1e-6);
}

TEST_CASE("non-finite references are rejected") {
  auto s = init_model<double>(mini_config(), 3);
  std::mt19937_64 rng(5);
  auto r = ref_wave(50, 30);
  r[3] = NAN;
  try {
    loss_and_grads(s, {{random_tensor({50, 3, 8, 8}, rng), r}}, LossKind::kL2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDataError);
  }
}

TEST_CASE("predict_clip") {
  NetConfig c;
  c.chunk_len = 50;
  c.block_channels = {4, 4};
  const auto s = init_model<float>(c, 11);
  SynthSpec spec;
  spec.duration_s = 25.0;  // 125 fields -> 2 chunks
  spec.noise_std = 0.2;
  const FlowClip clip = synth_flow_clip(spec);
  const ClipPrediction p = predict_clip(s, clip);
  CHECK(p.chunks == 2);
  CHECK(p.waveform.size() == 100);
  CHECK(p.rate.bpm >= 18.0);
  CHECK(p.rate.bpm <= 60.0);
  CHECK(p.rate.bpm == doctest::Approx(60.0 * p.rate.peak_freq_hz));

  FlowClip short_clip = clip;
  short_clip.hsv.resize(49);
  short_clip.fields.resize(49);
  CHECK_THROWS_WITH_AS(predict_clip(s, short_clip), doctest::Contains("clip too short"), Error);
}

TEST_CASE("checkpoint round trip preserves predictions exactly") {
  NetConfig c;
  c.chunk_len = 50;
  c.block_channels = {4, 8};
  auto s = init_model<float>(c, 21);
  SynthSpec spec;
  spec.duration_s = 20.0;
  spec.noise_std = 0.2;
  const FlowClip clip = synth_flow_clip(spec);
  std::vector<TrainSample<float>> batch{{prepare_chunk<float>(clip, 0, 50), ref_wave(50, 30)}};
  train_step(s, batch, TrainConfig{});  // populate moments and running stats

  const auto dir = temp_dir("ckpt");
  const auto path = dir / "m.bin";
  save_checkpoint(path, s, {{"note", "x"}});
  nlohmann::json meta;
  const auto back = load_checkpoint(path, &meta);
  CHECK(meta["note"] == "x");
  CHECK(meta["step"] == 1);
  CHECK(back.params == s.params);
  CHECK(back.running_mean == s.running_mean);
  CHECK(back.running_var == s.running_var);
  CHECK(back.adam_m == s.adam_m);
  CHECK(back.step == s.step);
  CHECK(back.config.block_channels == c.block_channels);
  const auto a = predict_clip(s, clip), b = predict_clip(back, clip);
  CHECK(a.waveform.samples() == b.waveform.samples());
  CHECK(a.rate.bpm == b.rate.bpm);

  // on-disk header
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "BFCK");

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  {
    std::ofstream bad(path, std::ios::binary | std::ios::trunc);
    bad << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), Error);
}
