#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "breathflow/error.hpp"
#include "breathflow/spectral_loss.hpp"

using namespace breathflow;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> sine(double hz, std::size_t n, double fs, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * kPi * hz * i / fs + phase);
  return x;
}

// Random mixture of in-band sinusoids plus broadband noise.
std::vector<double> random_signal(std::mt19937_64& rng, std::size_t n, double fs) {
  std::uniform_real_distribution<double> f(0.3, 1.0), ph(0, 2 * kPi), amp(0.2, 1.0);
  std::normal_distribution<double> noise(0, 0.3);
  std::vector<double> x(n, 0.0);
  for (int c = 0; c < 3; ++c) {
    const auto s = sine(f(rng), n, fs, ph(rng));
    const double a = amp(rng);
    for (std::size_t i = 0; i < n; ++i) x[i] += a * s[i];
  }
  for (auto& v : x) v += noise(rng);
  return x;
}

LossFn sb(double fs) {
  return [fs](std::span<const double> p, std::span<const double> r) {
    return spectral_bandpass_loss(p, r, fs);
  };
}

LossFn baseline(LossKind k) {
  return [k](std::span<const double> p, std::span<const double> r) { return baseline_loss(k, p, r); };
}

}  // namespace

TEST_CASE("loss kind names round-trip") {
  for (LossKind k : {LossKind::kSpectralBandpass, LossKind::kL1, LossKind::kL2, LossKind::kNegPearson})
    CHECK(parse_loss_kind(loss_kind_name(k)) == k);
  CHECK_THROWS_AS(parse_loss_kind("huber"), Error);
}

TEST_CASE("spectral loss of identical inputs is zero") {
  std::mt19937_64 rng(1);
  const auto x = random_signal(rng, 300, 5.0);
  LossResult r = spectral_bandpass_loss(x, x, 5.0);
  CHECK(r.value == 0.0);
  for (double g : r.grad_wrt_pred) CHECK(g == 0.0);
}

TEST_CASE("two bin-aligned sines give sqrt 2") {
  const auto a = sine(0.4, 300, 5.0), b = sine(0.8, 300, 5.0);
  CHECK(std::abs(spectral_bandpass_loss(a, b, 5.0).value - std::sqrt(2.0)) <= 1e-6);
}

TEST_CASE("spectral loss invariances") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_signal(rng, 300, 5.0), r = random_signal(rng, 300, 5.0);
    const double base = spectral_bandpass_loss(p, r, 5.0).value;
    std::vector<double> shifted(300), scaled(300), offset(300);
    const std::size_t k = 1 + rng() % 299;
    for (std::size_t i = 0; i < 300; ++i) {
      shifted[i] = r[(i + k) % 300];
      scaled[i] = -0.37 * p[i];
      offset[i] = p[i] + 12.0;
    }
    CHECK(std::abs(spectral_bandpass_loss(p, shifted, 5.0).value - base) <= 1e-9);
    CHECK(std::abs(spectral_bandpass_loss(scaled, r, 5.0).value - base) <= 1e-9);
    CHECK(std::abs(spectral_bandpass_loss(offset, r, 5.0).value - base) <= 1e-9);
    CHECK(spectral_bandpass_loss(r, p, 5.0).value == base);  // exact symmetry
    CHECK(base >= 0.0);
    CHECK(base <= std::sqrt(2.0));
  }
}

TEST_CASE("circular shift of the reference leaves value and gradient unchanged") {
  std::mt19937_64 rng(12);
  const auto p = random_signal(rng, 150, 5.0), r = random_signal(rng, 150, 5.0);
  std::vector<double> shifted(150);
  for (std::size_t i = 0; i < 150; ++i) shifted[i] = r[(i + 37) % 150];
  const auto a = spectral_bandpass_loss(p, r, 5.0), b = spectral_bandpass_loss(p, shifted, 5.0);
  CHECK(std::abs(a.value - b.value) <= 1e-9);
  for (std::size_t i = 0; i < 150; ++i) CHECK(std::abs(a.grad_wrt_pred[i] - b.grad_wrt_pred[i]) <= 1e-9);
}

TEST_CASE("spectral loss errors") {
  const std::vector<double> flat(300, 1.0);
  const auto s = sine(0.5, 300, 5.0);
  CHECK_THROWS_WITH_AS(spectral_bandpass_loss(flat, s, 5.0), doctest::Contains("degenerate spectrum"), Error);
  CHECK_THROWS_AS(spectral_bandpass_loss(s, std::vector<double>(200, 0.0), 5.0), Error);
  // out-of-band only
  CHECK_THROWS_AS(spectral_bandpass_loss(sine(2.0, 300, 5.0), s, 5.0), Error);
}

TEST_CASE("baseline losses") {
  std::mt19937_64 rng(4);
  const auto r = random_signal(rng, 120, 5.0);
  std::vector<double> shifted(r.size()), neg(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) shifted[i] = r[i] + 0.75, neg[i] = -r[i];
  CHECK(baseline_loss(LossKind::kL1, r, r).value == 0.0);
  CHECK(baseline_loss(LossKind::kL2, r, r).value == 0.0);
  CHECK(baseline_loss(LossKind::kNegPearson, r, r).value == doctest::Approx(-1.0));
  CHECK(baseline_loss(LossKind::kL1, shifted, r).value == doctest::Approx(0.75));
  CHECK(baseline_loss(LossKind::kL2, shifted, r).value == doctest::Approx(0.5625));
  CHECK(baseline_loss(LossKind::kNegPearson, shifted, r).value == doctest::Approx(-1.0));
  CHECK(baseline_loss(LossKind::kNegPearson, neg, r).value == doctest::Approx(1.0));
  for (double g : baseline_loss(LossKind::kL1, r, r).grad_wrt_pred) CHECK(g == 0.0);
  CHECK_THROWS_WITH_AS(baseline_loss(LossKind::kNegPearson, std::vector<double>(120, 2.0), r),
                       doctest::Contains("zero variance"), Error);
}

TEST_CASE("property: negative pearson is invariant under positive affine maps") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_signal(rng, 100, 5.0), r = random_signal(rng, 100, 5.0);
    std::vector<double> ap(100), ar(100);
    for (std::size_t i = 0; i < 100; ++i) ap[i] = 2.5 * p[i] - 3, ar[i] = 0.1 * r[i] + 9;
    const double base = baseline_loss(LossKind::kNegPearson, p, r).value;
    CHECK(baseline_loss(LossKind::kNegPearson, ap, r).value == doctest::Approx(base).epsilon(1e-12));
    CHECK(baseline_loss(LossKind::kNegPearson, p, ar).value == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("gradient checks against central differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Waveform p(random_signal(rng, 300, 5.0), 5.0), r(random_signal(rng, 300, 5.0), 5.0);
    CHECK(finite_diff_gradcheck(sb(5.0), p, r) < 1e-5);
    CHECK(finite_diff_gradcheck(baseline(LossKind::kL2), p, r) < 1e-6);
    CHECK(finite_diff_gradcheck(baseline(LossKind::kNegPearson), p, r) < 1e-6);
    // L1 away from kinks: p and r are continuous random, so no exact ties
    CHECK(finite_diff_gradcheck(baseline(LossKind::kL1), p, r) < 1e-6);
  }
}

TEST_CASE("compute_loss dispatch") {
  std::mt19937_64 rng(7);
  const auto p = random_signal(rng, 150, 5.0), r = random_signal(rng, 150, 5.0);
  CHECK(compute_loss(LossKind::kSpectralBandpass, p, r, 5.0).value == spectral_bandpass_loss(p, r, 5.0).value);
  CHECK(compute_loss(LossKind::kL2, p, r, 5.0).value == baseline_loss(LossKind::kL2, p, r).value);
}

TEST_CASE("relative error metric") {
  const std::vector<double> a{1.0, 0.0, -2.0}, b{1.0, 1e-12, -2.0};
  CHECK(max_relative_error(a, b) < 1e-9);
  const std::vector<double> c{1.0, 0.0, -1.0};
  CHECK(max_relative_error(a, c) == doctest::Approx(0.5));
}
