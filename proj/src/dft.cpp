#include "breathflow/dft.hpp"

#include <cmath>
#include <numbers>

namespace breathflow::dft {
namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// sign = -1 forward, +1 inverse (unscaled).
void fft_radix2(std::vector<Complex>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // Twiddles computed directly per index rather than by recurrence to avoid
    // accumulated phase error on long transforms.
    std::vector<Complex> tw(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(len);
      tw[k] = Complex(std::cos(ang), std::sin(ang));
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

std::vector<Complex> dft_direct(std::span<const Complex> x, int sign) {
  const std::size_t n = x.size();
  std::vector<Complex> tw(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(m) /
                       static_cast<double>(n);
    tw[m] = Complex(std::cos(ang), std::sin(ang));
  }
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    std::size_t idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += x[j] * tw[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
    out[k] = acc;
  }
  return out;
}

std::vector<Complex> transform(std::span<const Complex> x, int sign) {
  if (is_pow2(x.size())) {
    std::vector<Complex> a(x.begin(), x.end());
    fft_radix2(a, sign);
    return a;
  }
  return dft_direct(x, sign);
}

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<Complex> forward(std::span<const Complex> x) { return transform(x, -1); }

std::vector<Complex> forward(std::span<const double> x) {
  std::vector<Complex> c(x.begin(), x.end());
  return transform(c, -1);
}

std::vector<Complex> inverse(std::span<const Complex> spectrum) {
  auto out = transform(spectrum, +1);
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace breathflow::dft
