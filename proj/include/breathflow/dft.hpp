#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace breathflow::dft {

using Complex = std::complex<double>;

std::size_t next_pow2(std::size_t n);

// Forward transform, X[k] = sum_j x[j] exp(-2 pi i j k / n). Powers of two go
// through an iterative radix-2 FFT; other lengths use a direct transform with
// an exact twiddle table, so any length is accepted.
std::vector<Complex> forward(std::span<const Complex> x);
std::vector<Complex> forward(std::span<const double> x);

// Inverse transform including the 1/n factor.
std::vector<Complex> inverse(std::span<const Complex> spectrum);

}  // namespace breathflow::dft
