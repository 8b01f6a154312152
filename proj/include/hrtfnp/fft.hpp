#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace hrtfnp::fft {

using Complex = std::complex<double>;

/// Forward DFT X[k] = sum_n x[n] e^{-i 2 pi k n / N}.
std::vector<Complex> forward(std::span<const Complex> x);

/// Inverse DFT including the 1/N factor.
std::vector<Complex> inverse(std::span<const Complex> X);

/// Bins 0..n/2 of the DFT of x zero-padded (or truncated) to length n.
std::vector<Complex> real_forward(std::span<const double> x, std::size_t n);

/// Real signal of length n whose half spectrum is `half` (n/2 + 1 bins);
/// imaginary parts of bins 0 and n/2 are ignored.
std::vector<double> real_inverse(std::span<const Complex> half, std::size_t n);

}  // namespace hrtfnp::fft
