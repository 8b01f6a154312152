#pragma once

#include <complex>
#include <vector>

namespace hrtfnp {

using Complex = std::complex<double>;

/// Factored complex Gaussian per target: independent real and imaginary
/// components with standard deviations stddev.real() and stddev.imag().
/// Both vectors are laid out as [ear * F + f]. stddev is empty for
/// point-estimate methods.
struct Prediction {
  std::vector<Complex> mean;
  std::vector<Complex> stddev;
};

}  // namespace hrtfnp
