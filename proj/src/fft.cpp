#include "hrtfnp/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "hrtfnp/errors.hpp"

namespace hrtfnp::fft {
namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <typename T>
struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)))) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  T* data;
};

class Plan {
 public:
  explicit Plan(fftw_plan p) : p_(p) {
    if (!p_) throw NumericError("FFTW failed to create a plan");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  void execute() const { fftw_execute(p_); }

 private:
  fftw_plan p_;
};

std::vector<Complex> complex_transform(std::span<const Complex> x, int sign) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  FftwBuffer<fftw_complex> in(n), out(n);
  fftw_plan raw;
  {
    std::lock_guard lock(planner_mutex());
    raw = fftw_plan_dft_1d(static_cast<int>(n), in.data, out.data, sign, FFTW_ESTIMATE);
  }
  Plan plan(raw);
  for (std::size_t i = 0; i < n; ++i) {
    in.data[i][0] = x[i].real();
    in.data[i][1] = x[i].imag();
  }
  plan.execute();
  std::vector<Complex> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = {out.data[i][0], out.data[i][1]};
  return y;
}

}  // namespace

std::vector<Complex> forward(std::span<const Complex> x) { return complex_transform(x, FFTW_FORWARD); }

std::vector<Complex> inverse(std::span<const Complex> X) {
  auto y = complex_transform(X, FFTW_BACKWARD);
  const double s = 1.0 / static_cast<double>(X.size());
  for (auto& v : y) v *= s;
  return y;
}

std::vector<Complex> real_forward(std::span<const double> x, std::size_t n) {
  if (n == 0) throw ArgumentError("FFT length must be positive");
  FftwBuffer<double> in(n);
  FftwBuffer<fftw_complex> out(n / 2 + 1);
  fftw_plan raw;
  {
    std::lock_guard lock(planner_mutex());
    raw = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data, out.data, FFTW_ESTIMATE);
  }
  Plan plan(raw);
  std::fill(in.data, in.data + n, 0.0);
  std::copy_n(x.begin(), std::min(n, x.size()), in.data);
  plan.execute();
  std::vector<Complex> y(n / 2 + 1);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = {out.data[i][0], out.data[i][1]};
  return y;
}

std::vector<double> real_inverse(std::span<const Complex> half, std::size_t n) {
  if (n == 0 || half.size() != n / 2 + 1) throw ArgumentError("half spectrum size does not match FFT length");
  FftwBuffer<fftw_complex> in(n / 2 + 1);
  FftwBuffer<double> out(n);
  fftw_plan raw;
  {
    std::lock_guard lock(planner_mutex());
    raw = fftw_plan_dft_c2r_1d(static_cast<int>(n), in.data, out.data, FFTW_ESTIMATE);
  }
  Plan plan(raw);
  for (std::size_t i = 0; i < half.size(); ++i) {
    in.data[i][0] = half[i].real();
    in.data[i][1] = half[i].imag();
  }
  in.data[0][1] = 0.0;
  if (n % 2 == 0) in.data[n / 2][1] = 0.0;
  plan.execute();
  std::vector<double> y(out.data, out.data + n);
  const double s = 1.0 / static_cast<double>(n);
  for (auto& v : y) v *= s;
  return y;
}

}  // namespace hrtfnp::fft
