#ifndef TAMED_FFT_HPP
#define TAMED_FFT_HPP

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "tamed/errors.hpp"
#include "tamed/grid.hpp"

namespace tamed {

namespace detail {

// Real-to-complex / complex-to-real plans for one resolution. Planning is serialized
// (FFTW's planner is not thread-safe); execution through the new-array interface is.
// Plans assume fftw_malloc alignment, so callers go through AlignedScratch.
class FftPlans {
 public:
  explicit FftPlans(int n) : n_(n) {
    const std::size_t real_size = static_cast<std::size_t>(n) * n * n;
    const std::size_t half_size = static_cast<std::size_t>(n) * n * (n / 2 + 1);
    double* r = fftw_alloc_real(real_size);
    fftw_complex* c = fftw_alloc_complex(half_size);
    const unsigned flags = FFTW_ESTIMATE;
    forward_ = fftw_plan_dft_r2c_3d(n, n, n, r, c, flags);
    backward_ = fftw_plan_dft_c2r_3d(n, n, n, c, r, flags);
    fftw_free(r);
    fftw_free(c);
    if (!forward_ || !backward_) throw Error("FFTW planning failed for n=" + std::to_string(n));
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
  ~FftPlans() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  void forward(double* in, std::complex<double>* out) const {
    fftw_execute_dft_r2c(forward_, in, reinterpret_cast<fftw_complex*>(out));
  }
  // Destroys `in`.
  void backward(std::complex<double>* in, double* out) const {
    fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(in), out);
  }

 private:
  int n_;
  fftw_plan forward_;
  fftw_plan backward_;
};

inline const FftPlans& plans_for(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<FftPlans>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlans>(n);
  return *slot;
}

struct FftwDeleter {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

// Per-thread SIMD-aligned buffers for one n^3 real array and its half spectrum.
struct AlignedScratch {
  std::size_t real_size = 0;
  std::size_t half_size = 0;
  std::unique_ptr<double, FftwDeleter> real;
  std::unique_ptr<std::complex<double>, FftwDeleter> half;

  void reserve(std::size_t r, std::size_t h) {
    if (r > real_size) {
      real.reset(fftw_alloc_real(r));
      real_size = r;
    }
    if (h > half_size) {
      half.reset(reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(h)));
      half_size = h;
    }
  }
};

inline AlignedScratch& scratch(int n) {
  thread_local AlignedScratch buffers;
  const std::size_t r = static_cast<std::size_t>(n) * n * n;
  buffers.reserve(r, static_cast<std::size_t>(n) * n * (n / 2 + 1));
  return buffers;
}

}  // namespace detail

// Physical values u(x_m) = sum_k c(k) exp(2 pi i k.x_m) on the n^3 collocation points.
// Imaginary parts on self-conjugate modes are ignored (the field is taken to be real).
inline void to_physical(const TorusGrid& grid, std::span<const std::complex<double>> spectrum,
                        std::span<double> physical) {
  const int n = grid.n();
  const int nh = n / 2 + 1;
  auto& buf = detail::scratch(n);
  std::complex<double>* half = buf.half.get();
  for (int i0 = 0; i0 < n; ++i0)
    for (int i1 = 0; i1 < n; ++i1) {
      const std::size_t src = grid.flat(i0, i1, 0);
      const std::size_t dst = (static_cast<std::size_t>(i0) * n + i1) * nh;
      for (int i2 = 0; i2 < nh; ++i2) half[dst + i2] = spectrum[src + i2];
    }
  detail::plans_for(n).backward(half, buf.real.get());
  std::copy(buf.real.get(), buf.real.get() + grid.size(), physical.begin());
}

// Inverse of to_physical: c(k) = n^-3 sum_m u(x_m) exp(-2 pi i k.x_m). `physical` is
// left unchanged.
inline void to_spectral(const TorusGrid& grid, std::span<const double> physical,
                        std::span<std::complex<double>> spectrum) {
  const int n = grid.n();
  const int nh = n / 2 + 1;
  auto& buf = detail::scratch(n);
  std::copy(physical.begin(), physical.end(), buf.real.get());
  const std::complex<double>* half = buf.half.get();
  detail::plans_for(n).forward(buf.real.get(), buf.half.get());
  const double scale = 1.0 / static_cast<double>(grid.size());
  for (int i0 = 0; i0 < n; ++i0)
    for (int i1 = 0; i1 < n; ++i1) {
      const std::size_t dst = grid.flat(i0, i1, 0);
      const std::size_t src = (static_cast<std::size_t>(i0) * n + i1) * nh;
      for (int i2 = 0; i2 < nh; ++i2) spectrum[dst + i2] = half[src + i2] * scale;
    }
  for (int i0 = 0; i0 < n; ++i0)
    for (int i1 = 0; i1 < n; ++i1)
      for (int i2 = nh; i2 < n; ++i2) {
        const std::size_t idx = grid.flat(i0, i1, i2);
        spectrum[idx] = std::conj(spectrum[grid.negated(idx)]);
      }
}

}  // namespace tamed

#endif  // TAMED_FFT_HPP
