#ifndef TAMED_GRID_HPP
#define TAMED_GRID_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <vector>

#include "tamed/errors.hpp"

namespace tamed {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

using Wavevector = std::array<int, 3>;

// Periodic box of side 1 resolved by n points per axis. Spectral arrays are stored in
// FFT order: flat index (i0 * n + i1) * n + i2, with k_j = i_j for i_j <= n/2 and
// i_j - n otherwise, so every k_j lies in (-n/2, n/2].
class TorusGrid {
 public:
  explicit TorusGrid(int n) : n_(n) {
    if (n < 2 || n % 2 != 0) {
      throw ValidationError("grid resolution must be a positive even integer, got " +
                            std::to_string(n));
    }
    // Largest |k_j| kept by the two-thirds rule. 3 * cutoff < n guarantees that quadratic
    // products of dealiased fields alias only onto discarded modes.
    dealias_cutoff_ = (n - 1) / 3;
    const std::size_t total = size();
    k_.resize(total);
    k_sq_.resize(total);
    negated_.resize(total);
    dealiased_.resize(total);
    nyquist_.resize(total);
    for (int i0 = 0; i0 < n; ++i0) {
      for (int i1 = 0; i1 < n; ++i1) {
        for (int i2 = 0; i2 < n; ++i2) {
          const std::size_t idx = flat(i0, i1, i2);
          const Wavevector k{wavenumber(i0), wavenumber(i1), wavenumber(i2)};
          k_[idx] = k;
          k_sq_[idx] = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
          negated_[idx] = flat((n - i0) % n, (n - i1) % n, (n - i2) % n);
          bool keep = true;
          bool nyq = false;
          for (int c : k) {
            keep = keep && (c <= dealias_cutoff_ && c >= -dealias_cutoff_);
            nyq = nyq || (c == n / 2);
          }
          dealiased_[idx] = keep ? 1 : 0;
          nyquist_[idx] = nyq ? 1 : 0;
        }
      }
    }
  }

  int n() const noexcept { return n_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
  }
  int dealias_cutoff() const noexcept { return dealias_cutoff_; }

  std::size_t flat(int i0, int i1, int i2) const noexcept {
    return (static_cast<std::size_t>(i0) * n_ + static_cast<std::size_t>(i1)) * n_ +
           static_cast<std::size_t>(i2);
  }
  // Storage index for an arbitrary integer wavevector (taken modulo n).
  std::size_t index_of(const Wavevector& k) const noexcept {
    auto wrap = [this](int c) { return ((c % n_) + n_) % n_; };
    return flat(wrap(k[0]), wrap(k[1]), wrap(k[2]));
  }

  const Wavevector& wavevector(std::size_t idx) const noexcept { return k_[idx]; }
  int k_sq(std::size_t idx) const noexcept { return k_sq_[idx]; }
  // Stokes eigenvalue |2 pi k|^2.
  double eigenvalue(std::size_t idx) const noexcept {
    return two_pi * two_pi * static_cast<double>(k_sq_[idx]);
  }
  std::size_t negated(std::size_t idx) const noexcept { return negated_[idx]; }
  bool dealiased(std::size_t idx) const noexcept { return dealiased_[idx] != 0; }
  // Some component sits on the Nyquist plane k_j = n/2, which has no distinct partner.
  bool nyquist(std::size_t idx) const noexcept { return nyquist_[idx] != 0; }

  bool operator==(const TorusGrid& other) const noexcept { return n_ == other.n_; }

 private:
  int wavenumber(int i) const noexcept { return i <= n_ / 2 ? i : i - n_; }

  int n_;
  int dealias_cutoff_ = 0;
  std::vector<Wavevector> k_;
  std::vector<int> k_sq_;
  std::vector<std::size_t> negated_;
  std::vector<std::uint8_t> dealiased_;
  std::vector<std::uint8_t> nyquist_;
};

using GridPtr = std::shared_ptr<const TorusGrid>;

inline GridPtr make_grid(int n) { return std::make_shared<const TorusGrid>(n); }

}  // namespace tamed

#endif  // TAMED_GRID_HPP
