#ifndef TAMED_FIELD_HPP
#define TAMED_FIELD_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "tamed/errors.hpp"
#include "tamed/grid.hpp"

namespace tamed {

using Complex = std::complex<double>;

// Velocity field on the torus as Fourier coefficients u(x) = sum_k c(k) exp(2 pi i k.x),
// one complex array per Cartesian component. The type does not enforce the solenoidal or
// mean-zero invariants on construction: raw fields (e.g. a gradient before projection)
// use the same storage, and the *_defect() queries report how far a field is from them.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(GridPtr grid) : grid_(std::move(grid)) {
    if (!grid_) throw StructuralError("SpectralField requires a grid");
    for (auto& c : coeffs_) c.assign(grid_->size(), Complex{});
  }

  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const TorusGrid& grid() const noexcept { return *grid_; }
  bool empty() const noexcept { return !grid_; }

  std::span<Complex> component(int j) noexcept { return coeffs_[j]; }
  std::span<const Complex> component(int j) const noexcept { return coeffs_[j]; }

  Complex& operator()(int j, std::size_t idx) noexcept { return coeffs_[j][idx]; }
  const Complex& operator()(int j, std::size_t idx) const noexcept { return coeffs_[j][idx]; }

  // Sets the coefficient at k and its conjugate partner at -k.
  void set_mode(const Wavevector& k, const std::array<Complex, 3>& amplitude) {
    const std::size_t idx = grid_->index_of(k);
    const std::size_t neg = grid_->negated(idx);
    for (int j = 0; j < 3; ++j) {
      coeffs_[j][idx] = amplitude[j];
      coeffs_[j][neg] = std::conj(amplitude[j]);
    }
    if (idx == neg) {
      for (int j = 0; j < 3; ++j) coeffs_[j][idx] = Complex(amplitude[j].real(), 0.0);
    }
  }

  void set_zero() noexcept {
    for (auto& c : coeffs_) std::fill(c.begin(), c.end(), Complex{});
  }

  SpectralField& operator+=(const SpectralField& other) {
    require_same_grid(other);
    for (int j = 0; j < 3; ++j) {
      auto& a = coeffs_[j];
      const auto& b = other.coeffs_[j];
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    }
    return *this;
  }
  SpectralField& operator-=(const SpectralField& other) {
    require_same_grid(other);
    for (int j = 0; j < 3; ++j) {
      auto& a = coeffs_[j];
      const auto& b = other.coeffs_[j];
      for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    }
    return *this;
  }
  SpectralField& operator*=(double s) noexcept {
    for (auto& c : coeffs_)
      for (auto& v : c) v *= s;
    return *this;
  }
  // this += a * x
  SpectralField& axpy(double a, const SpectralField& x) {
    require_same_grid(x);
    for (int j = 0; j < 3; ++j) {
      auto& y = coeffs_[j];
      const auto& xs = x.coeffs_[j];
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * xs[i];
    }
    return *this;
  }

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }

  bool is_finite() const noexcept {
    for (const auto& c : coeffs_)
      for (const auto& v : c)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }

  bool is_zero() const noexcept {
    for (const auto& c : coeffs_)
      for (const auto& v : c)
        if (v != Complex{}) return false;
    return true;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (const auto& c : coeffs_)
      for (const auto& v : c) m = std::max(m, std::abs(v));
    return m;
  }

  // max_k |c(-k) - conj(c(k))|, relative to max |c|.
  double hermitian_defect() const noexcept {
    double worst = 0.0;
    for (int j = 0; j < 3; ++j) {
      for (std::size_t i = 0; i < coeffs_[j].size(); ++i) {
        worst = std::max(worst, std::abs(coeffs_[j][grid_->negated(i)] - std::conj(coeffs_[j][i])));
      }
    }
    const double scale = max_abs();
    return scale > 0.0 ? worst / scale : worst;
  }

  // max_k |sum_j k_j c_j(k)| / |k|, relative to max |c|.
  double divergence_defect() const noexcept {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid_->size(); ++i) {
      if (grid_->k_sq(i) == 0) continue;
      const auto& k = grid_->wavevector(i);
      Complex div{};
      for (int j = 0; j < 3; ++j) div += static_cast<double>(k[j]) * coeffs_[j][i];
      worst = std::max(worst, std::abs(div) / std::sqrt(static_cast<double>(grid_->k_sq(i))));
    }
    const double scale = max_abs();
    return scale > 0.0 ? worst / scale : worst;
  }

  double mean_defect() const noexcept {
    double m = 0.0;
    for (const auto& c : coeffs_) m = std::max(m, std::abs(c[0]));
    return m;
  }

  void require_same_grid(const SpectralField& other) const {
    if (!grid_ || !other.grid_ || !(*grid_ == *other.grid_)) {
      throw StructuralError("fields live on different grids");
    }
  }

  friend bool operator==(const SpectralField& a, const SpectralField& b) {
    if (a.empty() || b.empty()) return a.empty() && b.empty();
    return *a.grid_ == *b.grid_ && a.coeffs_ == b.coeffs_;
  }

 private:
  GridPtr grid_;
  std::array<std::vector<Complex>, 3> coeffs_;
};

// Compact copy of the coefficients on a fixed index set, used to store long histories.
struct PackedField {
  std::vector<Complex> values;  // index-major, component-minor
};

inline PackedField pack(const SpectralField& u, std::span<const std::size_t> indices) {
  PackedField p;
  p.values.resize(indices.size() * 3);
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (int j = 0; j < 3; ++j) p.values[3 * i + j] = u(j, indices[i]);
  return p;
}

inline void unpack(const PackedField& p, std::span<const std::size_t> indices, SpectralField& out) {
  out.set_zero();
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (int j = 0; j < 3; ++j) out(j, indices[i]) = p.values[3 * i + j];
}

}  // namespace tamed

#endif  // TAMED_FIELD_HPP
