#ifndef TAMED_SPECTRAL_OPS_HPP
#define TAMED_SPECTRAL_OPS_HPP

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "tamed/errors.hpp"
#include "tamed/fft.hpp"
#include "tamed/field.hpp"
#include "tamed/grid.hpp"
#include "tamed/taming.hpp"

namespace tamed {

namespace detail {

struct PhysicalWorkspace {
  std::array<std::vector<double>, 3> u;
  std::vector<double> product;
  std::vector<Complex> spectrum;
  std::vector<Complex> accum;

  void resize(std::size_t size) {
    for (auto& c : u) c.resize(size);
    product.resize(size);
    spectrum.resize(size);
    accum.resize(size);
  }
};

inline PhysicalWorkspace& workspace(std::size_t size) {
  thread_local PhysicalWorkspace ws;
  ws.resize(size);
  return ws;
}

inline void require_same_grid(const SpectralField& a, const SpectralField& b) {
  a.require_same_grid(b);
}

inline double sobolev_weight(const TorusGrid& grid, std::size_t idx, int m) {
  const double w = 1.0 + grid.eigenvalue(idx);
  switch (m) {
    case 0: return 1.0;
    case 1: return w;
    case 2: return w * w;
    default: throw UnsupportedOrderError(m);
  }
}

// Physical values of the dealiased part of each component of u.
inline void dealiased_physical(const SpectralField& u, PhysicalWorkspace& ws) {
  const TorusGrid& grid = u.grid();
  for (int j = 0; j < 3; ++j) {
    const auto c = u.component(j);
    for (std::size_t i = 0; i < grid.size(); ++i) ws.spectrum[i] = grid.dealiased(i) ? c[i] : Complex{};
    to_physical(grid, ws.spectrum, ws.u[j]);
  }
}

}  // namespace detail

// Zeroes every coefficient outside the two-thirds dealiasing set.
inline SpectralField dealias(SpectralField u) {
  const TorusGrid& grid = u.grid();
  for (int j = 0; j < 3; ++j) {
    auto c = u.component(j);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!grid.dealiased(i)) c[i] = Complex{};
  }
  return u;
}

// Leray projection: c(k) <- c(k) - k (k.c(k)) / |k|^2 for k != 0. The mean and the
// Nyquist planes (no distinct -k partner, so no real solenoidal part) are zeroed.
inline void leray_project_inplace(SpectralField& f) {
  const TorusGrid& grid = f.grid();
  auto c0 = f.component(0);
  auto c1 = f.component(1);
  auto c2 = f.component(2);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int ksq = grid.k_sq(i);
    if (ksq == 0 || grid.nyquist(i)) {
      c0[i] = c1[i] = c2[i] = Complex{};
      continue;
    }
    const auto& k = grid.wavevector(i);
    const Complex kc = static_cast<double>(k[0]) * c0[i] + static_cast<double>(k[1]) * c1[i] +
                       static_cast<double>(k[2]) * c2[i];
    const Complex s = kc / static_cast<double>(ksq);
    c0[i] -= static_cast<double>(k[0]) * s;
    c1[i] -= static_cast<double>(k[1]) * s;
    c2[i] -= static_cast<double>(k[2]) * s;
  }
}

inline SpectralField leray_project(SpectralField f) {
  leray_project_inplace(f);
  return f;
}

// A u = -P Delta u: multiplies mode k by |2 pi k|^2.
inline SpectralField apply_stokes(SpectralField u) {
  const TorusGrid& grid = u.grid();
  for (int j = 0; j < 3; ++j) {
    auto c = u.component(j);
    for (std::size_t i = 0; i < grid.size(); ++i) c[i] *= grid.eigenvalue(i);
  }
  return u;
}

// sum_k (1 + |2 pi k|^2)^m sum_j Re(u_j(k) conj(v_j(k))).
inline double inner_product(const SpectralField& u, const SpectralField& v, int m) {
  detail::require_same_grid(u, v);
  if (m < 0 || m > 2) throw UnsupportedOrderError(m);
  const TorusGrid& grid = u.grid();
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) {
      const Complex a = u(j, i);
      const Complex b = v(j, i);
      s += a.real() * b.real() + a.imag() * b.imag();
    }
    if (s != 0.0) total += detail::sobolev_weight(grid, i, m) * s;
  }
  return total;
}

inline double sobolev_norm_sq(const SpectralField& u, int m) {
  if (m < 0 || m > 2) throw UnsupportedOrderError(m);
  const TorusGrid& grid = u.grid();
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += std::norm(u(j, i));
    if (s != 0.0) total += detail::sobolev_weight(grid, i, m) * s;
  }
  return total;
}

inline double sobolev_norm(const SpectralField& u, int m) { return std::sqrt(sobolev_norm_sq(u, m)); }

// ||grad u||^2_{L^2} = sum_k |2 pi k|^2 |u(k)|^2.
inline double gradient_norm_sq(const SpectralField& u) {
  const TorusGrid& grid = u.grid();
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += std::norm(u(j, i));
    total += grid.eigenvalue(i) * s;
  }
  return total;
}

// B(u, v) = P((u . grad) v), formed pseudospectrally from the dealiased parts of u and v
// and truncated back to the dealiasing set. For dealiased inputs the truncated product is
// exact, so <B(u, v), v> vanishes to rounding.
inline SpectralField nonlinear_term(const SpectralField& u, const SpectralField& v) {
  detail::require_same_grid(u, v);
  const TorusGrid& grid = u.grid();
  const std::size_t size = grid.size();
  auto& ws = detail::workspace(size);
  detail::dealiased_physical(u, ws);

  SpectralField out(u.grid_ptr());
  std::vector<double> convect(size);
  std::vector<double> deriv(size);
  for (int j = 0; j < 3; ++j) {
    std::fill(convect.begin(), convect.end(), 0.0);
    const auto vj = v.component(j);
    for (int i = 0; i < 3; ++i) {
      for (std::size_t idx = 0; idx < size; ++idx) {
        ws.spectrum[idx] = grid.dealiased(idx)
                               ? Complex(0.0, two_pi * grid.wavevector(idx)[i]) * vj[idx]
                               : Complex{};
      }
      to_physical(grid, ws.spectrum, deriv);
      const auto& ui = ws.u[i];
      for (std::size_t p = 0; p < size; ++p) convect[p] += ui[p] * deriv[p];
    }
    to_spectral(grid, convect, out.component(j));
  }
  out = dealias(std::move(out));
  leray_project_inplace(out);
  return out;
}

// -B(u, u) - P(g_N(|u|^2) u) for solenoidal u, the explicit part of the tamed drift. The
// convection is formed in divergence form div(u (x) u), which equals (u . grad) u when
// div u = 0 and needs six products instead of nine derivatives.
inline SpectralField tamed_nonlinearity(const SpectralField& u, const TamingSpec& taming) {
  const TorusGrid& grid = u.grid();
  const std::size_t size = grid.size();
  auto& ws = detail::workspace(size);
  detail::dealiased_physical(u, ws);

  SpectralField out(u.grid_ptr());
  // Taming product first: out_j = -FFT(g_N(|u|^2) u_j).
  std::vector<double> g(size);
  for (std::size_t p = 0; p < size; ++p) {
    const double r = ws.u[0][p] * ws.u[0][p] + ws.u[1][p] * ws.u[1][p] + ws.u[2][p] * ws.u[2][p];
    g[p] = taming(r);
  }
  bool taming_active = false;
  for (double x : g) taming_active = taming_active || x != 0.0;
  if (taming_active) {
    for (int j = 0; j < 3; ++j) {
      for (std::size_t p = 0; p < size; ++p) ws.product[p] = g[p] * ws.u[j][p];
      to_spectral(grid, ws.product, ws.accum);
      auto c = out.component(j);
      for (std::size_t idx = 0; idx < size; ++idx) c[idx] = -ws.accum[idx];
    }
  }

  // Convection: out_j -= sum_i 2 pi i k_i FFT(u_i u_j).
  static constexpr std::array<std::array<int, 2>, 6> pairs{
      {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};
  for (const auto& [a, b] : pairs) {
    for (std::size_t p = 0; p < size; ++p) ws.product[p] = ws.u[a][p] * ws.u[b][p];
    to_spectral(grid, ws.product, ws.accum);
    auto ca = out.component(a);
    auto cb = out.component(b);
    for (std::size_t idx = 0; idx < size; ++idx) {
      if (!grid.dealiased(idx)) continue;
      const auto& k = grid.wavevector(idx);
      const Complex q = ws.accum[idx];
      // d_b (u_a u_b) contributes to component a; d_a (u_a u_b) to component b.
      ca[idx] -= Complex(0.0, two_pi * k[b]) * q;
      if (a != b) cb[idx] -= Complex(0.0, two_pi * k[a]) * q;
    }
  }
  out = dealias(std::move(out));
  leray_project_inplace(out);
  return out;
}

// F(u) = -A u - B(u, u) - P(g_N(|u|^2) u).
inline SpectralField tamed_drift(const SpectralField& u, const TamingSpec& taming) {
  SpectralField f = tamed_nonlinearity(u, taming);
  f -= apply_stokes(u);
  return f;
}

// || |u| |grad u| ||^2_{L^2}, evaluated by collocation on the grid.
inline double weighted_gradient_norm_sq(const SpectralField& u) {
  const TorusGrid& grid = u.grid();
  const std::size_t size = grid.size();
  auto& ws = detail::workspace(size);
  detail::dealiased_physical(u, ws);
  std::vector<double> grad_sq(size, 0.0);
  std::vector<double> deriv(size);
  for (int j = 0; j < 3; ++j) {
    const auto uj = u.component(j);
    for (int i = 0; i < 3; ++i) {
      for (std::size_t idx = 0; idx < size; ++idx) {
        ws.spectrum[idx] = grid.dealiased(idx)
                               ? Complex(0.0, two_pi * grid.wavevector(idx)[i]) * uj[idx]
                               : Complex{};
      }
      to_physical(grid, ws.spectrum, deriv);
      for (std::size_t p = 0; p < size; ++p) grad_sq[p] += deriv[p] * deriv[p];
    }
  }
  double total = 0.0;
  for (std::size_t p = 0; p < size; ++p) {
    const double usq = ws.u[0][p] * ws.u[0][p] + ws.u[1][p] * ws.u[1][p] + ws.u[2][p] * ws.u[2][p];
    total += usq * grad_sq[p];
  }
  return total / static_cast<double>(size);
}

// Physical samples of each component (not dealiased), mainly for diagnostics and tests.
inline std::array<std::vector<double>, 3> physical_values(const SpectralField& u) {
  const TorusGrid& grid = u.grid();
  std::array<std::vector<double>, 3> out;
  std::vector<Complex> tmp(grid.size());
  for (int j = 0; j < 3; ++j) {
    out[j].resize(grid.size());
    const auto c = u.component(j);
    std::copy(c.begin(), c.end(), tmp.begin());
    to_physical(grid, tmp, out[j]);
  }
  return out;
}

inline SpectralField from_physical(const GridPtr& grid, std::array<std::vector<double>, 3> values) {
  SpectralField out(grid);
  for (int j = 0; j < 3; ++j) {
    if (values[j].size() != grid->size()) throw StructuralError("physical array has the wrong size");
    to_spectral(*grid, values[j], out.component(j));
  }
  return out;
}

}  // namespace tamed

#endif  // TAMED_SPECTRAL_OPS_HPP
