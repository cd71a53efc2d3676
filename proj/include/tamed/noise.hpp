#ifndef TAMED_NOISE_HPP
#define TAMED_NOISE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tamed/errors.hpp"
#include "tamed/field.hpp"
#include "tamed/rng.hpp"
#include "tamed/spectral_ops.hpp"

namespace tamed {

// Finite mark space Z = {z_1, ..., z_K} with intensity theta({z_k}) = w_k.
class MarkSpace {
 public:
  MarkSpace() = default;
  explicit MarkSpace(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw ValidationError("mark space needs at least one mark");
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      if (!(weights_[k] > 0.0) || !std::isfinite(weights_[k])) {
        throw ValidationError("mark weight w_" + std::to_string(k) + " must be positive and finite");
      }
    }
    total_mass_ = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  }

  std::size_t size() const noexcept { return weights_.size(); }
  double weight(std::size_t k) const { return weights_.at(k); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double total_mass() const noexcept { return total_mass_; }

 private:
  std::vector<double> weights_;
  double total_mass_ = 0.0;
};

// Low-pass smoother S_rho: keeps Fourier modes with |k| <= rho.
inline SpectralField smooth(SpectralField u, int cutoff) {
  const TorusGrid& grid = u.grid();
  const int limit = cutoff * cutoff;
  for (int j = 0; j < 3; ++j) {
    auto c = u.component(j);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (grid.k_sq(i) > limit) c[i] = Complex{};
  }
  return u;
}

// sigma(t, u, z_k) = c_k S_rho u + phi_k, time independent.
class NoiseCoefficient {
 public:
  NoiseCoefficient() = default;
  NoiseCoefficient(std::vector<double> scales, std::vector<SpectralField> additive, int cutoff)
      : scales_(std::move(scales)), additive_(std::move(additive)), cutoff_(cutoff) {
    if (scales_.size() != additive_.size()) {
      throw StructuralError("noise coefficient needs one scale and one additive field per mark");
    }
    if (cutoff_ < 1) throw ValidationError("smoothing cutoff must be a positive integer");
    for (double c : scales_)
      if (!std::isfinite(c)) throw ValidationError("noise scale must be finite");
    for (std::size_t k = 1; k < additive_.size(); ++k) additive_[0].require_same_grid(additive_[k]);
  }

  // Zero coefficient for K marks.
  static NoiseCoefficient zero(const GridPtr& grid, std::size_t marks, int cutoff = 1) {
    return NoiseCoefficient(std::vector<double>(marks, 0.0),
                            std::vector<SpectralField>(marks, SpectralField(grid)), cutoff);
  }

  std::size_t size() const noexcept { return scales_.size(); }
  double scale(std::size_t k) const { return scales_.at(k); }
  const SpectralField& additive(std::size_t k) const { return additive_.at(k); }
  int cutoff() const noexcept { return cutoff_; }

  SpectralField apply(const SpectralField& u, std::size_t k) const {
    SpectralField out = smooth(u, cutoff_);
    out *= scales_.at(k);
    out += additive_.at(k);
    return out;
  }

  // out += a * sigma(u, z_k), without temporaries for the common zero-scale case.
  void accumulate(double a, const SpectralField& u, std::size_t k, SpectralField& out) const {
    if (a == 0.0) return;
    if (scales_[k] != 0.0) {
      const TorusGrid& grid = u.grid();
      const int limit = cutoff_ * cutoff_;
      const double f = a * scales_[k];
      for (int j = 0; j < 3; ++j) {
        auto dst = out.component(j);
        const auto src = u.component(j);
        for (std::size_t i = 0; i < grid.size(); ++i)
          if (grid.k_sq(i) <= limit) dst[i] += f * src[i];
      }
    }
    if (!additive_zero(k)) out.axpy(a, additive_[k]);
  }

  bool state_independent() const noexcept {
    return std::all_of(scales_.begin(), scales_.end(), [](double c) { return c == 0.0; });
  }
  bool additive_zero(std::size_t k) const { return additive_.at(k).is_zero(); }
  bool mark_zero(std::size_t k) const { return scales_.at(k) == 0.0 && additive_zero(k); }
  bool is_zero() const {
    for (std::size_t k = 0; k < size(); ++k)
      if (!mark_zero(k)) return false;
    return true;
  }

 private:
  std::vector<double> scales_;
  std::vector<SpectralField> additive_;
  int cutoff_ = 1;
};

struct HypothesisConstants {
  double K1 = 0.0;
  double K2 = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
  double L3 = 0.0;
};

inline void require_matching(const NoiseCoefficient& sigma, const MarkSpace& marks) {
  if (sigma.size() != marks.size()) {
    throw StructuralError("noise coefficient has " + std::to_string(sigma.size()) +
                          " marks, mark space has " + std::to_string(marks.size()));
  }
}

// Closed-form linear-growth and Lipschitz constants. S_rho has operator norm <= 1 in
// H^0 and H^1, so ||c S u + phi||^2 <= 2 c^2 ||u||^2 + 2 ||phi||^2 and
// ||c S u + phi||^6 <= 32 (c^6 ||u||^6 + ||phi||^6).
inline HypothesisConstants hypothesis_constants(const NoiseCoefficient& sigma, const MarkSpace& marks) {
  require_matching(sigma, marks);
  HypothesisConstants h;
  for (std::size_t k = 0; k < marks.size(); ++k) {
    const double w = marks.weight(k);
    const double c2 = sigma.scale(k) * sigma.scale(k);
    const double phi0 = sobolev_norm_sq(sigma.additive(k), 0);
    const double phi1 = sobolev_norm_sq(sigma.additive(k), 1);
    h.K2 += w * c2;
    h.K1 += 2.0 * w * (c2 + phi0);
    h.L1 += 2.0 * w * (c2 + phi1);
    h.L2 += 32.0 * w * (c2 * c2 * c2 + phi1 * phi1 * phi1);
  }
  h.L3 = h.K2;
  return h;
}

// Exponential-integrability report for the four (i, j) norm profiles
// ||sigma(z)||_{i,H^j}: i = 0 is the growth sup ||sigma(u)|| / (1 + ||u||), i = 1 the
// Lipschitz constant.
struct IntegrabilityReport {
  double delta = 0.0;
  double horizon = 0.0;
  // value[i][j] = sum_k w_k T exp(delta * bound_k(i, j)^2)
  double value[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  bool finite() const noexcept {
    for (const auto& row : value)
      for (double v : row)
        if (!std::isfinite(v)) return false;
    return true;
  }
};

// Mark-wise bound ||sigma(z_k)||_{i,H^j}. For i = 0 the sup of (|c| t + ||phi||) / (1 + t)
// over t >= 0 is max(|c|, ||phi||); for i = 1 it is |c|.
inline double mark_bound(const NoiseCoefficient& sigma, std::size_t k, int i, int j) {
  const double c = std::abs(sigma.scale(k));
  if (i == 1) return c;
  return std::max(c, sobolev_norm(sigma.additive(k), j));
}

inline IntegrabilityReport check_H1(const NoiseCoefficient& sigma, const MarkSpace& marks, double delta,
                                    double horizon) {
  require_matching(sigma, marks);
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  if (!(horizon >= 0.0)) throw DomainError("horizon must be nonnegative");
  IntegrabilityReport r;
  r.delta = delta;
  r.horizon = horizon;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < marks.size(); ++k) {
        const double b = mark_bound(sigma, k, i, j);
        r.value[i][j] += marks.weight(k) * horizon * std::exp(delta * b * b);
      }
  return r;
}

// Piecewise-constant nonnegative control g(t, z_k) = values[j * K + k] on
// [t_j, t_{j+1}), the last interval closed at T.
class Control {
 public:
  Control() = default;
  Control(std::vector<double> time_grid, std::size_t marks, std::vector<double> values)
      : time_grid_(std::move(time_grid)), marks_(marks), values_(std::move(values)) {
    if (time_grid_.size() < 2) throw ValidationError("control time grid needs at least two points");
    if (time_grid_.front() != 0.0) throw ValidationError("control time grid must start at 0");
    for (std::size_t j = 1; j < time_grid_.size(); ++j) {
      if (!(time_grid_[j] > time_grid_[j - 1]) || !std::isfinite(time_grid_[j])) {
        throw ValidationError("control time grid must be strictly increasing and finite");
      }
    }
    if (marks_ == 0) throw ValidationError("control needs at least one mark");
    if (values_.size() != intervals() * marks_) {
      throw ValidationError("control has " + std::to_string(values_.size()) + " values, expected " +
                            std::to_string(intervals() * marks_));
    }
    for (std::size_t j = 0; j < intervals(); ++j)
      for (std::size_t k = 0; k < marks_; ++k) {
        const double v = values_[j * marks_ + k];
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw DomainError("control value at cell (" + std::to_string(j) + ", " + std::to_string(k) +
                            ") is " + std::to_string(v) + "; controls must be finite and nonnegative");
        }
      }
  }

  static Control constant(double value, std::size_t marks, double horizon, std::size_t intervals = 1) {
    std::vector<double> grid(intervals + 1);
    for (std::size_t j = 0; j <= intervals; ++j)
      grid[j] = j == intervals ? horizon : horizon * static_cast<double>(j) / static_cast<double>(intervals);
    return Control(std::move(grid), marks, std::vector<double>(intervals * marks, value));
  }

  const std::vector<double>& time_grid() const noexcept { return time_grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t intervals() const noexcept { return time_grid_.empty() ? 0 : time_grid_.size() - 1; }
  std::size_t marks() const noexcept { return marks_; }
  double horizon() const noexcept { return time_grid_.back(); }

  std::size_t cell(double t) const noexcept {
    auto it = std::upper_bound(time_grid_.begin(), time_grid_.end(), t);
    const auto j = static_cast<std::size_t>(std::distance(time_grid_.begin(), it));
    if (j == 0) return 0;
    return std::min(j - 1, intervals() - 1);
  }

  double value(std::size_t j, std::size_t k) const { return values_.at(j * marks_ + k); }
  double at(double t, std::size_t k) const { return value(cell(t), k); }
  double max_value() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

  bool identically(double v) const noexcept {
    return std::all_of(values_.begin(), values_.end(), [v](double x) { return x == v; });
  }

 private:
  std::vector<double> time_grid_;
  std::size_t marks_ = 0;
  std::vector<double> values_;
};

struct PoissonEvent {
  double time = 0.0;
  std::size_t mark = 0;
  friend bool operator==(const PoissonEvent&, const PoissonEvent&) = default;
};

struct PoissonSample {
  std::vector<PoissonEvent> events;
  double horizon = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::size_t draw_mark(Rng& rng, const MarkSpace& marks) {
  if (marks.size() == 1) return 0;
  std::uniform_real_distribution<double> unif(0.0, marks.total_mass());
  const double x = unif(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < marks.size(); ++k) {
    acc += marks.weight(k);
    if (x < acc) return k;
  }
  return marks.size() - 1;
}

// Next arrival strictly after `t` for a process of total rate `rate`; exact ties
// (a zero gap after rounding) are redrawn.
inline double next_arrival(Rng& rng, double t, double rate) {
  std::exponential_distribution<double> gap(rate);
  for (;;) {
    const double next = t + gap(rng);
    if (next > t) return next;
  }
}

}  // namespace detail

// Homogeneous Poisson random measure on [0, T] x Z with intensity theta * (Lebesgue x w).
inline PoissonSample sample_prm(double rate_scale, const MarkSpace& marks, double horizon, std::uint64_t seed) {
  if (!(rate_scale > 0.0) || !std::isfinite(rate_scale)) throw DomainError("rate scale must be positive");
  if (!(horizon >= 0.0)) throw DomainError("horizon must be nonnegative");
  PoissonSample sample;
  sample.horizon = horizon;
  sample.seed = seed;
  Rng rng(seed);
  const double rate = rate_scale * marks.total_mass();
  double t = 0.0;
  for (;;) {
    t = detail::next_arrival(rng, t, rate);
    if (t > horizon) break;
    sample.events.push_back({t, detail::draw_mark(rng, marks)});
  }
  return sample;
}

// Controlled random measure eta^{phi / eps}: candidates of the base measure at rate
// max(phi) / eps with an auxiliary level r ~ U[0, max(phi)) are kept when r < phi(t, z).
inline PoissonSample sample_controlled_prm(const Control& phi, double eps, const MarkSpace& marks,
                                           std::uint64_t seed) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("noise scale eps must be positive");
  if (phi.marks() != marks.size()) throw StructuralError("control and mark space disagree on K");
  PoissonSample sample;
  sample.horizon = phi.horizon();
  sample.seed = seed;
  const double top = phi.max_value();
  if (top == 0.0) return sample;
  Rng rng(seed);
  std::uniform_real_distribution<double> level(0.0, top);
  const double rate = top / eps * marks.total_mass();
  double t = 0.0;
  for (;;) {
    t = detail::next_arrival(rng, t, rate);
    if (t > sample.horizon) break;
    const std::size_t k = detail::draw_mark(rng, marks);
    const double r = level(rng);
    if (r < phi.at(t, k)) sample.events.push_back({t, k});
  }
  return sample;
}

// l(r) = r log r - r + 1 with l(0) = 1.
inline double entropy_cost(double r) {
  if (!(r >= 0.0)) throw DomainError("cost integrand evaluated at negative control value");
  if (r == 0.0) return 1.0;
  return r * std::log(r) - r + 1.0;
}

// L_T(g) = sum_j sum_k (t_{j+1} - t_j) w_k l(g(j, k)).
inline double cost(const Control& g, const MarkSpace& marks) {
  if (g.marks() != marks.size()) throw StructuralError("control and mark space disagree on K");
  const auto& grid = g.time_grid();
  double total = 0.0;
  for (std::size_t j = 0; j < g.intervals(); ++j) {
    const double dt = grid[j + 1] - grid[j];
    for (std::size_t k = 0; k < marks.size(); ++k) total += dt * marks.weight(k) * entropy_cost(g.value(j, k));
  }
  return total;
}

// sum_k w_k (g(t, z_k) - 1) sigma(t, u, z_k).
inline SpectralField control_drift(double t, const SpectralField& u, const Control& g,
                                   const NoiseCoefficient& sigma, const MarkSpace& marks) {
  require_matching(sigma, marks);
  if (g.marks() != marks.size()) throw StructuralError("control and mark space disagree on K");
  SpectralField out(u.grid_ptr());
  const std::size_t j = g.cell(t);
  for (std::size_t k = 0; k < marks.size(); ++k)
    sigma.accumulate(marks.weight(k) * (g.value(j, k) - 1.0), u, k, out);
  return out;
}

// -sum_k w_k sigma(t, u, z_k): the drift left by compensating eta.
inline SpectralField compensator_drift(double /*t*/, const SpectralField& u, const NoiseCoefficient& sigma,
                                       const MarkSpace& marks) {
  require_matching(sigma, marks);
  SpectralField out(u.grid_ptr());
  for (std::size_t k = 0; k < marks.size(); ++k) sigma.accumulate(-marks.weight(k), u, k, out);
  return out;
}

}  // namespace tamed

#endif  // TAMED_NOISE_HPP
