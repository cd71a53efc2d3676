#ifndef TAMED_SAMPLER_HPP
#define TAMED_SAMPLER_HPP

#include <cmath>
#include <random>

#include "tamed/field.hpp"
#include "tamed/rng.hpp"
#include "tamed/spectral_ops.hpp"

namespace tamed {

// Random solenoidal fields: Gaussian coefficients with amplitude (1 + |2 pi k|^2)^-decay
// on the dealiased modes, Leray-projected and rescaled to a target H^1 norm.
struct FieldSampler {
  double decay = 2.0;
  double h1_min = 0.1;  // target ||u||_{H^1} is log-uniform on [h1_min, h1_max]
  double h1_max = 20.0;
  bool dealiased = true;
};

// Hermitian Gaussian field without any projection (raw L^2 data).
inline SpectralField random_raw_field(const GridPtr& grid, Rng& rng, double decay, bool dealiased_only) {
  SpectralField f(grid);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const std::size_t neg = grid->negated(i);
    if (neg < i) continue;  // partner already set
    if (dealiased_only && !grid->dealiased(i)) continue;
    const double amp = std::pow(1.0 + grid->eigenvalue(i), -decay);
    std::array<Complex, 3> a;
    for (auto& c : a) c = amp * Complex(normal(rng), normal(rng));
    f.set_mode(grid->wavevector(i), a);
  }
  return f;
}

inline SpectralField random_field(const GridPtr& grid, Rng& rng, double decay, double h1_norm,
                                  bool dealiased_only = true) {
  SpectralField f = leray_project(random_raw_field(grid, rng, decay, dealiased_only));
  const double norm = sobolev_norm(f, 1);
  if (norm > 0.0) f *= h1_norm / norm;
  return f;
}

inline SpectralField sample_field(const GridPtr& grid, Rng& rng, const FieldSampler& spec) {
  std::uniform_real_distribution<double> unif(std::log(spec.h1_min), std::log(spec.h1_max));
  const double target = std::exp(unif(rng));
  return random_field(grid, rng, spec.decay, target, spec.dealiased);
}

}  // namespace tamed

#endif  // TAMED_SAMPLER_HPP
