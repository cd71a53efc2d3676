#ifndef TAMED_SOLVER_HPP
#define TAMED_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "tamed/errors.hpp"
#include "tamed/field.hpp"
#include "tamed/noise.hpp"
#include "tamed/spectral_ops.hpp"
#include "tamed/taming.hpp"

namespace tamed {

// Nonzero dealiased wavevectors in Stokes-eigenvalue order, ties broken by lexicographic k.
inline std::vector<std::size_t> ordered_wavevectors(const TorusGrid& grid) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid.k_sq(i) != 0 && grid.dealiased(i)) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&grid](std::size_t a, std::size_t b) {
    return std::make_tuple(grid.k_sq(a), grid.wavevector(a)) < std::make_tuple(grid.k_sq(b), grid.wavevector(b));
  });
  return idx;
}

// Galerkin truncation Pi_n. `n` counts wavevectors taken in eigenvalue order; the set is
// then closed under k -> -k so that real fields stay real. Each retained wavevector
// carries both solenoidal polarizations.
class Truncation {
 public:
  Truncation() = default;
  Truncation(GridPtr grid, std::size_t n) : grid_(std::move(grid)), requested_(n) {
    if (n < 1) throw ValidationError("truncation must retain at least one mode");
    const auto order = ordered_wavevectors(*grid_);
    retained_.assign(grid_->size(), 0);
    std::size_t taken = 0;
    for (std::size_t idx : order) {
      if (taken >= n) break;
      if (retained_[idx]) continue;
      retained_[idx] = 1;
      retained_[grid_->negated(idx)] = 1;
      taken += idx == grid_->negated(idx) ? 1 : 2;
    }
    for (std::size_t i = 0; i < grid_->size(); ++i)
      if (retained_[i]) indices_.push_back(i);
  }

  // Every dealiased mode.
  static Truncation full(GridPtr grid) {
    const std::size_t count = ordered_wavevectors(*grid).size();
    return Truncation(std::move(grid), std::max<std::size_t>(count, 1));
  }

  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::size_t requested() const noexcept { return requested_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool retains(std::size_t idx) const noexcept { return retained_[idx] != 0; }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

 private:
  GridPtr grid_;
  std::size_t requested_ = 0;
  std::vector<std::uint8_t> retained_;
  std::vector<std::size_t> indices_;
};

inline void project_truncation_inplace(SpectralField& u, const Truncation& trunc) {
  if (!trunc.grid_ptr() || !(u.grid() == *trunc.grid_ptr())) {
    throw StructuralError("field and truncation live on different grids");
  }
  const TorusGrid& grid = u.grid();
  for (int j = 0; j < 3; ++j) {
    auto c = u.component(j);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!trunc.retains(i)) c[i] = Complex{};
  }
}

inline SpectralField project_truncation(SpectralField u, const Truncation& trunc) {
  project_truncation_inplace(u, trunc);
  return u;
}

struct SolverConfig {
  double dt = 1e-3;
  double horizon = 0.5;
  Truncation truncation;
  TamingSpec taming{1.0};
  double eps = 0.0;
  std::size_t snapshot_stride = 0;  // 0: only t = 0 and t = T
  std::uint64_t seed = 0;

  std::size_t steps() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("horizon T must be positive");
    if (dt > horizon) throw ValidationError("dt must not exceed T");
    const double ratio = horizon / dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * ratio) {
      throw ValidationError("T must be an integer multiple of dt");
    }
    return static_cast<std::size_t>(rounded);
  }
  double time_at(std::size_t step) const {
    const std::size_t total = steps();
    return step == total ? horizon : static_cast<double>(step) * dt;
  }
};

struct JumpRecord {
  double time = 0.0;
  std::size_t mark = 0;
  double pre_h1 = 0.0;
  double post_h1 = 0.0;
};

struct EnergyRow {
  double time = 0.0;
  double h1_sq = 0.0;
  double cum_h2_sq = 0.0;  // trapezoidal running integral of ||u||^2_{H^2}
  bool jump = false;       // a jump happened in (previous row time, time]
  // Midpoint-rule prediction of the drift's contribution to the change of ||u||^2_{H^1}
  // since the previous row: sum over substeps of h * 2 <u_mid, -A u_mid + N(u_mid)>_{H^1}.
  double drift_increment = 0.0;
};

// Cadlag solution record: snapshots and energy rows hold post-jump states.
struct Trajectory {
  std::vector<double> snapshot_times;
  std::vector<SpectralField> snapshots;
  std::vector<JumpRecord> jumps;
  std::vector<EnergyRow> energy;
  std::size_t event_count = 0;
  SpectralField final_field;

  double sup_h1_sq() const {
    double m = 0.0;
    for (const auto& row : energy) m = std::max(m, row.h1_sq);
    return m;
  }
};

struct StageContext {
  std::size_t step = 0;
  int stage = 0;  // 0: start of substep, 1: midpoint
  double time = 0.0;
};

// Extra explicit drift added to -B(u) - P g_N(|u|^2) u; accumulates into `out`.
using Forcing = std::function<void(const StageContext&, const SpectralField& u, SpectralField& out)>;
// Applies the jump at an event to the left limit u(t-).
using Kick = std::function<void(const PoissonEvent&, SpectralField& u)>;
using Observer = std::function<void(std::size_t step, double time, const SpectralField& u)>;

namespace detail {

// 2 <u, -A u + N>_{H^1}
inline double energy_rate(const SpectralField& u, const SpectralField& explicit_part) {
  SpectralField rhs = explicit_part;
  rhs -= apply_stokes(u);
  return 2.0 * inner_product(u, rhs, 1);
}

// Exponential midpoint scheme on the retained modes:
//   u_mid = E(h/2) (u + h/2 N(t, u)),  u_new = E(h) u + h E(h/2) N(t + h/2, u_mid),
// with E(h) = exp(-A h) applied exactly per mode.
class ExponentialMidpoint {
 public:
  ExponentialMidpoint(const SolverConfig& cfg, Forcing forcing)
      : cfg_(cfg), forcing_(std::move(forcing)), grid_(cfg.truncation.grid_ptr()) {
    const auto& idx = cfg_.truncation.indices();
    eigen_.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) eigen_[i] = grid_->eigenvalue(idx[i]);
    full_ = decay(cfg_.dt);
    half_ = decay(0.5 * cfg_.dt);
  }

  SpectralField explicit_part(const StageContext& ctx, const SpectralField& u) const {
    SpectralField n = tamed_nonlinearity(u, cfg_.taming);
    if (forcing_) forcing_(ctx, u, n);
    project_truncation_inplace(n, cfg_.truncation);
    return n;
  }

  // Advances u from t to t + h; returns the H^1 energy rate at the midpoint stage.
  double advance(SpectralField& u, double t, double h, std::size_t step) const {
    const bool regular = h == cfg_.dt;
    const std::vector<double> e_full = regular ? full_ : decay(h);
    const std::vector<double> e_half = regular ? half_ : decay(0.5 * h);
    SpectralField mid = u;
    mid.axpy(0.5 * h, explicit_part({step, 0, t}, u));
    scale_modes(mid, e_half);
    SpectralField n1 = explicit_part({step, 1, t + 0.5 * h}, mid);
    const double rate = energy_rate(mid, n1);
    scale_modes(u, e_full);
    scale_modes(n1, e_half);
    u.axpy(h, n1);
    return rate;
  }

 private:
  std::vector<double> decay(double h) const {
    std::vector<double> e(eigen_.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::exp(-eigen_[i] * h);
    return e;
  }

  void scale_modes(SpectralField& u, const std::vector<double>& factors) const {
    const auto& idx = cfg_.truncation.indices();
    for (int j = 0; j < 3; ++j) {
      auto c = u.component(j);
      for (std::size_t i = 0; i < idx.size(); ++i) c[idx[i]] *= factors[i];
    }
  }

  const SolverConfig& cfg_;
  Forcing forcing_;
  GridPtr grid_;
  std::vector<double> eigen_;
  std::vector<double> full_;
  std::vector<double> half_;
};

inline SpectralField initial_state(const SpectralField& u0, const SolverConfig& cfg) {
  if (!cfg.truncation.grid_ptr()) throw ValidationError("solver config has no truncation");
  u0.require_same_grid(SpectralField(cfg.truncation.grid_ptr()));
  SpectralField u = project_truncation(u0, cfg.truncation);
  SpectralField diff = u0 - u;
  if (diff.max_abs() > 0.0) {
    std::clog << "tamed: initial field has modes outside the truncation; projecting (dropped H1 norm "
              << sobolev_norm(diff, 1) << ")\n";
  }
  return u;
}

}  // namespace detail

// Integrates du = [-A u - B(u) - P g_N(|u|^2) u + forcing] dt on the truncated space, with
// jumps at the given events. Events whose kick is a no-op (`inert(mark)`) do not split
// steps and leave no jump record.
inline Trajectory integrate(const SpectralField& u0, const SolverConfig& cfg, const Forcing& forcing,
                            const std::vector<PoissonEvent>& events, const Kick& kick,
                            const std::function<bool(std::size_t)>& inert, const Observer& observer = {}) {
  const std::size_t steps = cfg.steps();
  SpectralField u = detail::initial_state(u0, cfg);
  detail::ExponentialMidpoint scheme(cfg, forcing);

  Trajectory traj;
  traj.event_count = 0;
  for (const auto& e : events)
    if (e.time <= cfg.horizon) ++traj.event_count;

  auto record_snapshot = [&](double t) {
    traj.snapshot_times.push_back(t);
    traj.snapshots.push_back(u);
  };

  record_snapshot(0.0);
  if (observer) observer(0, 0.0, u);
  double prev_h2 = sobolev_norm_sq(u, 2);
  traj.energy.push_back({0.0, sobolev_norm_sq(u, 1), 0.0, false, 0.0});

  std::size_t next_event = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t0 = cfg.time_at(i);
    const double t1 = cfg.time_at(i + 1);
    double tc = t0;
    bool jumped = false;
    double increment = 0.0;
    auto substep = [&](double h) { increment += h * scheme.advance(u, tc, h, i); };
    while (next_event < events.size() && events[next_event].time <= t1) {
      const PoissonEvent& e = events[next_event++];
      if (inert && inert(e.mark)) continue;
      if (e.time > tc) {
        substep(e.time - tc);
        tc = e.time;
      }
      JumpRecord rec{e.time, e.mark, sobolev_norm(u, 1), 0.0};
      kick(e, u);
      project_truncation_inplace(u, cfg.truncation);
      rec.post_h1 = sobolev_norm(u, 1);
      traj.jumps.push_back(rec);
      jumped = true;
    }
    if (tc == t0) {
      substep(cfg.dt);
    } else if (t1 > tc) {
      substep(t1 - tc);
    }
    if (!u.is_finite()) {
      throw BlowupError("nonfinite state after step " + std::to_string(i + 1) + " (t = " +
                            std::to_string(t1) + ")",
                        t0);
    }
    const double h2 = sobolev_norm_sq(u, 2);
    EnergyRow row{t1, sobolev_norm_sq(u, 1), traj.energy.back().cum_h2_sq + 0.5 * (prev_h2 + h2) * (t1 - t0),
                  jumped, increment};
    prev_h2 = h2;
    traj.energy.push_back(row);
    if (observer) observer(i + 1, t1, u);
    if (i + 1 == steps || (cfg.snapshot_stride > 0 && (i + 1) % cfg.snapshot_stride == 0)) {
      record_snapshot(t1);
    }
  }
  traj.final_field = u;
  return traj;
}

namespace detail {

inline void require_horizon(const Control& g, const SolverConfig& cfg) {
  if (g.horizon() < cfg.horizon * (1.0 - 1e-12)) {
    throw ValidationError("control horizon " + std::to_string(g.horizon()) + " is shorter than T = " +
                          std::to_string(cfg.horizon));
  }
}

inline Forcing control_forcing(const Control& g, const NoiseCoefficient& sigma, const MarkSpace& marks) {
  return [&g, &sigma, &marks](const StageContext& ctx, const SpectralField& u, SpectralField& out) {
    const std::size_t j = g.cell(ctx.time);
    for (std::size_t k = 0; k < marks.size(); ++k)
      sigma.accumulate(marks.weight(k) * (g.value(j, k) - 1.0), u, k, out);
  };
}

inline Forcing compensator_forcing(const NoiseCoefficient& sigma, const MarkSpace& marks) {
  return [&sigma, &marks](const StageContext&, const SpectralField& u, SpectralField& out) {
    for (std::size_t k = 0; k < marks.size(); ++k) sigma.accumulate(-marks.weight(k), u, k, out);
  };
}

inline Kick noise_kick(double eps, const NoiseCoefficient& sigma) {
  return [eps, &sigma](const PoissonEvent& e, SpectralField& u) {
    SpectralField jump(u.grid_ptr());
    sigma.accumulate(eps, u, e.mark, jump);
    u += jump;
  };
}

}  // namespace detail

// Skeleton equation du/dt = F(u) + sum_k w_k (g(t, z_k) - 1) sigma(t, u, z_k).
inline Trajectory solve_skeleton(const SpectralField& u0, const Control& g, const NoiseCoefficient& sigma,
                                 const MarkSpace& marks, const SolverConfig& cfg, const Observer& observer = {}) {
  require_matching(sigma, marks);
  detail::require_horizon(g, cfg);
  return integrate(u0, cfg, detail::control_forcing(g, sigma, marks), {}, {}, {}, observer);
}

// Small-noise equation: compensated drift F(u) - sum_k w_k sigma(u, z_k) between events of
// eta^{1/eps}, jumps u <- u + eps sigma(u(t-), z) at each event.
inline Trajectory solve_sde(const SpectralField& u0, double eps, const NoiseCoefficient& sigma,
                            const MarkSpace& marks, const SolverConfig& cfg, std::uint64_t seed,
                            const Observer& observer = {}) {
  require_matching(sigma, marks);
  if (!(eps > 0.0)) throw DomainError("noise scale eps must be positive");
  const PoissonSample sample = sample_prm(1.0 / eps, marks, cfg.horizon, seed);
  return integrate(u0, cfg, detail::compensator_forcing(sigma, marks), sample.events,
                   detail::noise_kick(eps, sigma), [&sigma](std::size_t k) { return sigma.mark_zero(k); },
                   observer);
}

// Controlled equation: jumps eps sigma at events of eta^{phi/eps}. The control drift
// sum w (phi - 1) sigma and the phi-compensator of the jumps cancel in the phi terms, leaving
// the drift F(u) - sum_k w_k sigma(u, z_k) between events.
inline Trajectory solve_controlled(const SpectralField& u0, double eps, const Control& phi,
                                   const NoiseCoefficient& sigma, const MarkSpace& marks, const SolverConfig& cfg,
                                   std::uint64_t seed, const Observer& observer = {}) {
  require_matching(sigma, marks);
  detail::require_horizon(phi, cfg);
  const PoissonSample sample = sample_controlled_prm(phi, eps, marks, seed);
  return integrate(u0, cfg, detail::compensator_forcing(sigma, marks), sample.events,
                   detail::noise_kick(eps, sigma), [&sigma](std::size_t k) { return sigma.mark_zero(k); },
                   observer);
}

struct PicardResult {
  Trajectory trajectory;
  std::size_t iterations = 0;
  std::vector<double> residuals;  // sup_t ||Y_m - Y_{m-1}||_{H^1}, one per iteration
};

// Picard iteration for the skeleton equation: Y_0(t) = Pi_n u0 and Y_m solves the skeleton
// equation with the control coefficient frozen at Y_{m-1}. The frozen coefficient is read at
// the same stage states the scheme visits, so the fixed point coincides with solve_skeleton.
inline PicardResult solve_skeleton_picard(const SpectralField& u0, const Control& g, const NoiseCoefficient& sigma,
                                          const MarkSpace& marks, const SolverConfig& cfg, std::size_t max_iter,
                                          double tol) {
  require_matching(sigma, marks);
  detail::require_horizon(g, cfg);
  if (max_iter < 1) throw ValidationError("max_iter must be at least 1");
  PicardResult result;
  // With g = 1 or sigma = 0 the frozen term vanishes and the first stage is exact.
  if (g.identically(1.0) || sigma.is_zero()) {
    result.trajectory = solve_skeleton(u0, g, sigma, marks, cfg);
    result.iterations = 1;
    return result;
  }

  const std::size_t steps = cfg.steps();
  const auto& idx = cfg.truncation.indices();
  std::vector<double> h1_weight(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) h1_weight[i] = 1.0 + cfg.truncation.grid_ptr()->eigenvalue(idx[i]);

  const PackedField start = pack(detail::initial_state(u0, cfg), idx);
  std::vector<PackedField> previous(2 * steps + 1, start);  // stage states, then the state at T
  std::vector<PackedField> current(2 * steps + 1);

  auto h1_distance_sq = [&](const PackedField& a, const PackedField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < 3; ++j) s += h1_weight[i] * std::norm(a.values[3 * i + j] - b.values[3 * i + j]);
    return s;
  };

  SpectralField frozen(cfg.truncation.grid_ptr());
  for (std::size_t m = 1; m <= max_iter; ++m) {
    Forcing forcing = [&](const StageContext& ctx, const SpectralField& u, SpectralField& out) {
      const std::size_t slot = 2 * ctx.step + static_cast<std::size_t>(ctx.stage);
      if (ctx.step < steps) current[slot] = pack(u, idx);
      unpack(previous[std::min(slot, 2 * steps)], idx, frozen);
      const std::size_t j = g.cell(ctx.time);
      for (std::size_t k = 0; k < marks.size(); ++k)
        sigma.accumulate(marks.weight(k) * (g.value(j, k) - 1.0), frozen, k, out);
    };
    Trajectory traj = integrate(u0, cfg, forcing, {}, {}, {});
    current[2 * steps] = pack(traj.final_field, idx);

    double sup = 0.0;
    for (std::size_t i = 0; i <= steps; ++i) {
      const std::size_t slot = i == steps ? 2 * steps : 2 * i;
      sup = std::max(sup, h1_distance_sq(current[slot], previous[slot]));
    }
    result.residuals.push_back(std::sqrt(sup));
    result.trajectory = std::move(traj);
    result.iterations = m;
    if (result.residuals.back() <= tol) return result;
    std::swap(previous, current);
  }
  throw IterationError("Picard iteration did not reach tolerance " + std::to_string(tol) + " in " +
                           std::to_string(max_iter) + " iterations",
                       result.residuals);
}

}  // namespace tamed

#endif  // TAMED_SOLVER_HPP
