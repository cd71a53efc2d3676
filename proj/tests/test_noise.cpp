#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "tamed/noise.hpp"
#include "tamed/sampler.hpp"

using namespace tamed;

namespace {

SpectralField shear(const GridPtr& grid, double a = 1.0) {
  SpectralField u(grid);
  u.set_mode({0, 1, 0}, {Complex(0.0, -0.5 * a), 0.0, 0.0});
  return u;
}

NoiseCoefficient random_coefficient(const GridPtr& grid, Rng& rng, std::size_t marks, int cutoff) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> scales;
  std::vector<SpectralField> phi;
  for (std::size_t k = 0; k < marks; ++k) {
    scales.push_back(normal(rng));
    phi.push_back(random_field(grid, rng, 2.0, std::abs(normal(rng))));
  }
  return NoiseCoefficient(scales, phi, cutoff);
}

struct Counts {
  double mean = 0.0;
  double var = 0.0;
};

Counts moments(const std::vector<double>& x) {
  Counts c;
  c.mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  for (double v : x) c.var += (v - c.mean) * (v - c.mean);
  c.var /= x.size() - 1;
  return c;
}

}  // namespace

TEST(MarkSpace, Validation) {
  EXPECT_THROW(MarkSpace(std::vector<double>{}), ValidationError);
  EXPECT_THROW(MarkSpace({1.0, 0.0}), ValidationError);
  EXPECT_THROW(MarkSpace({1.0, -2.0}), ValidationError);
  MarkSpace m({0.5, 1.5});
  EXPECT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m.total_mass(), 2.0);
}

TEST(NoiseCoefficient, SmootherZeroesHighModes) {
  auto grid = make_grid(8);
  Rng rng(3);
  auto u = random_field(grid, rng, 1.0, 1.0, false);
  auto s = smooth(u, 1);
  for (int j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < grid->size(); ++i) {
      if (grid->k_sq(i) <= 1) {
        EXPECT_EQ(s(j, i), u(j, i));
      } else {
        EXPECT_EQ(s(j, i), Complex(0.0));
      }
    }
}

TEST(HypothesisConstants, ZeroCoefficient) {
  auto grid = make_grid(8);
  MarkSpace marks({1.0, 2.0, 0.5});
  auto h = hypothesis_constants(NoiseCoefficient::zero(grid, 3), marks);
  EXPECT_EQ(h.K1, 0.0);
  EXPECT_EQ(h.K2, 0.0);
  EXPECT_EQ(h.L1, 0.0);
  EXPECT_EQ(h.L2, 0.0);
  EXPECT_EQ(h.L3, 0.0);
}

TEST(HypothesisConstants, SingleUnitMark) {
  auto grid = make_grid(8);
  NoiseCoefficient sigma({1.0}, {SpectralField(grid)}, 2);
  auto h = hypothesis_constants(sigma, MarkSpace({1.0}));
  EXPECT_DOUBLE_EQ(h.K2, 1.0);
  EXPECT_DOUBLE_EQ(h.L3, 1.0);
}

TEST(HypothesisConstants, BoundSampledRatios) {
  auto grid = make_grid(8);
  Rng rng(11);
  MarkSpace marks({0.3, 1.0, 2.2});
  auto sigma = random_coefficient(grid, rng, 3, 2);
  auto h = hypothesis_constants(sigma, marks);
  FieldSampler spec;
  spec.dealiased = false;
  for (int trial = 0; trial < 500; ++trial) {
    auto u = sample_field(grid, rng, spec);
    auto v = sample_field(grid, rng, spec);
    auto d = u - v;
    double lip0 = 0.0, lip1 = 0.0, grow0 = 0.0, grow1 = 0.0, grow6 = 0.0;
    for (std::size_t k = 0; k < marks.size(); ++k) {
      const double w = marks.weight(k);
      auto su = sigma.apply(u, k);
      auto diff = su - sigma.apply(v, k);
      lip0 += w * sobolev_norm_sq(diff, 0);
      lip1 += w * sobolev_norm_sq(diff, 1);
      grow0 += w * sobolev_norm_sq(su, 0);
      grow1 += w * sobolev_norm_sq(su, 1);
      grow6 += w * std::pow(sobolev_norm(su, 1), 6);
    }
    EXPECT_LE(lip0, h.K2 * sobolev_norm_sq(d, 0) * (1 + 1e-12));
    EXPECT_LE(lip1, h.L3 * sobolev_norm_sq(d, 1) * (1 + 1e-12));
    EXPECT_LE(grow0, h.K1 * (1 + sobolev_norm_sq(u, 0)));
    EXPECT_LE(grow1, h.L1 * (1 + sobolev_norm_sq(u, 1)));
    EXPECT_LE(grow6, h.L2 * (1 + std::pow(sobolev_norm(u, 1), 6)));
  }
}

TEST(HypothesisConstants, MismatchedMarksThrow) {
  auto grid = make_grid(8);
  EXPECT_THROW(hypothesis_constants(NoiseCoefficient::zero(grid, 2), MarkSpace({1.0})), StructuralError);
}

TEST(CheckH1, ZeroCoefficientGivesMassTimesHorizon) {
  auto grid = make_grid(8);
  MarkSpace marks({1.0, 2.0});
  auto r = check_H1(NoiseCoefficient::zero(grid, 2), marks, 0.7, 1.5);
  for (auto& row : r.value)
    for (double v : row) EXPECT_DOUBLE_EQ(v, 4.5);
  EXPECT_TRUE(r.finite());
}

TEST(CheckH1, SingleMarkUnitBound) {
  auto grid = make_grid(8);
  NoiseCoefficient sigma({1.0}, {SpectralField(grid)}, 1);
  auto r = check_H1(sigma, MarkSpace({1.0}), 1.0, 1.0);
  for (auto& row : r.value)
    for (double v : row) EXPECT_NEAR(v, std::exp(1.0), 1e-14);
}

TEST(CheckH1, MonotoneInDelta) {
  auto grid = make_grid(8);
  Rng rng(5);
  MarkSpace marks({1.0, 0.5});
  auto sigma = random_coefficient(grid, rng, 2, 1);
  double prev[2][2] = {{0, 0}, {0, 0}};
  for (double delta : {0.01, 0.1, 0.5, 1.0, 2.0}) {
    auto r = check_H1(sigma, marks, delta, 1.0);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        EXPECT_GE(r.value[i][j], prev[i][j]);
        prev[i][j] = r.value[i][j];
      }
  }
}

TEST(SamplePrm, MeanCountMatchesIntensity) {
  MarkSpace marks({0.5, 1.5});
  const double theta = 3.0, T = 2.0;
  const int R = 10000;
  std::vector<double> counts;
  std::vector<double> per_mark(2, 0.0);
  for (int r = 0; r < R; ++r) {
    auto s = sample_prm(theta, marks, T, split_seed(42, r));
    counts.push_back(static_cast<double>(s.events.size()));
    for (auto& e : s.events) per_mark[e.mark] += 1.0;
  }
  auto m = moments(counts);
  const double expected = theta * marks.total_mass() * T;
  EXPECT_LT(std::abs(m.mean - expected), 3.0 * std::sqrt(expected / R));
  const double share = per_mark[0] / (per_mark[0] + per_mark[1]);
  const double n = per_mark[0] + per_mark[1];
  EXPECT_LT(std::abs(share - 0.25), 3.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST(SamplePrm, EventsSortedAndInHorizon) {
  auto s = sample_prm(50.0, MarkSpace({1.0, 1.0}), 1.0, 9);
  ASSERT_FALSE(s.events.empty());
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    EXPECT_GT(s.events[i].time, i ? s.events[i - 1].time : 0.0);
    EXPECT_LE(s.events[i].time, 1.0);
  }
  EXPECT_EQ(s.events, sample_prm(50.0, MarkSpace({1.0, 1.0}), 1.0, 9).events);
}

TEST(SamplePrm, ZeroHorizonIsEmpty) {
  EXPECT_TRUE(sample_prm(5.0, MarkSpace({1.0}), 0.0, 1).events.empty());
  EXPECT_THROW(sample_prm(0.0, MarkSpace({1.0}), 1.0, 1), DomainError);
}

TEST(SamplePrm, DisjointIntervalsUncorrelated) {
  const int R = 10000;
  const double T = 1.0;
  std::vector<double> a, b;
  for (int r = 0; r < R; ++r) {
    auto s = sample_prm(4.0, MarkSpace({1.0}), T, split_seed(7, r));
    double first = 0, second = 0;
    for (auto& e : s.events) (e.time <= T / 2 ? first : second) += 1.0;
    a.push_back(first);
    b.push_back(second);
  }
  auto ma = moments(a), mb = moments(b);
  double cov = 0.0;
  for (int r = 0; r < R; ++r) cov += (a[r] - ma.mean) * (b[r] - mb.mean);
  cov /= R - 1;
  const double corr = cov / std::sqrt(ma.var * mb.var);
  EXPECT_LT(std::abs(corr), 3.0 / std::sqrt(R));
}

TEST(ControlledPrm, UnitControlMatchesPlainPerCell) {
  MarkSpace marks({1.0, 0.5});
  const double eps = 0.25;
  Control phi = Control::constant(1.0, 2, 1.0, 2);
  const int R = 10000;
  std::vector<double> plain(4, 0.0), thinned(4, 0.0);
  auto cell = [&](const PoissonEvent& e) { return phi.cell(e.time) * 2 + e.mark; };
  for (int r = 0; r < R; ++r) {
    for (auto& e : sample_prm(1.0 / eps, marks, 1.0, split_seed(1, r)).events) plain[cell(e)] += 1.0;
    for (auto& e : sample_controlled_prm(phi, eps, marks, split_seed(2, r)).events) thinned[cell(e)] += 1.0;
  }
  for (int c = 0; c < 4; ++c) {
    const double mean = 0.5 / eps * marks.weight(c % 2);
    // difference of two independent Poisson means over R replicas
    EXPECT_LT(std::abs(plain[c] - thinned[c]) / R, 3.0 * std::sqrt(2.0 * mean / R)) << "cell " << c;
  }
}

TEST(ControlledPrm, ZeroControlIsEmpty) {
  auto s = sample_controlled_prm(Control::constant(0.0, 1, 1.0), 0.1, MarkSpace({1.0}), 3);
  EXPECT_TRUE(s.events.empty());
  EXPECT_EQ(s.horizon, 1.0);
}

TEST(ControlledPrm, DoubledControlMean) {
  const int R = 10000;
  std::vector<double> counts;
  Control phi = Control::constant(2.0, 1, 1.0);
  for (int r = 0; r < R; ++r)
    counts.push_back(static_cast<double>(sample_controlled_prm(phi, 0.1, MarkSpace({1.0}), split_seed(8, r)).events.size()));
  EXPECT_LT(std::abs(moments(counts).mean - 20.0), 3.0 * std::sqrt(20.0 / R));
}

TEST(ControlledPrm, PiecewiseRatesPerCell) {
  Control phi({0.0, 0.5, 1.0}, 2, {0.0, 3.0, 1.0, 0.5});
  MarkSpace marks({1.0, 2.0});
  const double eps = 0.2;
  const int R = 10000;
  std::vector<double> counts(4, 0.0);
  for (int r = 0; r < R; ++r)
    for (auto& e : sample_controlled_prm(phi, eps, marks, split_seed(4, r)).events)
      counts[phi.cell(e.time) * 2 + e.mark] += 1.0;
  EXPECT_EQ(counts[0], 0.0);
  for (int c = 1; c < 4; ++c) {
    const double mean = 0.5 / eps * phi.values()[c] * marks.weight(c % 2);
    EXPECT_LT(std::abs(counts[c] / R - mean), 3.0 * std::sqrt(mean / R)) << "cell " << c;
  }
}

TEST(Control, Validation) {
  EXPECT_THROW(Control({0.0, 1.0}, 1, {-0.1}), DomainError);
  EXPECT_THROW(Control({0.0, 1.0}, 1, {std::nan("")}), DomainError);
  EXPECT_THROW(Control({0.1, 1.0}, 1, {1.0}), ValidationError);
  EXPECT_THROW(Control({0.0, 0.0}, 1, {1.0}), ValidationError);
  EXPECT_THROW(Control({0.0, 1.0}, 2, {1.0}), ValidationError);
  Control g({0.0, 0.25, 1.0}, 1, {1.0, 2.0});
  EXPECT_EQ(g.at(0.0, 0), 1.0);
  EXPECT_EQ(g.at(0.25, 0), 2.0);
  EXPECT_EQ(g.at(1.0, 0), 2.0);
}

TEST(Cost, Examples) {
  MarkSpace one({1.0});
  EXPECT_EQ(cost(Control::constant(1.0, 1, 1.0), one), 0.0);
  EXPECT_NEAR(cost(Control::constant(2.0, 1, 1.0), one), 2.0 * std::log(2.0) - 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(cost(Control::constant(0.0, 1, 1.0), one), 1.0);
  EXPECT_THROW(entropy_cost(-1e-3), DomainError);
}

TEST(Cost, WeightedPiecewiseSum) {
  Control g({0.0, 0.5, 2.0}, 2, {2.0, 1.0, 0.0, 3.0});
  MarkSpace marks({0.5, 2.0});
  auto l = [](double r) { return r == 0 ? 1.0 : r * std::log(r) - r + 1; };
  const double expected = 0.5 * (0.5 * l(2.0) + 2.0 * l(1.0)) + 1.5 * (0.5 * l(0.0) + 2.0 * l(3.0));
  EXPECT_NEAR(cost(g, marks), expected, 1e-14);
}

TEST(Cost, ConvexAndVanishesOnlyAtOne) {
  for (double a = 0.0; a <= 5.0; a += 0.125)
    for (double b = 0.0; b <= 5.0; b += 0.25)
      for (double t : {0.25, 0.5, 0.75}) {
        const double mid = entropy_cost(t * a + (1 - t) * b);
        EXPECT_LE(mid, t * entropy_cost(a) + (1 - t) * entropy_cost(b) + 1e-14);
      }
  for (double r = 0.0; r <= 4.0; r += 0.01)
    if (std::abs(r - 1.0) > 1e-9) {
      EXPECT_GT(entropy_cost(r), 0.0);
    }
}

TEST(ControlDrift, UnitControlIsZero) {
  auto grid = make_grid(8);
  Rng rng(2);
  MarkSpace marks({1.0, 2.0});
  auto sigma = random_coefficient(grid, rng, 2, 2);
  auto u = random_field(grid, rng, 2.0, 3.0);
  EXPECT_TRUE(control_drift(0.3, u, Control::constant(1.0, 2, 1.0), sigma, marks).is_zero());
}

TEST(ControlDrift, StateIndependentCoefficient) {
  auto grid = make_grid(8);
  Rng rng(6);
  MarkSpace marks({1.0, 0.5});
  std::vector<SpectralField> phi{random_field(grid, rng, 2.0, 1.0), random_field(grid, rng, 2.0, 2.0)};
  NoiseCoefficient sigma({0.0, 0.0}, phi, 1);
  Control g({0.0, 1.0}, 2, {3.0, 0.5});
  auto a = control_drift(0.5, random_field(grid, rng, 2.0, 1.0), g, sigma, marks);
  auto b = control_drift(0.5, random_field(grid, rng, 2.0, 5.0), g, sigma, marks);
  EXPECT_EQ(a, b);
  auto expected = 2.0 * phi[0] + (0.5 * -0.5) * phi[1];
  EXPECT_LT((a - expected).max_abs(), 1e-15);
}

TEST(ControlDrift, SingleMarkSmoother) {
  auto grid = make_grid(8);
  Rng rng(7);
  NoiseCoefficient sigma({1.0}, {SpectralField(grid)}, 2);
  auto u = random_field(grid, rng, 1.0, 2.0, false);
  auto d = control_drift(0.0, u, Control::constant(2.0, 1, 1.0), sigma, MarkSpace({1.0}));
  EXPECT_EQ(d, smooth(u, 2));
}

TEST(CompensatorDrift, Examples) {
  auto grid = make_grid(8);
  Rng rng(8);
  auto u = random_field(grid, rng, 2.0, 1.0);
  EXPECT_TRUE(compensator_drift(0.0, u, NoiseCoefficient::zero(grid, 2), MarkSpace({1.0, 1.0})).is_zero());

  auto phi = shear(grid, 0.7);
  NoiseCoefficient single({0.0}, {phi}, 1);
  EXPECT_EQ(compensator_drift(0.0, u, single, MarkSpace({2.0})), -2.0 * phi);

  MarkSpace marks({0.4, 1.3});
  NoiseCoefficient sigma({0.0, 0.0}, {random_field(grid, rng, 2.0, 1.0), random_field(grid, rng, 2.0, 1.0)}, 1);
  auto comp = compensator_drift(0.1, u, sigma, marks);
  auto ctrl = control_drift(0.1, u, Control::constant(2.0, 2, 1.0), sigma, marks);
  EXPECT_LT((comp + ctrl).max_abs(), 1e-15);
}
