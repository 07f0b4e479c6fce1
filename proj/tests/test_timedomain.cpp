// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cylspec/resolvent.hpp"
#include "cylspec/timedomain.hpp"

using namespace cylspec;

namespace
{
CVector slice(const SpectralBasis &b, std::function<cplx(double)> g)
{
  CVector v(b.n_nodes());
  for (int m = 0; m < b.n_nodes(); ++m)
    v(m) = g(b.nodes()[m]);
  return v;
}

// Random polynomial of degree deg with decaying coefficients, at the nodes.
CVector random_slice(const SpectralBasis &b, std::mt19937_64 &rng, int deg = 6)
{
  std::normal_distribution<double> g;
  std::vector<cplx> c(deg + 1);
  for (int k = 0; k <= deg; ++k)
    c[k] = cplx(g(rng), g(rng)) * std::pow(0.6, k);
  return slice(b,
               [&](double x)
               {
                 cplx s = 0.0;
                 for (int k = deg; k >= 0; --k)
                   s = s * x + c[k];
                 return s;
               });
}

GridFunction scalar(const SpectralBasis &b, std::function<cplx(double, double)> f)
{
  return sample(b, 1, [&](double t, double x) { return CVector::Constant(1, f(t, x)); });
}
}  // namespace

TEST(Evolve, ZeroStaysZero)
{
  auto b = build_basis(0, 12);
  auto run = evolve(fixture("EX1"), b, CVector(), 1.0, 0.0, 3.0);
  for (auto &s : run.slices)
    EXPECT_EQ(s.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Evolve, ConstantDecaysExactly)
{
  auto b = build_basis(0, 16);
  auto run = evolve(fixture("EX1"), b, slice(*b, [](double) { return 1.0; }), 1.0, 0.0, two_pi);
  ASSERT_NEAR(run.t_end(), two_pi, 1e-12);
  const CVector &last = run.slices.back();
  for (Eigen::Index m = 0; m < last.size(); ++m)
    EXPECT_NEAR(std::abs(last(m) - std::exp(-two_pi)), 0.0, 1e-6);
}

TEST(Evolve, StepDividesThePeriod)
{
  auto b = build_basis(2, 16);
  EvolveOptions o;
  o.steps_per_period_multiple = 5;
  auto run = evolve(fixture("EX1"), b, CVector(), 1.0, 0.0, two_pi, o);
  EXPECT_EQ((run.size() - 1) % 5, 0u);
  EXPECT_NEAR(run.dt * static_cast<double>(run.size() - 1), two_pi, 1e-12);
  EXPECT_LE(run.dt, stable_step(fixture("EX1"), *b, 1.0));
}

TEST(Evolve, FourthOrderInTime)
{
  // Characteristics of d0 + 0.5 x d1 + 1: u = e^{-t} g(x e^{-t/2}); g = x^3 is exact on the grid.
  auto b = build_basis(0, 12);
  auto s = fixture("EX1");
  auto init = slice(*b, [](double x) { return x * x * x; });
  auto exact = slice(*b, [](double x) { return std::exp(-1.0) * std::pow(x * std::exp(-0.5), 3); });
  double bound = stable_step(s, *b, 1.0);
  std::vector<double> err;
  for (double dt : {bound, bound / 2})
  {
    EvolveOptions o;
    o.dt = 1.0 / std::ceil(1.0 / dt);
    auto run = evolve(s, b, init, 1.0, 0.0, 1.0, o);
    err.push_back((run.slices.back() - exact).cwiseAbs().maxCoeff());
  }
  // The second run may use a step slightly different from half the first.
  EXPECT_GT(err[0] / err[1], 12.0);
  EXPECT_LT(err[0] / err[1], 20.0);
}

TEST(Evolve, CflAndInstability)
{
  auto b = build_basis(0, 16);
  auto s = fixture("EX1");
  const double bound = stable_step(s, *b, 1.0);
  EvolveOptions o;
  o.dt = 3.0 * bound;
  try
  {
    evolve(s, b, CVector(), 1.0, 0.0, 1.0, o);
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::cfl);
  }
  // The semi-discrete spectrum of EX1 is real in [-9, -1]; an oversized step
  // grows at a few units per time until the capped threshold is crossed.
  o.dt = 60.0 * bound;
  o.enforce_cfl = false;
  std::mt19937_64 rng(2);
  try
  {
    evolve(s, b, random_slice(*b, rng), 1.0, 0.0, 400.0, o);
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::instability);
  }
}

TEST(Evolve, ForcedRunIsRetardedAndSolvesThePde)
{
  auto b = build_basis(0, 16);
  auto s = fixture("EX1");
  SliceForcing f = [&](double t)
  {
    double w = (t > 2.0 && t < 4.0) ? std::exp(1.0 - 1.0 / (1.0 - (t - 3.0) * (t - 3.0))) : 0.0;
    return CVector(slice(*b, [&](double x) { return w * (1.0 + x); }));
  };
  auto run = evolve(s, b, CVector(), f, 0.3, 0.0, 8.0);
  for (std::size_t k = 0; k < run.size() && run.time(k) <= 2.0; ++k)
    EXPECT_EQ(run.sup_norm(k), 0.0);
  EXPECT_GT(run.sup_norm(run.index_of(4.0)), 1e-3);
  // The residual is O(dt^4): halving the step shrinks it about 16x.
  const double r1 = pde_residual(s, run, f, 0.3);
  EvolveOptions o;
  o.dt = 0.5 * run.dt;
  auto fine = evolve(s, b, CVector(), f, 0.3, 0.0, 8.0, o);
  const double r2 = pde_residual(s, fine, f, 0.3);
  EXPECT_LE(r1, 1e-4);
  EXPECT_GT(r1 / r2, 10.0);
}

TEST(Energy, ZeroFieldAndFirstOrder)
{
  auto b = build_basis(0, 16);
  auto s = fixture("EX1");
  auto zero = evolve(s, b, CVector(), 1.0, 0.0, 1.0);
  for (double e : energy_series(zero, 1, s).values)
    EXPECT_EQ(e, 0.0);
  // u = e^{-zt}: E_0 = e^{-2zt}, E_1 = z^2 e^{-2zt} (only d0 contributes).
  const double z = 0.7;
  auto run = evolve(s, b, slice(*b, [](double) { return 1.0; }), z, 0.0, 2.0);
  auto e0 = energy_series(run, 0, s);
  auto e1 = energy_series(run, 1, s);
  for (std::size_t k = 0; k < run.size(); k += 37)
  {
    const double t = run.time(k);
    EXPECT_NEAR(e0.values[k], std::exp(-2 * z * t), 1e-9);
    EXPECT_NEAR(e1.values[k], z * z * std::exp(-2 * z * t), 1e-7);
  }
}

TEST(Energy, DecayAboveThreshold)
{
  auto s = fixture("EX1");
  auto k = stability_constants(s);
  auto b = build_basis(0, 16);
  std::mt19937_64 rng(5);
  const double z = k.z_star + 0.1;
  auto run = evolve(s, b, random_slice(*b, rng), z, 0.0, 6 * two_pi);
  auto e = energy_series(run, 0, s);
  double slope = log_slope(e.times, e.values, run.t_end() - 4 * two_pi, run.t_end() + 1e-9);
  EXPECT_LE(slope, -0.9);
  // E(t + 2pi) <= E(t) e^{-2pi (1 - 0.1)} (1 + 1e-3)
  const std::size_t per = run.index_of(two_pi);
  for (std::size_t i = 0; i + per < run.size(); i += 11)
    EXPECT_LE(e.values[i + per], e.values[i] * std::exp(-two_pi * 0.9) * (1 + 1e-3)) << e.times[i];
}

TEST(Energy, ForcedRunStagnatesThenDecays)
{
  auto s = fixture("EX1");
  auto b = build_basis(0, 16);
  SliceForcing f = [&](double t)
  {
    double w = (t > two_pi && t < 2 * two_pi)
                   ? std::exp(1.0 - 1.0 / (1.0 - std::pow((t - 1.5 * two_pi) / pi, 2)))
                   : 0.0;
    return CVector(slice(*b, [&](double x) { return w * std::exp(-x * x); }));
  };
  const double z = 0.85;
  auto run = evolve(s, b, CVector(), f, z, 0.0, 5 * two_pi);
  auto e = energy_series(run, 0, s);
  double during = log_slope(e.times, e.values, 1.2 * two_pi, 1.5 * two_pi, 1e-30);
  double after = log_slope(e.times, e.values, 2.5 * two_pi, 5 * two_pi, 1e-30);
  EXPECT_GT(during, 0.0);
  EXPECT_LE(after, -0.9);
}

TEST(Periodize, MatchesDirectSolves)
{
  auto s = fixture("EX1");
  auto b = build_basis(2, 16);
  auto one = scalar(*b, [](double, double) { return 1.0; });
  auto r1 = periodize(s, b, one, 1.0);
  EXPECT_LE((r1.u - one).data.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(r1.residual, 1e-6);

  auto x = scalar(*b, [](double, double x) { return x; });
  auto rx = periodize(s, b, x, 1.0);
  EXPECT_LE((rx.u - x * (1.0 / 1.5)).data.cwiseAbs().maxCoeff(), 1e-6);

  std::mt19937_64 rng(9);
  auto f = random_band_limited(*b, 1, rng, 2, 8, 0.6);
  DiscreteOperator op(s, b);
  for (cplx z : {cplx(1.0, 0.0), cplx(0.9, 0.4)})
  {
    auto r = periodize(s, b, f, z);
    auto direct = solve_resolvent(op, z, f);
    EXPECT_LE((r.u - direct).data.norm() / direct.data.norm(), 1e-5);
    EXPECT_LE(r.residual, 1e-6);
    EXPECT_GT(r.iterations, 1);
  }
}

TEST(Periodize, IterationCap)
{
  auto s = fixture("EX1S");
  auto b = build_basis(0, 8);
  auto one = scalar(*b, [](double, double) { return 1.0; });
  // Re z below the top pole: the translates grow instead of converging.
  try
  {
    periodize(s, b, one, 0.0, 5);
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::convergence);
  }
}

TEST(Growth, MatchesTopPole)
{
  auto b = build_basis(0, 16);
  std::mt19937_64 rng(13);
  std::vector<CVector> probes{random_slice(*b, rng), random_slice(*b, rng)};
  auto g1 = growth_rate(fixture("EX1"), b, probes);
  EXPECT_NEAR(g1.rate, 0.0, 0.05);
  EXPECT_FALSE(g1.non_modal);
  EXPECT_FALSE(g1.plateau);
  auto gs = growth_rate(fixture("EX1S"), b, probes);
  EXPECT_NEAR(gs.rate, 0.75, 0.05);
  EXPECT_FALSE(gs.non_modal);
  EXPECT_THROW(growth_rate(fixture("EX1"), b, probes, 5), Error);
}

TEST(Growth, FlatTransportPlateau)
{
  auto b = build_basis(0, 16);
  std::mt19937_64 rng(13);
  std::vector<CVector> probes{random_slice(*b, rng), random_slice(*b, rng), random_slice(*b, rng)};
  auto g = growth_rate(fixture("CE-FLAT"), b, probes);
  EXPECT_NEAR(g.rate, 0.0, 0.05);
  EXPECT_TRUE(g.non_modal);
  EXPECT_TRUE(g.plateau);
}
