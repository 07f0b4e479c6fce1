// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cylspec/resolvent.hpp"

using namespace cylspec;

namespace
{
GridFunction scalar(const SpectralBasis &b, std::function<cplx(double, double)> f)
{
  return sample(b, 1, [&](double t, double x) { return CVector::Constant(1, f(t, x)); });
}

double max_abs(const GridFunction &u) { return u.data.cwiseAbs().maxCoeff(); }

double max_abs(const BlockOperator &m) { return detail::max_abs(m); }

// Nearest point of the half lattice {-p/2 : p >= 0} (imaginary part reduced).
double half_lattice_distance(cplx z)
{
  double p = std::max(0.0, std::round(-2.0 * z.real()));
  return lattice_distance(z, cplx(-0.5 * p, 0.0));
}

const PoleSet &ex1_poles()
{
  static const PoleSet ps = []
  {
    PoleSearchOptions o;
    o.window.re_min = -2.2;
    return find_poles(fixture("EX1"), build_basis(4, 32), o);
  }();
  return ps;
}
}  // namespace

TEST(LatticeReduction, IntoFundamentalStrip)
{
  EXPECT_EQ(reduce_to_strip(cplx(-0.5, 3.0)), cplx(-0.5, 0.0));
  EXPECT_NEAR(reduce_to_strip(cplx(1.0, -0.25)).imag(), 0.75, 1e-15);
  EXPECT_EQ(reduce_to_strip(cplx(0.0, 1.0 - 1e-14)), cplx(0.0, 0.0));
  EXPECT_NEAR(lattice_distance(cplx(0, 0.01), cplx(0, 0.99)), 0.02, 1e-14);
}

TEST(Solve, ConstantAndLinearExamples)
{
  DiscreteOperator op(fixture("EX1"), build_basis(2, 8));
  auto one = scalar(op.basis(), [](double, double) { return 1.0; });
  EXPECT_LE(max_abs(solve_resolvent(op, 1.0, one) - one), 1e-13);
  auto x = scalar(op.basis(), [](double, double x) { return x; });
  EXPECT_LE(max_abs(solve_resolvent(op, 1.0, x) - x * (1.0 / 1.5)), 1e-13);
  // A higher Fourier mode: D_z e^{ix0} = (i + z) e^{ix0}.
  auto e = scalar(op.basis(), [](double t, double) { return std::exp(I * t); });
  EXPECT_LE(max_abs(solve_resolvent(op, 1.0, e) - e * (1.0 / (1.0 + I))), 1e-13);
}

TEST(Solve, NearPoleCarriesNearestEigenvalue)
{
  DiscreteOperator op(fixture("EX1"), build_basis(2, 8));
  auto one = scalar(op.basis(), [](double, double) { return 1.0; });
  try
  {
    solve_resolvent(op, 0.0, one);
    FAIL() << "expected a near-pole error";
  }
  catch (const NearPoleError &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::near_pole);
    EXPECT_LE(std::abs(e.nearest_eigenvalue()), 1e-10);
    EXPECT_NE(std::string(e.what()).find("near-pole"), std::string::npos);
  }
  EXPECT_THROW(solve_resolvent(op, cplx(-0.5, 1.0), one), NearPoleError);
}

TEST(Poles, MicroInstanceExact)
{
  PoleSearchOptions o;
  o.window.re_min = -1.2;
  o.window.re_max = 1.0;
  auto ps = find_poles(fixture("EX1"), build_basis(0, 2), o);
  ASSERT_EQ(ps.poles.size(), 3u);
  const double expect[] = {0.0, -0.5, -1.0};
  for (int k = 0; k < 3; ++k)
  {
    EXPECT_LE(std::abs(ps.poles[k].lambda - expect[k]), 1e-12);
    EXPECT_EQ(ps.poles[k].order, 1);
    EXPECT_EQ(ps.poles[k].rank, 1);
  }
}

TEST(Poles, HalfLatticeForEX1)
{
  const auto &ps = ex1_poles();
  ASSERT_EQ(ps.poles.size(), 5u);
  for (int p = 0; p < 5; ++p)
  {
    EXPECT_LE(std::abs(ps.poles[p].lambda - cplx(-0.5 * p, 0.0)), 1e-6);
    EXPECT_EQ(ps.poles[p].order, 1);
    EXPECT_EQ(ps.poles[p].rank, 1);
  }
  ASSERT_EQ(ps.Lambda.size(), 1u);
  EXPECT_EQ(ps.z_star_star, 0.0);
  EXPECT_NEAR(ps.z_star_star_star, -0.5, 1e-6);
  EXPECT_FALSE(ps.band_edge);
}

TEST(Poles, ShiftedExampleHasTwoUnstablePoles)
{
  PoleSearchOptions o;
  o.window.re_min = -2.2;
  auto ps = find_poles(fixture("EX1S"), build_basis(4, 32), o);
  ASSERT_EQ(ps.Lambda.size(), 2u);
  EXPECT_NEAR(ps.Lambda[0].lambda.real(), 0.75, 1e-6);
  EXPECT_NEAR(ps.Lambda[1].lambda.real(), 0.25, 1e-6);
  EXPECT_NEAR(ps.z_star_star, 0.75, 1e-6);
  EXPECT_NEAR(ps.z_star_star_star, -0.25, 1e-6);
}

TEST(Poles, JordanBlockHasOrderTwo)
{
  PoleSearchOptions o;
  o.window.re_min = -1.2;
  auto ps = find_poles(fixture("SYN-JORDAN"), build_basis(2, 16), o);
  ASSERT_EQ(ps.poles.size(), 3u);
  for (auto &p : ps.poles)
  {
    EXPECT_EQ(p.order, 2);
    EXPECT_EQ(p.rank, 2);
    EXPECT_EQ(p.multiplicity, 2);
  }
}

TEST(Poles, NoPersistentEigenvaluesOffTheHalfLattice)
{
  for (double re_min : {-2.2, -3.2})
  {
    PoleSearchOptions o;
    o.window.re_min = re_min;
    o.compute_projections = false;
    auto ps = find_poles(fixture("EX1"), build_basis(4, 32), o);
    for (auto &p : ps.poles)
      EXPECT_LE(half_lattice_distance(p.lambda), 1e-4) << p.lambda;
  }
}

TEST(Poles, TransportWithoutDriftHasNoIsolatedPoles)
{
  // With A1 = 0 every x1-profile is an eigenfunction; the eigenvalue
  // multiplicity grows with M, so nothing survives the doubling filter.
  PoleSearchOptions o;
  o.compute_projections = false;
  auto ps = find_poles(fixture("CE-FLAT"), build_basis(2, 8), o);
  EXPECT_TRUE(ps.poles.empty());
  EXPECT_GT(ps.rejected, 0);
}

TEST(Poles, EveryPoleRecursAlongTheLattice)
{
  // z is a pole iff z + i is: D_{lambda + ik} is singular on interior modes.
  DiscreteOperator op(fixture("EX1"), build_basis(3, 16));
  for (auto &p : ex1_poles().poles)
    for (int k = -2; k <= 2; ++k)
    {
      auto a = op.assemble(p.lambda + I * static_cast<double>(k));
      // the block of mode q = -k carries the copy
      Eigen::JacobiSVD<CMatrix> svd(a.matrix.blocks[3 - k]);
      auto s = svd.singularValues();
      EXPECT_LE(s(s.size() - 1), 1e-9 * s(0)) << p.lambda << " k=" << k;
    }
}

TEST(Poles, RankSumMatchesFilteredCount)
{
  for (const char *name : {"EX1", "EX1S", "SYN-JORDAN"})
  {
    PoleSearchOptions o;
    o.window.re_min = -1.7;
    auto ps = find_poles(fixture(name), build_basis(2, 16), o);
    int ranks = 0, count = 0;
    for (auto &p : ps.poles)
    {
      ranks += p.rank;
      count += p.multiplicity;
    }
    EXPECT_EQ(ranks, count) << name;
    EXPECT_GT(count, 0);
  }
}

TEST(Poles, CsvAndJson)
{
  const auto &ps = ex1_poles();
  auto csv = ps.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "re,im,order,rank,residual");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  auto j = ps.to_json();
  EXPECT_EQ(j["poles"].size(), 5u);
  EXPECT_EQ(j["Lambda"].size(), 1u);
  EXPECT_DOUBLE_EQ(j["z_star_star"].get<double>(), 0.0);
  EXPECT_TRUE(j["window"]["re_max"].is_null());
}

class ProjectionFixture : public ::testing::Test
{
protected:
  DiscreteOperator op{fixture("EX1"), build_basis(4, 32)};
};

TEST_F(ProjectionFixture, SimplePoleAtZero)
{
  auto P0 = spectral_projection(op, {0.0, 0.2, 32}, 0);
  auto P1 = spectral_projection(op, {0.0, 0.2, 32}, 1);
  EXPECT_LE(max_abs(P1.matrix), 1e-9);
  EXPECT_LE(P0.doubling_change, 1e-9);
  auto PA = detail::multiply(P0.matrix, op.A0());
  EXPECT_EQ(numerical_rank(PA), 1);
  // The image is spanned by the constant function.
  std::mt19937_64 rng(8);
  auto f = random_band_limited(op.basis(), 1, rng, 3, 12);
  GridFunction v = f;
  v.data = PA.apply(f.data);
  ASSERT_GT(max_abs(v), 1e-6);
  auto c = scalar(op.basis(), [](double, double) { return 1.0; }) * v(0, 0, 0);
  EXPECT_LE(max_abs(v - c), 1e-9 * max_abs(v));
}

TEST_F(ProjectionFixture, AlgebraOnAllPoles)
{
  for (auto &p : ex1_poles().poles)
  {
    auto P = projections(op, {p.discrete, p.radius, 32}, 3);
    for (int k = 0; k <= 3; ++k)
      for (int l = 0; k + l <= 3; ++l)
        EXPECT_LE(projection_algebra_error(P, op.A0(), k, l), 1e-8) << p.lambda << " k=" << k << " l=" << l;
    EXPECT_LE(idempotence_error(P[0], op.A0()), 1e-8) << p.lambda;
  }
}

TEST_F(ProjectionFixture, IdentitiesAtRandomPairs)
{
  EXPECT_EQ(verify_resolvent_identities(op, 1.0, 1.0).resolvent_identity, 0.0);
  auto r = verify_resolvent_identities(op, 1.0, 2.0);
  EXPECT_TRUE(r.pass) << r.resolvent_identity << " " << r.conjugation;
  r = verify_resolvent_identities(op, 1.0, cplx(1.0, 1.0));
  EXPECT_TRUE(r.pass) << r.resolvent_identity << " " << r.conjugation;

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> re(0.3, 2.0), im(-3.0, 3.0);
  for (int t = 0; t < 10; ++t)
  {
    cplx w(re(rng), im(rng)), wp(re(rng), im(rng));
    auto rep = verify_resolvent_identities(op, w, wp);
    EXPECT_TRUE(rep.pass) << w << " " << wp << " " << rep.resolvent_identity << " " << rep.conjugation;
  }
  EXPECT_THROW(verify_resolvent_identities(op, -0.5, 1.0), NearPoleError);
}

TEST_F(ProjectionFixture, AlgebraErrorDetectsAWrongMoment)
{
  auto P = projections(op, {0.0, 0.2, 32}, 2);
  EXPECT_LE(projection_algebra_error(P, op.A0(), 0, 0), 1e-12);
  std::swap(P[0], P[1]);
  EXPECT_GT(projection_algebra_error(P, op.A0(), 1, 1), 1e-3);
}

TEST(Contours, TooCloseIsAnError)
{
  DiscreteOperator op(fixture("EX1"), build_basis(0, 8));
  // A circle through a pole cannot converge.
  EXPECT_THROW(spectral_projection(op, {-0.25, 0.25, 32}, 0), Error);
}

TEST(Bounds, ResolventBoundOnRandomFunctions)
{
  DiscreteOperator op(fixture("EX1"), build_basis(4, 16));
  std::mt19937_64 rng(3);
  auto rep = resolvent_bound_check(op, 100, rng, 3, 12, 0.6);
  EXPECT_EQ(rep.samples, 100);
  EXPECT_TRUE(rep.pass()) << rep.worst_ratio;
  EXPECT_LT(rep.worst_ratio, 1.0);

  auto s = fixture("EX1");
  s.sequence = WeightSequence::geometric(0.5);
  EXPECT_THROW(resolvent_bound_check(DiscreteOperator(s, build_basis(2, 8)), 1, rng), Error);
}

TEST(Bounds, ConstantFunctionRatio)
{
  // D_z 1 = z, so the ratio is 1 / (C |z|) with C the bound constant.
  auto s = fixture("EX1");
  DiscreteOperator op(s, build_basis(2, 8));
  auto k = stability_constants(s);
  auto one = scalar(op.basis(), [](double, double) { return 1.0; });
  const cplx z(k.z_star + 0.1, 0.0);
  auto lhs = triple_norm(one, 0, s, op.basis());
  auto rhs = triple_norm(op.assemble(z).apply(one), 1, s, op.basis());
  EXPECT_NEAR(rhs.value, std::abs(z) * lhs.value, 1e-12);
}

TEST(Compactness, WeightedSingularValuesDecay)
{
  DiscreteOperator op(fixture("EX1"), build_basis(4, 96));
  auto sv = weighted_resolvent_singular_values(op, 1.0);
  for (Eigen::Index k = 1; k < sv.size(); ++k)
    EXPECT_LE(sv(k), sv(k - 1));
  EXPECT_LT(sv(sv.size() - 1), 1e-3 * sv(0));
}
