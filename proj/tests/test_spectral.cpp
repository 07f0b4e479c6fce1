// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cylspec/spectral.hpp"

using namespace cylspec;

namespace
{
GridFunction scalar(const SpectralBasis &b, std::function<cplx(double, double)> f)
{
  return sample(b, 1, [&](double t, double x) { return CVector::Constant(1, f(t, x)); });
}

double max_abs(const GridFunction &u) { return u.data.cwiseAbs().maxCoeff(); }

OperatorSpec gauge_coupled(double eps)
{
  // EX1 with B = eps cos(x0): same lattice of exponents, x0-coupled matrix.
  auto s = fixture("EX1");
  MatrixPolynomial b(1, 1);
  b.add_term({1, {0}}, CMatrix::Constant(1, 1, 0.5 * eps));
  b.add_term({-1, {0}}, CMatrix::Constant(1, 1, 0.5 * eps));
  s.B = b;
  return s;
}
}  // namespace

TEST(Basis, MicroInstance)
{
  SpectralBasis b(0, 2);
  EXPECT_EQ(b.nodes(), (std::vector<double>{1.0, 0.0, -1.0}));
  RMatrix d(3, 3);
  d << 1.5, -2, 0.5, 0.5, 0, -0.5, -0.5, 2, -1.5;
  EXPECT_LE((b.d1() - d).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((b.d1() * RVector::Ones(3)).cwiseAbs().maxCoeff(), 1e-15);
  // p(x) = x^2 -> 2x
  RVector p(3), dp(3);
  p << 1, 0, 1;
  dp << 2, 0, -2;
  EXPECT_LE((b.d1() * p - dp).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Basis, DifferentiationAndQuadratureExactness)
{
  for (int M : {2, 4, 9, 16, 32})
  {
    SpectralBasis b(1, M);
    RVector x(M + 1);
    for (int m = 0; m <= M; ++m)
      x(m) = b.nodes()[m];
    EXPECT_LE((b.d1() * x - RVector::Ones(M + 1)).cwiseAbs().maxCoeff(), 1e-12 * M * M);
    EXPECT_LE((b.d1() * RVector::Ones(M + 1)).cwiseAbs().maxCoeff(), 1e-12);
    for (int k = 0; k <= M; ++k)
    {
      double exact = (k % 2) ? 0.0 : 2.0 / (k + 1);
      EXPECT_NEAR(b.weights().dot(x.array().pow(k).matrix()), exact, 1e-14) << M << " " << k;
    }
  }
  SpectralBasis b4(0, 4);
  RVector x2(5);
  for (int m = 0; m <= 4; ++m)
    x2(m) = b4.nodes()[m] * b4.nodes()[m];
  EXPECT_NEAR(b4.weights().dot(x2), 2.0 / 3.0, 1e-15);
}

TEST(Basis, GramIsExactForInterpolants)
{
  SpectralBasis b(0, 8);
  RVector x(9);
  for (int m = 0; m <= 8; ++m)
    x(m) = b.nodes()[m];
  RVector x8 = x.array().pow(8);  // integral of x^16 is 2/17
  EXPECT_NEAR(x8.dot(b.gram() * x8), 2.0 / 17.0, 1e-14);
}

TEST(Basis, RejectsBadSizes)
{
  EXPECT_THROW(SpectralBasis(0, 1), Error);
  EXPECT_THROW(SpectralBasis(-1, 4), Error);
}

TEST(GridFunctions, SampleEvaluateRoundTrip)
{
  auto b = build_basis(3, 10);
  auto u = scalar(*b, [](double t, double x) { return std::exp(I * (2.0 * t)) * x * x * x + std::cos(t) * x; });
  for (double t : {0.1, 1.7, 4.0})
    for (double x : {-1.0, -0.3, 0.55, 1.0})
    {
      cplx expect = std::exp(I * (2.0 * t)) * x * x * x + std::cos(t) * x;
      EXPECT_NEAR(std::abs(u.evaluate(*b, t, x)(0) - expect), 0.0, 1e-13);
    }
  auto phys = u.physical(*b);
  for (int j = 0; j < b->n_modes(); ++j)
    for (int m = 0; m <= b->M(); ++m)
    {
      double t = b->times()[j], x = b->nodes()[m];
      EXPECT_NEAR(std::abs(phys(j, m) - (std::exp(I * (2.0 * t)) * x * x * x + std::cos(t) * x)), 0.0, 1e-13);
    }
}

TEST(Derivatives, Examples)
{
  auto b = build_basis(2, 6);
  auto x2 = scalar(*b, [](double, double x) { return x * x; });
  auto d = apply_derivative(x2, {0, 1}, *b);
  auto expect = scalar(*b, [](double, double x) { return 2.0 * x; });
  EXPECT_LE(max_abs(d - expect), 1e-13);

  auto e = scalar(*b, [](double t, double) { return std::exp(I * t); });
  auto de = apply_derivative(e, {1, 0}, *b);
  EXPECT_LE(max_abs(de - e * I), 1e-14);

  auto ex = scalar(*b, [](double t, double x) { return std::exp(I * t) * x; });
  auto dex = apply_derivative(ex, {1, 1}, *b);
  EXPECT_LE(max_abs(dex - e * I), 1e-13);

  auto one = scalar(*b, [](double, double) { return 1.0; });
  EXPECT_LE(max_abs(apply_derivative(one, {0, 3}, *b)), 1e-12);
  EXPECT_THROW(apply_derivative(one, {0, 500}, *b), Error);
}

TEST(Assembly, MicroInstance)
{
  auto spec = fixture("EX1");
  auto a = assemble_Dz(spec, build_basis(0, 2), 1.0);
  CMatrix expect(3, 3);
  expect << 1.75, -1, 0.25, 0, 1, 0, 0.25, -1, 1.75;
  EXPECT_LE((a.dense() - expect).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(a.mode_decoupled);
}

TEST(Assembly, ShiftByZIsA0)
{
  auto spec = fixture("EX1");
  auto basis = build_basis(2, 8);
  DiscreteOperator op(spec, basis);
  CMatrix base = op.assemble(0.0).dense();
  for (cplx z : {cplx(1, 0), cplx(-0.3, 2.5), cplx(7, -1)})
  {
    CMatrix diff = op.assemble(z).dense() - base;
    CMatrix ref = z * CMatrix::Identity(diff.rows(), diff.cols());
    EXPECT_LE((diff - ref).cwiseAbs().maxCoeff(), 1e-14 * (1 + std::abs(z)) * base.cwiseAbs().maxCoeff());
  }
}

TEST(Assembly, RejectsUnsupportedOperators)
{
  auto basis = build_basis(2, 8);
  try
  {
    assemble_Dz(fixture("EX2"), basis, 1.0);
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(std::string(e.what()), "grid engine supports n=1 only");
    EXPECT_EQ(e.kind(), ErrorKind::unsupported);
  }
  EXPECT_THROW(assemble_Dz(fixture("CE-BDY"), basis, 1.0), Error);
  EXPECT_THROW(assemble_Dz(gauge_coupled(0.1), build_basis(1, 8), 1.0), Error);
}

TEST(Assembly, CoupledMatchesPointwiseApplication)
{
  // Apply the coupled matrix to a low-band polynomial and compare against the
  // operator applied analytically.
  const double eps = 0.2;
  auto spec = gauge_coupled(eps);
  auto basis = build_basis(4, 8);
  DiscreteOperator op(spec, basis);
  EXPECT_FALSE(op.decoupled());
  const cplx z(0.3, 0.1);
  auto u = scalar(*basis, [](double t, double x) { return std::exp(I * t) * x * x + 0.5 * x; });
  auto du = op.assemble(z).apply(u);
  auto expect = scalar(*basis,
                       [&](double t, double x)
                       {
                         cplx v = std::exp(I * t) * x * x + 0.5 * x;
                         cplx d0 = I * std::exp(I * t) * x * x;
                         cplx d1 = 2.0 * std::exp(I * t) * x + 0.5;
                         return d0 + 0.5 * x * d1 + (eps * std::cos(t) + z) * v;
                       });
  EXPECT_LE(max_abs(du - expect), 1e-12);
}

TEST(Assembly, ConjugationShiftOnInteriorBand)
{
  // assemble(z + i) = E^{-1} assemble(z) E with E = multiplication by e^{ix0}.
  for (auto spec : {fixture("EX1"), gauge_coupled(0.3)})
  {
    auto basis = build_basis(6, 10);
    DiscreteOperator op(spec, basis);
    const cplx z(0.4, 0.2);
    std::mt19937_64 rng(1);
    auto u = random_band_limited(*basis, 1, rng, 3, 10);
    auto lhs = op.assemble(z + I).apply(u);
    auto rhs = shift_modes(op.assemble(z).apply(shift_modes(u, 1)), -1);
    EXPECT_LE(max_abs(lhs - rhs), 1e-11 * max_abs(lhs));
  }
}

TEST(Assembly, CommutatorWithX1Derivative)
{
  // [d1, D_z] = 0.5 d1 for EX1 on polynomials of degree <= M - 2.
  auto spec = fixture("EX1");
  auto basis = build_basis(2, 12);
  DiscreteOperator op(spec, basis);
  auto Dz = op.assemble(cplx(0.9, 0.3));
  std::mt19937_64 rng(4);
  auto u = random_band_limited(*basis, 1, rng, 2, 10);
  auto lhs = apply_derivative(Dz.apply(u), {0, 1}, *basis) - Dz.apply(apply_derivative(u, {0, 1}, *basis));
  auto rhs = apply_derivative(u, {0, 1}, *basis) * 0.5;
  EXPECT_LE(max_abs(lhs - rhs), 1e-10 * max_abs(rhs));
}

TEST(Assembly, EnergyInequality)
{
  auto spec = fixture("EX1");
  auto k = stability_constants(spec);
  auto basis = build_basis(4, 16);
  DiscreteOperator op(spec, basis);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> im(-3.0, 3.0);
  for (int t = 0; t < 100; ++t)
  {
    const cplx z(k.z_star + 0.1, im(rng));
    const double Rz = k.R * (1.0 + std::abs(z.real()));
    auto u = random_band_limited(*basis, 1, rng);
    double uu = inner(*basis, u, u).real();
    double re = inner(*basis, u, op.assemble(z).apply(u)).real();
    EXPECT_LE(uu, re / Rz + 1e-8 * uu);
  }
}

TEST(Assembly, CsvExport)
{
  auto a = assemble_Dz(fixture("EX1"), build_basis(0, 2), 1.0);
  auto csv = matrix_csv(a.dense());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "1.75,0,-1,0,0.25,0");
}
