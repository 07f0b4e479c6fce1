// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "cylspec/oracle.hpp"
#include "cylspec/resolvent.hpp"

using namespace cylspec;

namespace
{
// Two-component transport A^1 = 0.5 x with a constant coupling matrix B.
OperatorSpec coupled(const CMatrix &b)
{
  auto s = fixture("SYN-JORDAN");
  s.B = MatrixPolynomial::constant(1, b);
  return s;
}

const EigenGroup *find(const std::vector<EigenGroup> &gs, int p, cplx z)
{
  for (auto &g : gs)
    if (g.p == p && std::abs(g.z - z) < 1e-12)
      return &g;
  return nullptr;
}
}  // namespace

TEST(Oracle, EX1LowDegrees)
{
  auto gs = poly_eigenpairs(fixture("EX1"), 0, 2);
  ASSERT_EQ(gs.size(), 3u);
  for (int p = 0; p <= 2; ++p)
  {
    EXPECT_EQ(gs[p].p, p);
    EXPECT_EQ(gs[p].z, cplx(-0.5 * p, 0.0));
    EXPECT_EQ(gs[p].dim, 1);
    EXPECT_TRUE(gs[p].exact);
    EXPECT_FALSE(gs[p].resonant);
    ASSERT_EQ(gs[p].pairs.size(), 1u);
    EXPECT_TRUE(gs[p].pairs[0].residual_zero);
    EXPECT_EQ(gs[p].pairs[0].z_exact, detail::CRational(Rational(-p, 2)));
  }
  // P = x^p exactly: the lower coefficients vanish since A^1 has no constant part.
  auto &P2 = gs[2].pairs[0].P_exact;
  EXPECT_TRUE(P2.at({1})[0].is_zero());
  EXPECT_TRUE(P2.at({0})[0].is_zero());
  EXPECT_FALSE(P2.at({2})[0].is_zero());
}

TEST(Oracle, FourierShiftIsExact)
{
  auto g = poly_eigenpairs(fixture("EX1"), 1, 0);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].z, cplx(0.0, -1.0));
  EXPECT_EQ(g[0].pairs[0].z_exact, detail::CRational(0, -1));

  auto s = fixture("CE-BDY");
  for (int q = -3; q <= 3; ++q)
  {
    auto base = poly_eigenpairs(s, 0, 4);
    auto gq = poly_eigenpairs(s, q, 4);
    ASSERT_EQ(base.size(), gq.size());
    for (std::size_t k = 0; k < base.size(); ++k)
      EXPECT_EQ(gq[k].pairs[0].z_exact, base[k].pairs[0].z_exact - detail::CRational(0, q));
  }
}

TEST(Oracle, BackSubstitutionWithDrift)
{
  // A^1 = 0.5(x + 1.5): the eigenfunction of degree p is (x + 1.5)^p.
  auto gs = poly_eigenpairs(fixture("CE-BDY"), 0, 3);
  ASSERT_EQ(gs.size(), 4u);
  auto &P = gs[3].pairs[0].P_exact;
  const detail::CRational lead = P.at({3})[0];
  // coefficients of (x + 3/2)^3 relative to the leading one: 1, 9/2, 27/4, 27/8
  EXPECT_EQ(P.at({2})[0] / lead, detail::CRational(Rational(9, 2)));
  EXPECT_EQ(P.at({1})[0] / lead, detail::CRational(Rational(27, 4)));
  EXPECT_EQ(P.at({0})[0] / lead, detail::CRational(Rational(27, 8)));
}

TEST(Oracle, EX2Multiplicities)
{
  auto gs = poly_eigenpairs(fixture("EX2"), 0, 2);
  ASSERT_EQ(gs.size(), 3u);
  const int dims[] = {2, 6, 12};
  for (int p = 0; p <= 2; ++p)
  {
    EXPECT_EQ(gs[p].dim, dims[p]);
    EXPECT_EQ(gs[p].z, cplx(-0.5 * p, 0.0));
    EXPECT_TRUE(gs[p].exact);
    for (auto &e : gs[p].pairs)
      EXPECT_TRUE(verify_eigenpair(fixture("EX2"), e).exact_zero);
  }
}

TEST(Oracle, MultiplicityFormulaForScalarTopBlocks)
{
  // N * C(p + n - 1, n - 1) whenever the top block is a multiple of A^0.
  for (const char *name : {"EX1", "EX1S", "CE-BDY", "EX2"})
  {
    auto s = fixture(name);
    for (auto &g : poly_eigenpairs(s, 0, 3))
      EXPECT_EQ(BigInt(g.dim), s.N * big_binomial(g.p + s.n - 1, s.n - 1)) << name << " p=" << g.p;
  }
}

TEST(Oracle, JordanCouplingHasOneEigenfunctionPerDegree)
{
  auto gs = poly_eigenpairs(fixture("SYN-JORDAN"), 0, 3);
  ASSERT_EQ(gs.size(), 4u);
  for (auto &g : gs)
  {
    EXPECT_EQ(g.dim, 1);
    EXPECT_TRUE(g.pairs[0].residual_zero);
  }
}

TEST(Oracle, VerifyEigenpairExamples)
{
  auto s = fixture("EX1");
  auto gs = poly_eigenpairs(s, 0, 1);
  auto r0 = verify_eigenpair(s, gs[0].pairs[0]);
  EXPECT_TRUE(r0.exact_zero);
  EXPECT_EQ(r0.max_abs, 0.0);
  auto r1 = verify_eigenpair(s, gs[1].pairs[0]);
  EXPECT_TRUE(r1.exact_zero);

  auto bad = gs[1].pairs[0];
  bad.z_exact.re += Rational(1, 1000);
  auto rb = verify_eigenpair(s, bad);
  EXPECT_FALSE(rb.exact_zero);
  EXPECT_GT(rb.max_abs, 0.0);

  // Hand-built P = x with z = -0.5.
  PolyEigenpair hand;
  hand.p = 1;
  hand.z_exact = detail::CRational(Rational(-1, 2));
  hand.P_exact[{1}] = {detail::CRational(1)};
  hand.P_exact[{0}] = {detail::CRational(0)};
  EXPECT_TRUE(verify_eigenpair(s, hand).exact_zero);
}

TEST(Oracle, ResonanceIsReported)
{
  // B = diag(0, 1/2): at p = 1 the shift s = -1/2 makes the degree-0 block singular.
  CMatrix b = CMatrix::Zero(2, 2);
  b(1, 1) = 0.5;
  auto gs = poly_eigenpairs(coupled(b), 0, 1);
  auto *g = find(gs, 1, cplx(-0.5, 0.0));
  ASSERT_NE(g, nullptr);
  EXPECT_TRUE(g->resonant);
  EXPECT_TRUE(g->pairs.empty());
  auto *ok = find(gs, 1, cplx(-1.0, 0.0));
  ASSERT_NE(ok, nullptr);
  EXPECT_FALSE(ok->resonant);
  EXPECT_NE(eigentable_csv(gs).find(",resonant"), std::string::npos);
}

TEST(Oracle, IrrationalEigenvaluesUseQuadPrecision)
{
  // B = [[0, 1], [1, 1]] has eigenvalues (1 +- sqrt 5) / 2.
  CMatrix b(2, 2);
  b << 0, 1, 1, 1;
  auto s = coupled(b);
  auto gs = poly_eigenpairs(s, 0, 2);
  ASSERT_EQ(gs.size(), 6u);
  const double phi = 0.5 * (1.0 + std::sqrt(5.0)), psi = 0.5 * (1.0 - std::sqrt(5.0));
  for (int p = 0; p <= 2; ++p)
  {
    EXPECT_NE(find(gs, p, cplx(-0.5 * p - phi, 0.0)), nullptr);
    EXPECT_NE(find(gs, p, cplx(-0.5 * p - psi, 0.0)), nullptr);
  }
  for (auto &g : gs)
  {
    EXPECT_FALSE(g.exact);
    ASSERT_EQ(g.pairs.size(), 1u);
    auto r = verify_eigenpair(s, g.pairs[0]);
    EXPECT_LE(r.max_abs, 1e-20);
    EXPECT_TRUE(g.pairs[0].residual_zero);
  }
}

TEST(Oracle, RejectsNonAffineCoefficients)
{
  auto s = fixture("EX1");
  s.A[1].add_term({0, {2}}, CMatrix::Constant(1, 1, 0.1));
  try
  {
    poly_eigenpairs(s, 0, 2);
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::non_affine);
  }
  auto f = fixture("EX1");
  f.B.add_term({1, {0}}, CMatrix::Constant(1, 1, 0.1));
  EXPECT_THROW(poly_eigenpairs(f, 0, 1), Error);
  auto xb = fixture("EX1");
  xb.B.add_term({0, {1}}, CMatrix::Constant(1, 1, 0.1));
  EXPECT_THROW(poly_eigenpairs(xb, 0, 1), Error);
}

TEST(Oracle, EigentableCsv)
{
  auto csv = eigentable_csv(eigentable(fixture("EX1"), 1, 1));
  EXPECT_EQ(csv, "q,p,re,im,dim\n"
                 "-1,0,0,1,1\n"
                 "-1,1,-0.5,1,1\n"
                 "0,0,0,0,1\n"
                 "0,1,-0.5,0,1\n"
                 "1,0,0,-1,1\n"
                 "1,1,-0.5,-1,1\n");
}

TEST(OracleVsGrid, EX1EigenvaluesAndMultiplicities)
{
  const int Q = 4;
  DiscreteOperator op(fixture("EX1"), build_basis(Q, 32));
  auto a = op.assemble(0.0);
  auto table = eigentable(fixture("EX1"), 3, 6);
  ASSERT_EQ(table.size(), 7u * 7u);
  for (int q = -3; q <= 3; ++q)
  {
    // pencil D v = -lambda A0 v on the Fourier block q
    const CMatrix &D = a.matrix.blocks[q + Q];
    const CMatrix &A0 = op.A0().blocks[q + Q];
    Eigen::ComplexEigenSolver<CMatrix> es(-A0.partialPivLu().solve(D), false);
    for (auto &g : table)
    {
      if (g.q != q)
        continue;
      int count = 0;
      double best = 1.0;
      for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
      {
        double d = std::abs(es.eigenvalues()(k) - g.z);
        best = std::min(best, d);
        if (d < 1e-8)
          ++count;
      }
      EXPECT_EQ(count, g.dim) << "q=" << q << " p=" << g.p << " nearest " << best;
    }
  }

  PoleSearchOptions o;
  o.window.re_min = -3.2;
  auto ps = find_poles(op, o);
  ASSERT_EQ(ps.poles.size(), 7u);
  for (auto &p : ps.poles)
  {
    auto *g = find(table, static_cast<int>(std::lround(-2.0 * p.lambda.real())), cplx(std::round(2.0 * p.lambda.real()) / 2.0, 0.0));
    ASSERT_NE(g, nullptr);
    EXPECT_LE(std::abs(p.lambda - g->z), 1e-8);
    EXPECT_EQ(p.multiplicity, g->dim);
  }
}
