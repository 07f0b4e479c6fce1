// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fourier (x0) x Chebyshev (x1) collocation for n = 1.
//
// Grid functions are stored mode-nodal: Fourier coefficient q in x0, values
// at the Chebyshev-Gauss-Lobatto nodes in x1. Flat index
//   ((q + Q) * (M + 1) + m) * N + c.
// In this layout D_z is block diagonal over q whenever the coefficients do
// not depend on x0, and multiplication by e^{i x0} is a shift of blocks.

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "operator_model.hpp"

namespace cylspec
{

class SpectralBasis
{
public:
  SpectralBasis(int Q_max, int M) : Q_(Q_max), M_(M)
  {
    if (Q_max < 0)
      throw Error(ErrorKind::invalid_argument, "Q_max must be nonnegative");
    if (M < 2)
      throw Error(ErrorKind::invalid_argument, "M must be at least 2");
    const int P = M + 1;
    x_.resize(P);
    for (int m = 0; m < P; ++m)
      x_[m] = std::cos(pi * m / M);
    // Exact symmetric values: cos(pi/2) etc.
    for (int m = 0; m < P; ++m)
    {
      if (2 * m == M)
        x_[m] = 0.0;
      else if (m > M / 2)
        x_[m] = -x_[M - m];
    }

    // Values <-> Chebyshev coefficients (DCT-I).
    to_values_.resize(P, P);
    to_coeffs_.resize(P, P);
    for (int m = 0; m < P; ++m)
      for (int k = 0; k < P; ++k)
        to_values_(m, k) = std::cos(pi * static_cast<double>((k * m) % (2 * M)) / M);
    for (int k = 0; k < P; ++k)
      for (int m = 0; m < P; ++m)
      {
        double ck = (k == 0 || k == M) ? 2.0 : 1.0;
        double cm = (m == 0 || m == M) ? 2.0 : 1.0;
        to_coeffs_(k, m) = 2.0 / (M * ck * cm) * to_values_(m, k);
      }

    // Exact integrals of T_j T_k, Clenshaw-Curtis weights, nodal Gram matrix.
    auto tint = [](int k) { return (k % 2) ? 0.0 : 2.0 / (1.0 - static_cast<double>(k) * k); };
    RMatrix gc(P, P);
    for (int j = 0; j < P; ++j)
      for (int k = 0; k < P; ++k)
        gc(j, k) = 0.5 * (tint(j + k) + tint(std::abs(j - k)));
    RVector ti(P);
    for (int k = 0; k < P; ++k)
      ti(k) = tint(k);
    weights_ = to_coeffs_.transpose() * ti;
    gram_ = to_coeffs_.transpose() * gc * to_coeffs_;
    gram_ = 0.5 * (gram_ + gram_.transpose()).eval();

    // Differentiation matrix (negative-sum diagonal).
    d1_ = RMatrix::Zero(P, P);
    for (int i = 0; i < P; ++i)
    {
      double ci = (i == 0 || i == M) ? 2.0 : 1.0;
      for (int j = 0; j < P; ++j)
      {
        if (i == j)
          continue;
        double cj = (j == 0 || j == M) ? 2.0 : 1.0;
        double sign = ((i + j) % 2) ? -1.0 : 1.0;
        d1_(i, j) = ci / cj * sign / (x_[i] - x_[j]);
      }
      d1_(i, i) = -d1_.row(i).sum();
    }

    times_.resize(2 * Q_ + 1);
    for (int j = 0; j < 2 * Q_ + 1; ++j)
      times_[j] = two_pi * j / (2 * Q_ + 1);
  }

  int Q_max() const { return Q_; }
  int M() const { return M_; }
  int n_modes() const { return 2 * Q_ + 1; }
  int n_nodes() const { return M_ + 1; }
  const std::vector<double> &nodes() const { return x_; }
  const std::vector<double> &times() const { return times_; }
  const RVector &weights() const { return weights_; }
  const RMatrix &gram() const { return gram_; }
  const RMatrix &d1() const { return d1_; }
  const RMatrix &to_values() const { return to_values_; }
  const RMatrix &to_coeffs() const { return to_coeffs_; }

  /// Smallest distance between neighbouring nodes.
  double min_spacing() const
  {
    double h = 2.0;
    for (int m = 0; m < M_; ++m)
      h = std::min(h, std::abs(x_[m] - x_[m + 1]));
    return h;
  }

  /// Barycentric interpolation weights at x for nodal values.
  RVector interpolation_row(double x) const
  {
    const int P = M_ + 1;
    RVector row = RVector::Zero(P);
    for (int m = 0; m < P; ++m)
      if (x == x_[m])
      {
        row(m) = 1.0;
        return row;
      }
    double denom = 0.0;
    for (int m = 0; m < P; ++m)
    {
      double w = ((m % 2) ? -1.0 : 1.0) * ((m == 0 || m == M_) ? 0.5 : 1.0);
      row(m) = w / (x - x_[m]);
      denom += row(m);
    }
    return row / denom;
  }

private:
  int Q_;
  int M_;
  std::vector<double> x_;
  std::vector<double> times_;
  RVector weights_;
  RMatrix gram_;
  RMatrix d1_;
  RMatrix to_values_;
  RMatrix to_coeffs_;
};

inline std::shared_ptr<const SpectralBasis> build_basis(int Q_max, int M)
{
  return std::make_shared<const SpectralBasis>(Q_max, M);
}

// ---------------------------------------------------------------- grid functions

struct GridFunction
{
  int Q = 0;
  int M = 0;
  int N = 1;
  CVector data;

  GridFunction() = default;
  GridFunction(int Q_, int M_, int N_) : Q(Q_), M(M_), N(N_), data(CVector::Zero(static_cast<Eigen::Index>(N_) * (2 * Q_ + 1) * (M_ + 1))) {}
  GridFunction(const SpectralBasis &b, int N_) : GridFunction(b.Q_max(), b.M(), N_) {}

  Eigen::Index index(int q, int m, int c) const
  {
    return (static_cast<Eigen::Index>(q + Q) * (M + 1) + m) * N + c;
  }
  cplx &operator()(int q, int m, int c = 0) { return data(index(q, m, c)); }
  cplx operator()(int q, int m, int c = 0) const { return data(index(q, m, c)); }

  /// Nodal values in x1 (length (M+1)N) of Fourier mode q.
  auto mode(int q) { return data.segment(index(q, 0, 0), static_cast<Eigen::Index>(M + 1) * N); }
  auto mode(int q) const { return data.segment(index(q, 0, 0), static_cast<Eigen::Index>(M + 1) * N); }

  GridFunction operator+(const GridFunction &o) const
  {
    GridFunction r = *this;
    r.data += o.data;
    return r;
  }
  GridFunction operator-(const GridFunction &o) const
  {
    GridFunction r = *this;
    r.data -= o.data;
    return r;
  }
  GridFunction operator*(cplx s) const
  {
    GridFunction r = *this;
    r.data *= s;
    return r;
  }

  /// Point value at (x0, x1), x1 anywhere in [-1, 1].
  CVector evaluate(const SpectralBasis &b, double x0, double x1) const
  {
    RVector row = b.interpolation_row(x1);
    CVector out = CVector::Zero(N);
    for (int q = -Q; q <= Q; ++q)
    {
      cplx e = std::exp(I * (static_cast<double>(q) * x0));
      for (int m = 0; m <= M; ++m)
        if (row(m) != 0.0)
          for (int c = 0; c < N; ++c)
            out(c) += e * row(m) * (*this)(q, m, c);
    }
    return out;
  }

  /// Values at the tensor grid (t_j, x_m): result(j, m*N + c).
  CMatrix physical(const SpectralBasis &b) const
  {
    const int J = 2 * Q + 1;
    CMatrix out = CMatrix::Zero(J, (M + 1) * N);
    for (int j = 0; j < J; ++j)
      for (int q = -Q; q <= Q; ++q)
        out.row(j) += std::exp(I * (static_cast<double>(q) * b.times()[j])) * mode(q).transpose();
    return out;
  }
};

/// Samples f(x0, x1) -> C^N on the tensor grid and converts to mode-nodal form.
inline GridFunction sample(const SpectralBasis &b, int N, const std::function<CVector(double, double)> &f)
{
  GridFunction g(b, N);
  const int J = b.n_modes();
  std::vector<std::vector<CVector>> vals(J, std::vector<CVector>(b.n_nodes()));
  for (int j = 0; j < J; ++j)
    for (int m = 0; m < b.n_nodes(); ++m)
      vals[j][m] = f(b.times()[j], b.nodes()[m]);
  const int Q = b.Q_max();
  for (int q = -Q; q <= Q; ++q)
    for (int j = 0; j < J; ++j)
    {
      cplx e = std::exp(-I * (static_cast<double>(q) * b.times()[j])) / static_cast<double>(J);
      for (int m = 0; m < b.n_nodes(); ++m)
        for (int c = 0; c < N; ++c)
          g(q, m, c) += e * vals[j][m](c);
    }
  return g;
}

/// Random band-limited function: modes |q| <= q_band, Chebyshev degree <= deg,
/// coefficients decaying like decay^(|q| + k).
inline GridFunction random_band_limited(const SpectralBasis &b, int N, std::mt19937_64 &rng, int q_band = -1,
                                        int deg = -1, double decay = 1.0)
{
  if (q_band < 0)
    q_band = b.Q_max();
  if (deg < 0)
    deg = b.M();
  std::normal_distribution<double> g(0.0, 1.0);
  GridFunction u(b, N);
  for (int q = -q_band; q <= q_band; ++q)
    for (int c = 0; c < N; ++c)
    {
      RVector re = RVector::Zero(b.n_nodes()), im = RVector::Zero(b.n_nodes());
      for (int k = 0; k <= deg; ++k)
      {
        double s = std::pow(decay, std::abs(q) + k);
        re(k) = s * g(rng);
        im(k) = s * g(rng);
      }
      RVector vr = b.to_values() * re, vi = b.to_values() * im;
      for (int m = 0; m < b.n_nodes(); ++m)
        u(q, m, c) = cplx(vr(m), vi(m));
    }
  return u;
}

/// <u, v> = integral over Omega of u^* v, exact for the interpolants.
inline cplx inner(const SpectralBasis &b, const GridFunction &u, const GridFunction &v)
{
  cplx s = 0.0;
  const RMatrix &G = b.gram();
  for (int q = -u.Q; q <= u.Q; ++q)
    for (int c = 0; c < u.N; ++c)
      for (int m = 0; m <= u.M; ++m)
      {
        cplx gv = 0.0;
        for (int k = 0; k <= u.M; ++k)
          gv += G(m, k) * v(q, k, c);
        s += std::conj(u(q, m, c)) * gv;
      }
  return two_pi * s;
}

/// ||u_q||^2 (including the 2 pi from x0) for every Fourier mode q.
inline std::vector<double> mode_energies(const SpectralBasis &b, const GridFunction &u)
{
  std::vector<double> e(2 * u.Q + 1, 0.0);
  const RMatrix &G = b.gram();
  for (int q = -u.Q; q <= u.Q; ++q)
    for (int c = 0; c < u.N; ++c)
    {
      CVector v(u.M + 1);
      for (int m = 0; m <= u.M; ++m)
        v(m) = u(q, m, c);
      e[q + u.Q] += two_pi * std::max(0.0, (v.adjoint() * (G * v))(0).real());
    }
  return e;
}

inline double l2_norm(const SpectralBasis &b, const GridFunction &u)
{
  return std::sqrt(std::max(0.0, inner(b, u, u).real()));
}

/// Multiplication by e^{s i x0}; modes pushed past the band are dropped.
inline GridFunction shift_modes(const GridFunction &u, int s)
{
  GridFunction r(u.Q, u.M, u.N);
  for (int q = -u.Q; q <= u.Q; ++q)
    if (q + s >= -u.Q && q + s <= u.Q)
      r.mode(q + s) = u.mode(q);
  return r;
}

// ---------------------------------------------------------------- derivatives

/// Chebyshev coefficients of the derivative (exact recurrence).
inline RVector chebyshev_derivative_coeffs(const RVector &a)
{
  const int P = static_cast<int>(a.size());
  const int M = P - 1;
  RVector d = RVector::Zero(P);
  if (M == 0)
    return d;
  d(M - 1) = 2.0 * M * a(M);
  for (int k = M - 2; k >= 0; --k)
    d(k) = (k + 2 <= M ? d(k + 2) : 0.0) + 2.0 * (k + 1) * a(k + 1);
  d(0) *= 0.5;
  return d;
}

inline void check_derivative_guard(const SpectralBasis &b, int order)
{
  const double amp = std::max<double>(std::max(1, b.Q_max()), static_cast<double>(b.M()) * b.M());
  if (order * std::log10(amp) > 150.0)
    throw Error(ErrorKind::guard, "derivative order " + std::to_string(order) +
                                      " exceeds the differentiation overflow guard");
}

/// d^alpha u with alpha = (a0, a1).
inline GridFunction apply_derivative(const GridFunction &u, const std::vector<int> &alpha, const SpectralBasis &b)
{
  if (alpha.size() != 2 || alpha[0] < 0 || alpha[1] < 0)
    throw Error(ErrorKind::invalid_argument, "alpha must be (a0, a1) with nonnegative entries");
  check_derivative_guard(b, alpha[0] + alpha[1]);
  GridFunction r = u;
  for (int q = -u.Q; q <= u.Q; ++q)
  {
    cplx f = std::pow(I * static_cast<double>(q), alpha[0]);
    if (alpha[0] == 0)
      f = 1.0;
    for (int c = 0; c < u.N; ++c)
    {
      CVector vals(u.M + 1);
      for (int m = 0; m <= u.M; ++m)
        vals(m) = u(q, m, c);
      RVector re = b.to_coeffs() * vals.real(), im = b.to_coeffs() * vals.imag();
      for (int t = 0; t < alpha[1]; ++t)
      {
        re = chebyshev_derivative_coeffs(re);
        im = chebyshev_derivative_coeffs(im);
      }
      RVector vr = b.to_values() * re, vi = b.to_values() * im;
      for (int m = 0; m <= u.M; ++m)
        r(q, m, c) = f * cplx(vr(m), vi(m));
    }
  }
  return r;
}

// ---------------------------------------------------------------- operators

/// Dense operator on mode-nodal vectors; block diagonal over Fourier modes
/// when `decoupled`, otherwise a single full matrix.
struct BlockOperator
{
  bool decoupled = true;
  int Q = 0;
  int block = 0;  // (M+1) N
  std::vector<CMatrix> blocks;  // index q + Q
  CMatrix full;

  Eigen::Index size() const { return static_cast<Eigen::Index>(2 * Q + 1) * block; }

  CMatrix dense() const
  {
    if (!decoupled)
      return full;
    CMatrix d = CMatrix::Zero(size(), size());
    for (int i = 0; i < 2 * Q + 1; ++i)
      d.block(i * block, i * block, block, block) = blocks[i];
    return d;
  }

  CVector apply(const CVector &v) const
  {
    if (!decoupled)
      return full * v;
    CVector r(v.size());
    for (int i = 0; i < 2 * Q + 1; ++i)
      r.segment(i * block, block) = blocks[i] * v.segment(i * block, block);
    return r;
  }

  BlockOperator scaled(cplx s) const
  {
    BlockOperator r = *this;
    if (decoupled)
      for (auto &b : r.blocks)
        b *= s;
    else
      r.full *= s;
    return r;
  }

  BlockOperator axpy(cplx s, const BlockOperator &o) const
  {
    BlockOperator r = *this;
    if (decoupled)
      for (std::size_t i = 0; i < blocks.size(); ++i)
        r.blocks[i] += s * o.blocks[i];
    else
      r.full += s * o.full;
    return r;
  }
};

struct ResolventAssembly
{
  cplx z;
  BlockOperator matrix;
  std::shared_ptr<const SpectralBasis> basis;
  bool mode_decoupled = true;
  int N = 1;
  BlockOperator A0;

  CMatrix dense() const { return matrix.dense(); }
  GridFunction apply(const GridFunction &u) const
  {
    GridFunction r = u;
    r.data = matrix.apply(u.data);
    return r;
  }
};

/// D and the A^0 multiplication operator on a basis; D_z = D + z A0.
class DiscreteOperator
{
public:
  DiscreteOperator(const OperatorSpec &spec, std::shared_ptr<const SpectralBasis> basis)
    : spec_(spec), basis_(std::move(basis))
  {
    if (spec.n != 1)
      throw Error(ErrorKind::unsupported, "grid engine supports n=1 only");
    const SpectralBasis &b = *basis_;
    int fdeg = 0;
    for (auto &a : spec.A)
      fdeg = std::max(fdeg, a.fourier_degree());
    fdeg = std::max(fdeg, spec.B.fourier_degree());
    if (2 * fdeg > b.Q_max())
      throw Error(ErrorKind::invalid_argument,
                  "coefficient x0-degree " + std::to_string(fdeg) + " exceeds Q_max/2; raise Q_max");
    check_outflow();
    decoupled_ = spec.x0_independent();
    const int N = spec.N;
    const int P = b.n_nodes();
    const int blk = P * N;
    const int Q = b.Q_max();

    // Spatial coefficient matrices per Fourier index k, as node-diagonal blocks.
    auto diag_of = [&](const MatrixPolynomial &p, int k)
    {
      MatrixPolynomial comp = p.fourier_component(k);
      CMatrix d = CMatrix::Zero(blk, blk);
      for (int m = 0; m < P; ++m)
        d.block(m * N, m * N, N, N) = comp.evaluate(0.0, {b.nodes()[m]});
      return d;
    };
    CMatrix kron_d1 = CMatrix::Zero(blk, blk);
    for (int m = 0; m < P; ++m)
      for (int k = 0; k < P; ++k)
        if (b.d1()(m, k) != 0.0)
          kron_d1.block(m * N, k * N, N, N) = b.d1()(m, k) * CMatrix::Identity(N, N);

    D_.decoupled = A0_.decoupled = decoupled_;
    D_.Q = A0_.Q = Q;
    D_.block = A0_.block = blk;
    if (decoupled_)
    {
      CMatrix a0 = diag_of(spec.A[0], 0), a1 = diag_of(spec.A[1], 0), bb = diag_of(spec.B, 0);
      CMatrix spatial = a1 * kron_d1 + bb;
      for (int q = -Q; q <= Q; ++q)
      {
        D_.blocks.push_back(spatial + (I * static_cast<double>(q)) * a0);
        A0_.blocks.push_back(a0);
      }
    }
    else
    {
      const Eigen::Index S = static_cast<Eigen::Index>(2 * Q + 1) * blk;
      D_.full = CMatrix::Zero(S, S);
      A0_.full = CMatrix::Zero(S, S);
      for (int k = -fdeg; k <= fdeg; ++k)
      {
        CMatrix a0 = diag_of(spec.A[0], k), a1 = diag_of(spec.A[1], k), bb = diag_of(spec.B, k);
        if (a0.cwiseAbs().maxCoeff() == 0 && a1.cwiseAbs().maxCoeff() == 0 && bb.cwiseAbs().maxCoeff() == 0)
          continue;
        CMatrix spatial = a1 * kron_d1 + bb;
        for (int q = -Q; q <= Q; ++q)
        {
          int qq = q + k;
          if (qq < -Q || qq > Q)
            continue;
          D_.full.block((qq + Q) * blk, (q + Q) * blk, blk, blk) +=
              spatial + (I * static_cast<double>(q)) * a0;
          A0_.full.block((qq + Q) * blk, (q + Q) * blk, blk, blk) += a0;
        }
      }
    }
  }

  const OperatorSpec &spec() const { return spec_; }
  const SpectralBasis &basis() const { return *basis_; }
  std::shared_ptr<const SpectralBasis> basis_ptr() const { return basis_; }
  bool decoupled() const { return decoupled_; }
  const BlockOperator &D() const { return D_; }
  const BlockOperator &A0() const { return A0_; }
  int N() const { return spec_.N; }

  ResolventAssembly assemble(cplx z) const
  {
    return {z, D_.axpy(z, A0_), basis_, decoupled_, spec_.N, A0_};
  }

  GridFunction apply_A0(const GridFunction &u) const
  {
    GridFunction r = u;
    r.data = A0_.apply(u.data);
    return r;
  }

private:
  void check_outflow() const
  {
    std::vector<double> ts{0.0};
    if (!spec_.x0_independent())
    {
      ts.clear();
      for (int j = 0; j < 64; ++j)
        ts.push_back(two_pi * j / 64);
    }
    for (double t : ts)
      for (double x : {-1.0, 1.0})
      {
        double e = min_hermitian_eigenvalue(x * spec_.A[1].evaluate(t, {x}));
        if (e < -tol_psd)
          throw Error(ErrorKind::invalid_argument,
                      "boundary at x1 = " + std::to_string(x) +
                          " is not outflow (min eig " + std::to_string(e) +
                          "); no boundary conditions can be imposed");
      }
  }

  OperatorSpec spec_;
  std::shared_ptr<const SpectralBasis> basis_;
  bool decoupled_ = true;
  BlockOperator D_;
  BlockOperator A0_;
};

inline ResolventAssembly assemble_Dz(const OperatorSpec &spec, std::shared_ptr<const SpectralBasis> basis, cplx z)
{
  return DiscreteOperator(spec, std::move(basis)).assemble(z);
}

/// Row-major CSV with "re,im" pairs per entry.
inline std::string matrix_csv(const CMatrix &m)
{
  std::ostringstream os;
  os << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
  {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      os << (c ? "," : "") << m(r, c).real() << "," << m(r, c).imag();
    os << "\n";
  }
  return os.str();
}

}  // namespace cylspec
