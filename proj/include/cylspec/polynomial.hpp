// SPDX-License-Identifier: Apache-2.0
#pragma once

// Matrix-valued polynomials on the cylinder. A term is
//   C * e^{i k x0} * (x1)^{p1} ... (xn)^{pn}
// with C an N x N complex matrix. x0-dependence enters only through the
// Fourier index k so every coefficient stays 2*pi-periodic in x0.

#include <cmath>
#include <map>
#include <vector>

#include "core.hpp"

namespace cylspec
{

struct MonomialKey
{
  int fourier = 0;
  std::vector<int> powers;  // spatial exponents, size n

  auto operator<=>(const MonomialKey &) const = default;

  int degree() const
  {
    int d = 0;
    for (int p : powers)
      d += p;
    return d;
  }
};

class MatrixPolynomial
{
public:
  MatrixPolynomial() = default;
  MatrixPolynomial(int n, int N) : n_(n), N_(N) {}

  static MatrixPolynomial constant(int n, const CMatrix &c)
  {
    MatrixPolynomial p(n, static_cast<int>(c.rows()));
    p.add_term({0, std::vector<int>(n, 0)}, c);
    return p;
  }

  int n() const { return n_; }
  int n_vars() const { return n_ + 1; }
  int size() const { return N_; }
  const std::map<MonomialKey, CMatrix> &terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  void add_term(const MonomialKey &key, const CMatrix &c)
  {
    if (static_cast<int>(key.powers.size()) != n_)
      throw Error(ErrorKind::schema, "monomial has wrong number of spatial exponents");
    if (c.rows() != N_ || c.cols() != N_)
      throw Error(ErrorKind::schema, "coefficient matrix must be " + std::to_string(N_) + "x" +
                                         std::to_string(N_));
    for (int p : key.powers)
      if (p < 0)
        throw Error(ErrorKind::schema, "negative exponent");
    auto it = terms_.find(key);
    if (it == terms_.end())
      terms_.emplace(key, c);
    else
      it->second += c;
    prune();
  }

  CMatrix evaluate(double x0, const std::vector<double> &x) const
  {
    CMatrix out = CMatrix::Zero(N_, N_);
    for (const auto &[key, c] : terms_)
    {
      cplx f = key.fourier == 0 ? cplx(1.0) : std::exp(I * (static_cast<double>(key.fourier) * x0));
      double m = 1.0;
      for (int j = 0; j < n_; ++j)
        m *= std::pow(x[j], key.powers[j]);
      out += (f * m) * c;
    }
    return out;
  }

  /// Derivative in variable var (0 = x0, j >= 1 = x^j).
  MatrixPolynomial derivative(int var) const
  {
    MatrixPolynomial d(n_, N_);
    for (const auto &[key, c] : terms_)
    {
      if (var == 0)
      {
        if (key.fourier != 0)
          d.add_term(key, (I * static_cast<double>(key.fourier)) * c);
      }
      else
      {
        int p = key.powers[var - 1];
        if (p == 0)
          continue;
        MonomialKey k2 = key;
        k2.powers[var - 1] = p - 1;
        d.add_term(k2, static_cast<double>(p) * c);
      }
    }
    return d;
  }

  MatrixPolynomial derivative(const std::vector<int> &alpha) const
  {
    MatrixPolynomial d = *this;
    for (int v = 0; v < static_cast<int>(alpha.size()); ++v)
      for (int r = 0; r < alpha[v]; ++r)
        d = d.derivative(v);
    return d;
  }

  /// Pointwise conjugate transpose.
  MatrixPolynomial adjoint() const
  {
    MatrixPolynomial a(n_, N_);
    for (const auto &[key, c] : terms_)
    {
      MonomialKey k2 = key;
      k2.fourier = -key.fourier;
      a.add_term(k2, c.adjoint());
    }
    return a;
  }

  MatrixPolynomial operator+(const MatrixPolynomial &o) const
  {
    MatrixPolynomial r = *this;
    for (const auto &[key, c] : o.terms_)
      r.add_term(key, c);
    return r;
  }

  MatrixPolynomial operator*(cplx s) const
  {
    MatrixPolynomial r(n_, N_);
    for (const auto &[key, c] : terms_)
      r.add_term(key, s * c);
    return r;
  }

  /// Matrix product of two polynomials.
  MatrixPolynomial operator*(const MatrixPolynomial &o) const
  {
    MatrixPolynomial r(n_, N_);
    for (const auto &[ka, ca] : terms_)
      for (const auto &[kb, cb] : o.terms_)
      {
        MonomialKey k{ka.fourier + kb.fourier, ka.powers};
        for (int j = 0; j < n_; ++j)
          k.powers[j] += kb.powers[j];
        r.add_term(k, ca * cb);
      }
    return r;
  }

  bool x0_independent() const
  {
    for (const auto &[key, c] : terms_)
      if (key.fourier != 0)
        return false;
    return true;
  }

  int spatial_degree() const
  {
    int d = 0;
    for (const auto &[key, c] : terms_)
      d = std::max(d, key.degree());
    return d;
  }

  int fourier_degree() const
  {
    int d = 0;
    for (const auto &[key, c] : terms_)
      d = std::max(d, std::abs(key.fourier));
    return d;
  }

  /// Every coefficient matrix is Hermitian and every term is x0-free or
  /// paired with its conjugate, i.e. the polynomial equals its adjoint.
  bool hermitian(double tol = 0.0) const
  {
    MatrixPolynomial diff = *this + adjoint() * cplx(-1.0);
    for (const auto &[key, c] : diff.terms_)
      if (c.cwiseAbs().maxCoeff() > tol)
        return false;
    return true;
  }

  /// Spatial polynomial multiplying e^{i k x0}.
  MatrixPolynomial fourier_component(int k) const
  {
    MatrixPolynomial r(n_, N_);
    for (const auto &[key, c] : terms_)
      if (key.fourier == k)
        r.add_term({0, key.powers}, c);
    return r;
  }

private:
  void prune()
  {
    for (auto it = terms_.begin(); it != terms_.end();)
    {
      if (it->second.cwiseAbs().maxCoeff() == 0.0)
        it = terms_.erase(it);
      else
        ++it;
    }
  }

  int n_ = 0;
  int N_ = 0;
  std::map<MonomialKey, CMatrix> terms_;
};

}  // namespace cylspec
