// SPDX-License-Identifier: Apache-2.0
#pragma once

// Polynomial eigenfunctions e^{iqx0} P(x) of x0-independent operators with
// affine A^j, constant A^0 and constant B. D maps homogeneous degree-d
// polynomials to degree d (x^k d_j part, B, A^0) plus degree d-1 (constant
// part of A^j), so eigenpairs come from the top-degree block followed by
// back-substitution through the lower degrees.
//
// Arithmetic is exact (complex rationals) whenever the eigenvalue is
// rational; otherwise quad precision with a 1e-20 residual threshold.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_complex.hpp>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "multi_index.hpp"
#include "operator_model.hpp"

namespace cylspec
{

namespace detail
{
struct CRational
{
  Rational re{0}, im{0};

  CRational() = default;
  CRational(Rational r, Rational i = 0) : re(std::move(r)), im(std::move(i)) {}
  CRational(int r) : re(r) {}

  static CRational from(cplx z) { return {Rational(z.real()), Rational(z.imag())}; }
  cplx to_cplx() const { return {re.convert_to<double>(), im.convert_to<double>()}; }
  bool is_zero() const { return re == 0 && im == 0; }

  friend CRational operator+(const CRational &a, const CRational &b) { return {a.re + b.re, a.im + b.im}; }
  friend CRational operator-(const CRational &a, const CRational &b) { return {a.re - b.re, a.im - b.im}; }
  friend CRational operator-(const CRational &a) { return {-a.re, -a.im}; }
  friend CRational operator*(const CRational &a, const CRational &b)
  {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }
  friend CRational operator/(const CRational &a, const CRational &b)
  {
    Rational d = b.re * b.re + b.im * b.im;
    return {(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
  }
  CRational &operator+=(const CRational &b) { return *this = *this + b; }
  CRational &operator-=(const CRational &b) { return *this = *this - b; }
  friend bool operator==(const CRational &a, const CRational &b) { return a.re == b.re && a.im == b.im; }
};

using QuadReal = boost::multiprecision::cpp_bin_float_quad;
using QuadComplex = boost::multiprecision::cpp_complex_quad;

template <class F>
struct FieldOps;

template <>
struct FieldOps<CRational>
{
  static CRational from(cplx z) { return CRational::from(z); }
  static cplx to_cplx(const CRational &x) { return x.to_cplx(); }
  static double mag(const CRational &x) { return std::abs(x.to_cplx()); }
  static bool zero(const CRational &x, double) { return x.is_zero(); }
};

template <>
struct FieldOps<QuadComplex>
{
  static QuadComplex from(cplx z) { return QuadComplex(QuadReal(z.real()), QuadReal(z.imag())); }
  static cplx to_cplx(const QuadComplex &x)
  {
    return {x.real().convert_to<double>(), x.imag().convert_to<double>()};
  }
  static double mag(const QuadComplex &x) { return abs(x).convert_to<double>(); }
  static bool zero(const QuadComplex &x, double tol) { return mag(x) <= tol; }
};

template <class F>
using FMat = std::vector<std::vector<F>>;
template <class F>
using FVec = std::vector<F>;

template <class F>
FMat<F> zeros(std::size_t r, std::size_t c)
{
  return FMat<F>(r, FVec<F>(c, F(0)));
}

/// Reduced row echelon form in place (largest-magnitude pivots). Entries at
/// or below tol count as zero. Returns the pivot column of each pivot row.
template <class F>
std::vector<std::size_t> rref(FMat<F> &A, std::size_t ncols, double tol)
{
  using O = FieldOps<F>;
  std::vector<std::size_t> piv;
  std::size_t row = 0;
  for (std::size_t col = 0; col < ncols && row < A.size(); ++col)
  {
    std::size_t best = row;
    double bm = -1.0;
    for (std::size_t r = row; r < A.size(); ++r)
      if (O::mag(A[r][col]) > bm)
      {
        bm = O::mag(A[r][col]);
        best = r;
      }
    if (O::zero(A[best][col], tol))
      continue;
    std::swap(A[row], A[best]);
    F inv = F(1) / A[row][col];
    for (auto &v : A[row])
      v = v * inv;
    for (std::size_t r = 0; r < A.size(); ++r)
    {
      if (r == row || O::zero(A[r][col], 0.0))
        continue;
      F f = A[r][col];
      for (std::size_t c = 0; c < A[r].size(); ++c)
        A[r][c] = A[r][c] - f * A[row][c];
    }
    piv.push_back(col);
    ++row;
  }
  return piv;
}

template <class F>
std::vector<FVec<F>> nullspace(FMat<F> A, double tol)
{
  const std::size_t n = A.empty() ? 0 : A[0].size();
  auto piv = rref(A, n, tol);
  std::vector<bool> is_piv(n, false);
  for (auto c : piv)
    is_piv[c] = true;
  std::vector<FVec<F>> basis;
  for (std::size_t f = 0; f < n; ++f)
  {
    if (is_piv[f])
      continue;
    FVec<F> v(n, F(0));
    v[f] = F(1);
    for (std::size_t r = 0; r < piv.size(); ++r)
      v[piv[r]] = -A[r][f];
    basis.push_back(std::move(v));
  }
  return basis;
}

/// Solves A x = b for square A; nullopt when A is singular.
template <class F>
std::optional<FVec<F>> solve_square(const FMat<F> &A, const FVec<F> &b, double tol)
{
  const std::size_t n = A.size();
  FMat<F> aug = A;
  for (std::size_t r = 0; r < n; ++r)
    aug[r].push_back(b[r]);
  auto piv = rref(aug, n, tol);
  if (piv.size() < n)
    return std::nullopt;
  FVec<F> x(n);
  for (std::size_t r = 0; r < n; ++r)
    x[r] = aug[r][n];
  return x;
}

template <class F>
FVec<F> mat_vec(const FMat<F> &A, const FVec<F> &x)
{
  FVec<F> y(A.size(), F(0));
  for (std::size_t r = 0; r < A.size(); ++r)
    for (std::size_t c = 0; c < x.size(); ++c)
      y[r] = y[r] + A[r][c] * x[c];
  return y;
}

/// Coefficient blocks of an affine operator split by their action on degree.
struct AffineParts
{
  int n = 0, N = 0;
  CMatrix A0, B;
  std::vector<CMatrix> lower;               // A^j constant part, j = 1..n
  std::vector<std::vector<CMatrix>> slope;  // A^j coefficient of x^k
};

inline AffineParts affine_parts(const OperatorSpec &s)
{
  AffineParts a;
  a.n = s.n;
  a.N = s.N;
  auto constant_only = [&](const MatrixPolynomial &m, const char *what)
  {
    CMatrix c = CMatrix::Zero(s.N, s.N);
    for (auto &[k, v] : m.terms())
    {
      if (k.fourier != 0 || k.degree() != 0)
        throw Error(ErrorKind::non_affine, std::string(what) + " must be constant for the polynomial oracle");
      c += v;
    }
    return c;
  };
  a.A0 = constant_only(s.A[0], "A0");
  a.B = constant_only(s.B, "B");
  for (int j = 1; j <= s.n; ++j)
  {
    CMatrix c0 = CMatrix::Zero(s.N, s.N);
    std::vector<CMatrix> sl(s.n, CMatrix::Zero(s.N, s.N));
    for (auto &[k, v] : s.A[j].terms())
    {
      if (k.fourier != 0)
        throw Error(ErrorKind::non_affine, "coefficients depend on x0");
      const int d = k.degree();
      if (d == 0)
        c0 += v;
      else if (d == 1)
        sl[std::find(k.powers.begin(), k.powers.end(), 1) - k.powers.begin()] += v;
      else
        throw Error(ErrorKind::non_affine, "A^" + std::to_string(j) + " has degree " + std::to_string(d));
    }
    a.lower.push_back(c0);
    a.slope.push_back(sl);
  }
  return a;
}

/// Homogeneous N-component polynomials of one degree, index mono * N + c.
struct DegreeSpace
{
  int degree = 0;
  std::vector<MultiIndex> monos;
  std::map<MultiIndex, int> pos;
  int N = 0;

  DegreeSpace(int n, int d, int N_) : degree(d), monos(enumerate_indices(n, d)), N(N_)
  {
    for (std::size_t i = 0; i < monos.size(); ++i)
      pos[monos[i]] = static_cast<int>(i);
  }
  std::size_t dim() const { return monos.size() * N; }
};

/// Degree-preserving part T_d = sum_jk A^j_k x^k d_j + B and the mass A^0,
/// as matrices on the degree-d space.
template <class F>
std::pair<FMat<F>, FMat<F>> top_blocks(const AffineParts &a, const DegreeSpace &S)
{
  using O = FieldOps<F>;
  auto T = zeros<F>(S.dim(), S.dim());
  auto M = zeros<F>(S.dim(), S.dim());
  for (std::size_t i = 0; i < S.monos.size(); ++i)
  {
    const auto &al = S.monos[i];
    for (int c = 0; c < a.N; ++c)
    {
      const std::size_t col = i * a.N + c;
      for (int r = 0; r < a.N; ++r)
      {
        T[i * a.N + r][col] += O::from(a.B(r, c));
        M[i * a.N + r][col] += O::from(a.A0(r, c));
      }
      for (int j = 0; j < a.n; ++j)
      {
        if (al[j] == 0)
          continue;
        for (int k = 0; k < a.n; ++k)
        {
          MultiIndex be = al;
          --be[j];
          ++be[k];
          const std::size_t bi = S.pos.at(be);
          for (int r = 0; r < a.N; ++r)
            T[bi * a.N + r][col] += F(al[j]) * O::from(a.slope[j][k](r, c));
        }
      }
    }
  }
  return {T, M};
}

/// Degree-lowering part sum_j A^j_0 d_j from degree d to degree d - 1.
template <class F>
FMat<F> lowering_block(const AffineParts &a, const DegreeSpace &from, const DegreeSpace &to)
{
  using O = FieldOps<F>;
  auto L = zeros<F>(to.dim(), from.dim());
  for (std::size_t i = 0; i < from.monos.size(); ++i)
    for (int j = 0; j < a.n; ++j)
    {
      const auto &al = from.monos[i];
      if (al[j] == 0)
        continue;
      MultiIndex be = al;
      --be[j];
      const std::size_t bi = to.pos.at(be);
      for (int c = 0; c < a.N; ++c)
        for (int r = 0; r < a.N; ++r)
          L[bi * a.N + r][i * a.N + c] += F(al[j]) * O::from(a.lower[j](r, c));
    }
  return L;
}

template <class F>
FMat<F> shifted(const FMat<F> &T, const FMat<F> &M, const F &s)
{
  FMat<F> r = T;
  for (std::size_t i = 0; i < T.size(); ++i)
    for (std::size_t j = 0; j < T.size(); ++j)
      r[i][j] = r[i][j] + s * M[i][j];
  return r;
}

template <class F>
double max_mag(const FMat<F> &A)
{
  double m = 0.0;
  for (auto &row : A)
    for (auto &v : row)
      m = std::max(m, FieldOps<F>::mag(v));
  return m;
}

inline std::optional<Rational> rationalize(double v, long long max_den = 1 << 20, double tol = 1e-9)
{
  // continued fraction convergents
  double x = v;
  BigInt h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  for (int it = 0; it < 64; ++it)
  {
    double a = std::floor(x);
    BigInt ai(static_cast<long long>(a));
    BigInt h2 = ai * h1 + h0, k2 = ai * k1 + k0;
    if (k2 > max_den)
      break;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    Rational r(h1, k1);
    if (std::abs(r.convert_to<double>() - v) <= tol)
      return r;
    double frac = x - a;
    if (frac < 1e-15)
      break;
    x = 1.0 / frac;
  }
  return std::nullopt;
}
}  // namespace detail

struct PolyEigenpair
{
  int q = 0;
  int p = 0;
  cplx z;  // eigenvalue -iq + s
  bool exact = true;
  std::map<MultiIndex, CVector> P;  // coefficients, all degrees <= p
  bool residual_zero = false;

  // Full-precision data used by verify_eigenpair.
  detail::CRational z_exact;
  std::map<MultiIndex, std::vector<detail::CRational>> P_exact;
  detail::QuadComplex z_quad;
  std::map<MultiIndex, std::vector<detail::QuadComplex>> P_quad;
};

/// All eigenfunctions of one (q, p) with a common eigenvalue.
struct EigenGroup
{
  int q = 0;
  int p = 0;
  cplx z;
  int dim = 0;  // top-degree eigenspace dimension
  bool exact = true;
  bool resonant = false;  // a lower-degree block was singular at z
  std::vector<PolyEigenpair> pairs;
};

struct ResidualPolynomial
{
  std::map<MultiIndex, CVector> coeffs;
  double max_abs = 0.0;
  bool exact_zero = false;
};

namespace detail
{
template <class F>
struct DegreeData
{
  std::vector<DegreeSpace> spaces;
  std::vector<FMat<F>> T, M, L;  // L[d] maps degree d to d - 1 (L[0] unused)
};

template <class F>
DegreeData<F> degree_data(const AffineParts &a, int p_max)
{
  DegreeData<F> dd;
  for (int d = 0; d <= p_max; ++d)
    dd.spaces.emplace_back(a.n, d, a.N);
  for (int d = 0; d <= p_max; ++d)
  {
    auto [T, M] = top_blocks<F>(a, dd.spaces[d]);
    dd.T.push_back(std::move(T));
    dd.M.push_back(std::move(M));
    dd.L.push_back(d == 0 ? FMat<F>{} : lowering_block<F>(a, dd.spaces[d], dd.spaces[d - 1]));
  }
  return dd;
}

// Back-substitutes from a top-degree null vector. Returns nullopt on resonance.
template <class F>
std::optional<std::vector<FVec<F>>> back_substitute(const DegreeData<F> &dd, int p, const F &s, const FVec<F> &top,
                                                    double tol)
{
  std::vector<FVec<F>> parts(p + 1);
  parts[p] = top;
  for (int d = p - 1; d >= 0; --d)
  {
    auto rhs = mat_vec(dd.L[d + 1], parts[d + 1]);
    for (auto &v : rhs)
      v = -v;
    auto x = solve_square(shifted(dd.T[d], dd.M[d], s), rhs, tol);
    if (!x)
      return std::nullopt;
    parts[d] = *x;
  }
  return parts;
}

template <class F>
std::map<MultiIndex, std::vector<F>> to_coeff_map(const DegreeData<F> &dd, const std::vector<FVec<F>> &parts, int N)
{
  std::map<MultiIndex, std::vector<F>> m;
  for (std::size_t d = 0; d < parts.size(); ++d)
    for (std::size_t i = 0; i < dd.spaces[d].monos.size(); ++i)
    {
      std::vector<F> c(N);
      for (int k = 0; k < N; ++k)
        c[k] = parts[d][i * N + k];
      m[dd.spaces[d].monos[i]] = c;
    }
  return m;
}

template <class F>
std::map<MultiIndex, CVector> to_double(const std::map<MultiIndex, std::vector<F>> &m)
{
  std::map<MultiIndex, CVector> r;
  for (auto &[k, v] : m)
  {
    CVector c(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      c(i) = FieldOps<F>::to_cplx(v[i]);
    r[k] = c;
  }
  return r;
}

// D_s applied to sum_d parts, by degree: (T_d + s M_d) P_d + L_{d+1} P_{d+1}.
template <class F>
ResidualPolynomial residual_of(const AffineParts &a, int p, const F &s,
                               const std::map<MultiIndex, std::vector<F>> &coeffs, double zero_tol)
{
  auto dd = degree_data<F>(a, p);
  std::vector<FVec<F>> parts(p + 1);
  for (int d = 0; d <= p; ++d)
  {
    parts[d].assign(dd.spaces[d].dim(), F(0));
    for (std::size_t i = 0; i < dd.spaces[d].monos.size(); ++i)
    {
      auto it = coeffs.find(dd.spaces[d].monos[i]);
      if (it != coeffs.end())
        for (int c = 0; c < a.N; ++c)
          parts[d][i * a.N + c] = it->second[c];
    }
  }
  ResidualPolynomial r;
  r.exact_zero = true;
  for (int d = 0; d <= p; ++d)
  {
    auto v = mat_vec(shifted(dd.T[d], dd.M[d], s), parts[d]);
    if (d < p)
    {
      auto w = mat_vec(dd.L[d + 1], parts[d + 1]);
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = v[i] + w[i];
    }
    for (std::size_t i = 0; i < dd.spaces[d].monos.size(); ++i)
    {
      CVector c(a.N);
      for (int k = 0; k < a.N; ++k)
      {
        const F &e = v[i * a.N + k];
        c(k) = FieldOps<F>::to_cplx(e);
        r.max_abs = std::max(r.max_abs, FieldOps<F>::mag(e));
        if (!FieldOps<F>::zero(e, zero_tol))
          r.exact_zero = false;
      }
      r.coeffs[dd.spaces[d].monos[i]] = c;
    }
  }
  return r;
}

// Shift values s (eigenvalue z = s - iq) of the degree-p top block, clustered,
// from a double-precision eigensolve.
inline std::vector<std::pair<cplx, int>> top_candidates(const AffineParts &a, int p)
{
  auto dd = degree_data<CRational>(a, p);
  const auto &T = dd.T[p];
  const auto &M = dd.M[p];
  const Eigen::Index n = static_cast<Eigen::Index>(T.size());
  CMatrix Td(n, n), Md(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
    {
      Td(i, j) = T[i][j].to_cplx();
      Md(i, j) = M[i][j].to_cplx();
    }
  CMatrix K = -Md.partialPivLu().solve(Td);
  Eigen::ComplexEigenSolver<CMatrix> es(K, false);
  std::vector<std::pair<cplx, int>> out;
  for (Eigen::Index k = 0; k < n; ++k)
  {
    cplx s = es.eigenvalues()(k);
    bool merged = false;
    for (auto &[c, m] : out)
      if (std::abs(c - s) < 1e-6)
      {
        c = (c * static_cast<double>(m) + s) / static_cast<double>(m + 1);
        ++m;
        merged = true;
        break;
      }
    if (!merged)
      out.push_back({s, 1});
  }
  std::sort(out.begin(), out.end(),
            [](auto &x, auto &y)
            { return x.first.real() != y.first.real() ? x.first.real() > y.first.real() : x.first.imag() < y.first.imag(); });
  return out;
}

// Newton on log det(T + sM) for a root of known multiplicity, quad precision.
inline QuadComplex refine_quad(const FMat<QuadComplex> &T, const FMat<QuadComplex> &M, cplx s0, int mult)
{
  using O = FieldOps<QuadComplex>;
  QuadComplex s = O::from(s0);
  const std::size_t n = T.size();
  for (int it = 0; it < 30; ++it)
  {
    // trace((T + sM)^{-1} M)
    auto A = shifted(T, M, s);
    for (std::size_t r = 0; r < n; ++r)
      A[r].insert(A[r].end(), M[r].begin(), M[r].end());
    auto piv = rref(A, n, 0.0);
    if (piv.size() < n)
      return s;  // exactly singular in quad
    QuadComplex tr(0);
    for (std::size_t r = 0; r < n; ++r)
      tr += A[r][n + r];
    QuadComplex step = QuadComplex(mult) / tr;
    s -= step;
    if (O::mag(step) < 1e-30 * std::max(1.0, O::mag(s)))
      break;
  }
  return s;
}

template <class F>
EigenGroup make_group(const AffineParts &a, const DegreeData<F> &dd, int q, int p, const F &s, double tol,
                      bool exact)
{
  using O = FieldOps<F>;
  EigenGroup g;
  g.q = q;
  g.p = p;
  g.exact = exact;
  const cplx sd = O::to_cplx(s);
  g.z = sd - I * static_cast<double>(q);
  auto null = nullspace(shifted(dd.T[p], dd.M[p], s), tol);
  g.dim = static_cast<int>(null.size());
  for (auto &v : null)
  {
    auto parts = back_substitute(dd, p, s, v, tol);
    if (!parts)
    {
      g.resonant = true;
      g.pairs.clear();
      return g;
    }
    PolyEigenpair e;
    e.q = q;
    e.p = p;
    e.z = g.z;
    e.exact = exact;
    auto coeffs = to_coeff_map(dd, *parts, a.N);
    e.P = to_double(coeffs);
    if constexpr (std::is_same_v<F, CRational>)
    {
      e.z_exact = s - CRational(0, q);
      e.P_exact = coeffs;
      e.residual_zero = residual_of(a, p, s, coeffs, 0.0).exact_zero;
    }
    else
    {
      e.z_quad = s - QuadComplex(QuadReal(0), QuadReal(q));
      e.P_quad = coeffs;
      double scale = 0.0;
      for (auto &[k, c] : coeffs)
        for (auto &x : c)
          scale = std::max(scale, O::mag(x));
      auto r = residual_of(a, p, s, coeffs, 0.0);
      e.residual_zero = r.max_abs <= 1e-20 * std::max(1.0, scale);
      if (!e.residual_zero)
        throw Error(ErrorKind::convergence, "quad-precision eigenpair residual above 1e-20");
    }
    g.pairs.push_back(std::move(e));
  }
  return g;
}
}  // namespace detail

/// Eigenfunctions e^{iqx0} P with deg P = p <= p_max, grouped by (p, z).
inline std::vector<EigenGroup> poly_eigenpairs(const OperatorSpec &spec, int q, int p_max)
{
  if (p_max < 0)
    throw Error(ErrorKind::invalid_argument, "p_max must be nonnegative");
  auto a = detail::affine_parts(spec);
  auto exact = detail::degree_data<detail::CRational>(a, p_max);
  std::optional<detail::DegreeData<detail::QuadComplex>> quad;
  std::vector<EigenGroup> out;
  for (int p = 0; p <= p_max; ++p)
    for (auto [s, mult] : detail::top_candidates(a, p))
    {
      auto re = detail::rationalize(s.real()), im = detail::rationalize(s.imag());
      if (re && im)
      {
        detail::CRational se(*re, *im);
        if (!detail::nullspace(detail::shifted(exact.T[p], exact.M[p], se), 0.0).empty())
        {
          out.push_back(detail::make_group(a, exact, q, p, se, 0.0, true));
          continue;
        }
      }
      if (!quad)
        quad = detail::degree_data<detail::QuadComplex>(a, p_max);
      auto sq = detail::refine_quad(quad->T[p], quad->M[p], s, mult);
      double tol = 1e-24 * std::max(1.0, detail::max_mag(quad->T[p]) + detail::max_mag(quad->M[p]));
      auto g = detail::make_group(a, *quad, q, p, sq, tol, false);
      if (g.dim == 0)
        throw Error(ErrorKind::convergence, "quad refinement found no null vector");
      out.push_back(std::move(g));
    }
  return out;
}

/// Groups for every q in [-q_max, q_max].
inline std::vector<EigenGroup> eigentable(const OperatorSpec &spec, int q_max, int p_max)
{
  std::vector<EigenGroup> out;
  for (int q = -q_max; q <= q_max; ++q)
  {
    auto g = poly_eigenpairs(spec, q, p_max);
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

inline std::string eigentable_csv(const std::vector<EigenGroup> &groups)
{
  std::ostringstream os;
  os << std::setprecision(17) << "q,p,re,im,dim\n";
  for (auto &g : groups)
  {
    os << g.q << "," << g.p << "," << g.z.real() << "," << g.z.imag() << ",";
    if (g.resonant)
      os << "resonant";
    else
      os << g.dim;
    os << "\n";
  }
  return os.str();
}

/// D_z applied to e^{iqx0} P, as a polynomial (the e^{iqx0} factor dropped).
inline ResidualPolynomial verify_eigenpair(const OperatorSpec &spec, const PolyEigenpair &e)
{
  auto a = detail::affine_parts(spec);
  if (e.exact)
  {
    detail::CRational s = e.z_exact + detail::CRational(0, e.q);
    return detail::residual_of(a, e.p, s, e.P_exact, 0.0);
  }
  detail::QuadComplex s = e.z_quad + detail::QuadComplex(detail::QuadReal(0), detail::QuadReal(e.q));
  return detail::residual_of(a, e.p, s, e.P_quad, 1e-20);
}

}  // namespace cylspec
