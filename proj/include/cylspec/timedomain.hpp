// SPDX-License-Identifier: Apache-2.0
#pragma once

// Method-of-lines evolution on the universal cover (n = 1): classical RK4 on
//   d0 u = -(A0)^{-1} (A1 d1 u + (B + z A0) u - f)
// with Chebyshev collocation in x1 and no boundary closure (outflow).

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "spectral.hpp"

namespace cylspec
{

/// Slices u(t_k, x_m) on t_k = t0 + k dt; slice layout m * N + c.
struct FieldOnCover
{
  std::shared_ptr<const SpectralBasis> basis;
  int N = 1;
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<CVector> slices;

  int nodes() const { return basis->n_nodes(); }
  std::size_t size() const { return slices.size(); }
  double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
  double t_end() const { return time(slices.empty() ? 0 : slices.size() - 1); }

  /// Index of the slice nearest to t (clamped).
  std::size_t index_of(double t) const
  {
    double k = std::round((t - t0) / dt);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(slices.size() - 1)));
  }

  /// L2 norm of slice k over [-1, 1] (exact for the interpolant).
  double slice_norm(std::size_t k) const
  {
    const RMatrix &G = basis->gram();
    const int P = nodes();
    double s = 0.0;
    for (int c = 0; c < N; ++c)
    {
      CVector v(P);
      for (int m = 0; m < P; ++m)
        v(m) = slices[k](m * N + c);
      s += (v.adjoint() * G.cast<cplx>() * v)(0).real();
    }
    return std::sqrt(std::max(0.0, s));
  }

  double sup_norm(std::size_t k) const { return slices[k].cwiseAbs().maxCoeff(); }
};

/// Right-hand side slice f(t) (size (M+1) N); empty function means f = 0.
using SliceForcing = std::function<CVector(double)>;

struct EvolveOptions
{
  double dt = 0.0;             // 0 selects the stability bound
  int steps_per_period_multiple = 1;  // steps per 2pi are a multiple of this
  bool enforce_cfl = true;             // false only to exercise the instability detector
};

namespace detail
{
struct SliceOperator
{
  CMatrix L;       // -(A0)^{-1} (A1 d1 + B + z A0)
  CMatrix A0inv;   // block diagonal (A0)^{-1}
  double transport = 0.0;  // max spectral radius of (A0)^{-1} A1
  double reaction = 0.0;   // max norm of (A0)^{-1} (B + z A0)
};

inline SliceOperator slice_operator(const OperatorSpec &s, const SpectralBasis &b, cplx z, double t)
{
  if (s.n != 1)
    throw Error(ErrorKind::unsupported, "grid engine supports n=1 only");
  const int P = b.n_nodes(), N = s.N;
  SliceOperator op;
  op.L = CMatrix::Zero(P * N, P * N);
  op.A0inv = CMatrix::Zero(P * N, P * N);
  const RMatrix &D = b.d1();
  for (int m = 0; m < P; ++m)
  {
    auto c = eval_coefficients(s, t, {b.nodes()[m]});
    CMatrix inv = c.A[0].inverse();
    CMatrix T = inv * c.A[1];
    CMatrix R = inv * (c.B + z * c.A[0]);
    Eigen::ComplexEigenSolver<CMatrix> es(T, false);
    op.transport = std::max(op.transport, es.eigenvalues().cwiseAbs().maxCoeff());
    op.reaction = std::max(op.reaction, R.operatorNorm());
    op.A0inv.block(m * N, m * N, N, N) = inv;
    op.L.block(m * N, m * N, N, N) -= R;
    for (int k = 0; k < P; ++k)
      if (D(m, k) != 0.0)
        op.L.block(m * N, k * N, N, N) -= D(m, k) * T;
  }
  return op;
}

inline bool time_dependent(const OperatorSpec &s)
{
  for (auto &a : s.A)
    if (!a.x0_independent())
      return true;
  return !s.B.x0_independent();
}
}  // namespace detail

/// Largest stable step: 0.25 h_min / max rho((A0)^{-1} A1), capped by
/// 0.25 / (max ||(A0)^{-1}(B + z A0)|| + 1). Coefficients are sampled over one period.
inline double stable_step(const OperatorSpec &s, const SpectralBasis &b, cplx z)
{
  double transport = 0.0, reaction = 0.0;
  const int samples = detail::time_dependent(s) ? 16 : 1;
  for (int j = 0; j < samples; ++j)
  {
    auto op = detail::slice_operator(s, b, z, two_pi * j / samples);
    transport = std::max(transport, op.transport);
    reaction = std::max(reaction, op.reaction);
  }
  double dt = 0.25 / (reaction + 1.0);
  if (transport > 0.0)
    dt = std::min(dt, 0.25 * b.min_spacing() / transport);
  return dt;
}

/// RK4 from u(a) = init (zero if empty) to t >= b. The step divides 2pi into
/// an integer number of steps, a multiple of opts.steps_per_period_multiple.
inline FieldOnCover evolve(const OperatorSpec &s, std::shared_ptr<const SpectralBasis> basis, const CVector &init,
                           const SliceForcing &f, cplx z, double a, double b, const EvolveOptions &opts = {})
{
  if (!(b >= a))
    throw Error(ErrorKind::invalid_argument, "time range must satisfy a <= b");
  const SpectralBasis &B = *basis;
  const int P = B.n_nodes(), N = s.N;
  const double bound = stable_step(s, B, z);
  if (opts.enforce_cfl && opts.dt > 0.0 && opts.dt > bound * (1.0 + 1e-12))
    throw Error(ErrorKind::cfl, "time step " + std::to_string(opts.dt) + " exceeds the stability bound " +
                                    std::to_string(bound));
  const double target = opts.dt > 0.0 ? opts.dt : bound;
  const int mult = std::max(1, opts.steps_per_period_multiple);
  const long per = mult * static_cast<long>(std::ceil(two_pi / (target * mult) - 1e-12));
  const double dt = opts.dt > 0.0 ? opts.dt : two_pi / static_cast<double>(per);
  const long steps = static_cast<long>(std::ceil((b - a) / dt - 1e-9));

  FieldOnCover out;
  out.basis = basis;
  out.N = N;
  out.t0 = a;
  out.dt = dt;
  out.slices.reserve(steps + 1);
  CVector u = init.size() ? init : CVector::Zero(P * N);
  if (u.size() != P * N)
    throw Error(ErrorKind::invalid_argument, "initial slice has the wrong size");
  out.slices.push_back(u);

  const bool tdep = detail::time_dependent(s);
  auto fixed = detail::slice_operator(s, B, z, a);
  // ||coefficients||: transport speed plus reaction norm
  const double coeff = fixed.transport + fixed.reaction + 0.1;
  auto rhs = [&](double t, const CVector &v) -> CVector
  {
    const auto &op = tdep ? detail::slice_operator(s, B, z, t) : fixed;
    CVector r = op.L * v;
    if (f)
      r += op.A0inv * f(t);
    return r;
  };

  double scale = u.norm();
  double forcing_total = 0.0;
  const double a0inv_norm = f ? fixed.A0inv.operatorNorm() : 0.0;
  for (long k = 0; k < steps; ++k)
  {
    const double t = a + static_cast<double>(k) * dt;
    CVector k1 = rhs(t, u);
    CVector k2 = rhs(t + 0.5 * dt, u + 0.5 * dt * k1);
    CVector k3 = rhs(t + 0.5 * dt, u + 0.5 * dt * k2);
    CVector k4 = rhs(t + dt, u + dt * k3);
    u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (f)
      forcing_total += dt * a0inv_norm * std::max({f(t).norm(), f(t + 0.5 * dt).norm(), f(t + dt).norm()});
    const double elapsed = t + dt - a;
    const double limit = (scale + forcing_total + 1e-300) * std::exp(std::min(700.0, 10.0 * elapsed * coeff));
    if (!u.allFinite() || u.norm() > limit)
      throw Error(ErrorKind::instability, "norm growth exceeds the instability threshold at x0 = " +
                                              std::to_string(t + dt));
    out.slices.push_back(u);
  }
  return out;
}

/// Homogeneous evolution of D_z u = 0 from init.
inline FieldOnCover evolve(const OperatorSpec &s, std::shared_ptr<const SpectralBasis> basis, const CVector &init,
                           cplx z, double a, double b, const EvolveOptions &opts = {})
{
  return evolve(s, std::move(basis), init, SliceForcing{}, z, a, b, opts);
}

/// Sup over interior nodes of |A0 d0 u + A1 d1 u + (B + z A0) u - f| at the
/// slices k in [2, size - 3], with d0 from a five-point central difference.
inline double pde_residual(const OperatorSpec &s, const FieldOnCover &u, const SliceForcing &f, cplx z)
{
  const SpectralBasis &B = *u.basis;
  const int P = B.n_nodes(), N = u.N;
  double worst = 0.0;
  const bool tdep = detail::time_dependent(s);
  auto fixed = detail::slice_operator(s, B, z, u.t0);
  for (std::size_t k = 2; k + 2 < u.size(); ++k)
  {
    const double t = u.time(k);
    CVector d0 = (u.slices[k - 2] - 8.0 * u.slices[k - 1] + 8.0 * u.slices[k + 1] - u.slices[k + 2]) / (12.0 * u.dt);
    auto op = tdep ? detail::slice_operator(s, B, z, t) : fixed;
    CVector r = d0 - op.L * u.slices[k];
    if (f)
      r -= op.A0inv * f(t);
    // back to the un-normalized form: multiply by A0 per node
    for (int m = 1; m + 1 < P; ++m)
    {
      CMatrix a0 = op.A0inv.block(m * N, m * N, N, N).inverse();
      worst = std::max(worst, (a0 * r.segment(m * N, N)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

// ---------------------------------------------------------------- energies

struct EnergySeries
{
  int ell = 0;
  std::vector<double> times;
  std::vector<double> values;
};

namespace detail
{
// Finite-difference weights for the derivative of order `order` at x0 from
// nodes xs (Fornberg's recursion).
inline std::vector<double> fd_weights(double x0, const std::vector<double> &xs, int order)
{
  const int n = static_cast<int>(xs.size()) - 1;
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(order + 1, 0.0));
  double c1 = 1.0, c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i)
  {
    const int mn = std::min(i, order);
    double c2 = 1.0, c5 = c4;
    c4 = xs[i] - x0;
    for (int j = 0; j < i; ++j)
    {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1)
      {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i)
    w[i] = c[i][order];
  return w;
}

// d0^a of the slice sequence at index k, stencil of a + 4 nodes kept inside the range.
inline CVector time_derivative(const FieldOnCover &u, std::size_t k, int a)
{
  if (a == 0)
    return u.slices[k];
  const int width = a + 4;
  if (static_cast<int>(u.size()) < width + 1)
    throw Error(ErrorKind::invalid_argument, "too few slices for a time derivative");
  long start = static_cast<long>(k) - width / 2;
  start = std::clamp(start, 0L, static_cast<long>(u.size()) - width - 1);
  std::vector<double> xs;
  for (long i = start; i <= start + width; ++i)
    xs.push_back(static_cast<double>(i - static_cast<long>(k)));
  auto w = fd_weights(0.0, xs, a);
  CVector d = CVector::Zero(u.slices[k].size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    d += w[i] * u.slices[start + i];
  return d / std::pow(u.dt, a);
}
}  // namespace detail

/// E_l(x0) = sum_{|alpha| = l} l!/alpha! int 1/2 u_alpha^dag A0 u_alpha dx1,
/// Clenshaw-Curtis quadrature in x1, finite differences in x0.
inline EnergySeries energy_series(const FieldOnCover &u, int ell, const OperatorSpec &s)
{
  if (ell < 0)
    throw Error(ErrorKind::invalid_argument, "energy order must be nonnegative");
  const SpectralBasis &B = *u.basis;
  check_derivative_guard(B, ell);
  const int P = B.n_nodes(), N = u.N;
  EnergySeries e;
  e.ell = ell;
  std::vector<CMatrix> A0(P);
  const bool tdep = !s.A[0].x0_independent();
  auto a0_at = [&](double t)
  {
    for (int m = 0; m < P; ++m)
      A0[m] = s.A[0].evaluate(t, {B.nodes()[m]});
  };
  a0_at(u.t0);
  const RMatrix &D = B.d1();
  for (std::size_t k = 0; k < u.size(); ++k)
  {
    if (tdep)
      a0_at(u.time(k));
    double total = 0.0;
    for (auto &al : multi_indices(2, ell))
    {
      CVector v = detail::time_derivative(u, k, al.alpha[0]);
      for (int j = 0; j < al.alpha[1]; ++j)
      {
        CVector w = CVector::Zero(v.size());
        for (int m = 0; m < P; ++m)
          for (int q = 0; q < P; ++q)
            w.segment(m * N, N) += D(m, q) * v.segment(q * N, N);
        v = w;
      }
      double acc = 0.0;
      for (int m = 0; m < P; ++m)
        acc += B.weights()(m) * 0.5 * (v.segment(m * N, N).adjoint() * A0[m] * v.segment(m * N, N))(0).real();
      total += al.weight.convert_to<double>() * acc;
    }
    e.times.push_back(u.time(k));
    e.values.push_back(std::max(0.0, total));
  }
  return e;
}

/// Least-squares slope of log y against t over samples with t in [t_lo, t_hi]
/// and y above floor. NaN if fewer than two samples qualify.
inline double log_slope(const std::vector<double> &t, const std::vector<double> &y, double t_lo, double t_hi,
                        double floor = 0.0)
{
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
  {
    if (t[i] < t_lo || t[i] > t_hi || !(y[i] > floor))
      continue;
    const double ly = std::log(y[i]);
    n += 1;
    sx += t[i];
    sy += ly;
    sxx += t[i] * t[i];
    sxy += t[i] * ly;
  }
  if (n < 2)
    return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------- periodization

struct PeriodizeResult
{
  GridFunction u;
  int iterations = 0;
  double last_change = 0.0;
  double residual = 0.0;  // ||D_z u - f|| / ||f||
};

/// Values of an Omega-grid function on the slice at time t.
inline CVector slice_at(const SpectralBasis &b, const GridFunction &f, double t)
{
  CVector v = CVector::Zero(static_cast<Eigen::Index>(b.n_nodes()) * f.N);
  for (int q = -f.Q; q <= f.Q; ++q)
    v += std::exp(I * (static_cast<double>(q) * t)) * f.mode(q);
  return v;
}

/// Solves D_z u = f on Omega by evolving the lift from zero data and taking the
/// limit of the period translates, sampled on the basis time nodes.
inline PeriodizeResult periodize(const OperatorSpec &s, std::shared_ptr<const SpectralBasis> basis,
                                 const GridFunction &f, cplx z, int max_periods = 200, double tol = 1e-9)
{
  const SpectralBasis &B = *basis;
  const int J = B.n_modes(), P = B.n_nodes(), N = s.N;
  SliceForcing force = [&](double t) { return slice_at(B, f, t); };
  EvolveOptions opts;
  opts.steps_per_period_multiple = J;
  PeriodizeResult res;
  CVector u = CVector::Zero(P * N);
  std::vector<CVector> prev;
  for (int p = 0; p < max_periods; ++p)
  {
    auto run = evolve(s, basis, u, force, z, two_pi * p, two_pi * (p + 1), opts);
    const std::size_t per = run.size() - 1;
    std::vector<CVector> snap(J);
    for (int j = 0; j < J; ++j)
      snap[j] = run.slices[per * j / J];
    u = run.slices.back();
    res.iterations = p + 1;
    if (!prev.empty())
    {
      double change = 0.0, size = 0.0;
      for (int j = 0; j < J; ++j)
      {
        change = std::max(change, (snap[j] - prev[j]).cwiseAbs().maxCoeff());
        size = std::max(size, snap[j].cwiseAbs().maxCoeff());
      }
      res.last_change = change;
      if (change < tol * std::max(1.0, size))
      {
        prev = snap;
        break;
      }
    }
    prev = snap;
    if (p + 1 == max_periods)
      throw Error(ErrorKind::convergence, "periodization did not converge within " + std::to_string(max_periods) +
                                              " periods (Re z may be below the largest pole)");
  }
  res.u = sample(B, N,
                 [&](double t, double x)
                 {
                   int j = static_cast<int>(std::lround(t / two_pi * J)) % J;
                   int m = 0;
                   while (B.nodes()[m] != x)
                     ++m;
                   return CVector(prev[j].segment(m * N, N));
                 });
  DiscreteOperator op(s, basis);
  const double fn = f.data.norm();
  res.residual = (op.assemble(z).apply(res.u) - f).data.norm() / (fn > 0 ? fn : 1.0);
  return res;
}

// ---------------------------------------------------------------- growth

struct GrowthReport
{
  double rate = 0.0;       // mean fitted rate over the probes
  double alignment = 1.0;  // min |cos| between late normalized profiles
  bool non_modal = false;  // late profiles depend on the data
  bool plateau = false;    // |rate| < 0.05 and non-modal
};

/// Long homogeneous evolutions (z = 0) from each probe; the rate is the slope
/// of log slice-norm over the last 4 periods.
inline GrowthReport growth_rate(const OperatorSpec &s, std::shared_ptr<const SpectralBasis> basis,
                                const std::vector<CVector> &probes, int periods = 12)
{
  if (periods < 10)
    throw Error(ErrorKind::invalid_argument, "growth window must cover at least 10 periods");
  if (probes.empty())
    throw Error(ErrorKind::invalid_argument, "growth_rate needs at least one probe");
  GrowthReport g;
  std::vector<CVector> late;
  double sum = 0.0;
  for (auto &init : probes)
  {
    auto run = evolve(s, basis, init, 0.0, 0.0, two_pi * periods);
    std::vector<double> t, y;
    for (std::size_t k = 0; k < run.size(); ++k)
    {
      t.push_back(run.time(k));
      y.push_back(run.slice_norm(k));
    }
    double r = log_slope(t, y, run.t_end() - 4 * two_pi, run.t_end() + 1e-9,
                         1e3 * std::numeric_limits<double>::epsilon());
    sum += r;
    CVector v = run.slices.back();
    late.push_back(v / std::max(v.norm(), 1e-300));
  }
  g.rate = sum / static_cast<double>(probes.size());
  for (std::size_t i = 0; i < late.size(); ++i)
    for (std::size_t j = i + 1; j < late.size(); ++j)
      g.alignment = std::min(g.alignment, std::abs(late[i].dot(late[j])));
  g.non_modal = late.size() > 1 && g.alignment < 0.99;
  g.plateau = g.non_modal && std::abs(g.rate) < 0.05;
  return g;
}

}  // namespace cylspec
