// SPDX-License-Identifier: Apache-2.0
#pragma once

// Forced problems on the cover (n = 1): the transform f_hat -> f_z, the
// retarded solution as a vertical integral over z = c + it, t in [0, 1), the
// finite-rank part F f_hat from loops about the poles with Re >= 0, and the
// decaying remainder.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "resolvent.hpp"
#include "timedomain.hpp"

namespace cylspec
{

// ---------------------------------------------------------------- forcing

/// exp(1 - 1/(1 - s^2)), s = (t - center) / width; width is the half-width.
struct TimeBump
{
  double center = 9.42;
  double width = 3.14;

  double operator()(double t) const
  {
    const double s = (t - center) / width;
    if (std::abs(s) >= 1.0)
      return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s * s));
  }
  double start() const { return center - width; }
  double end() const { return center + width; }
};

struct SpaceProfile
{
  enum class Kind
  {
    gaussian,
    polynomial
  } kind = Kind::gaussian;
  double sigma = 0.4;
  double center = 0.25;
  std::vector<double> coeffs;  // polynomial: sum c_k x^k

  double operator()(double x) const
  {
    if (kind == Kind::gaussian)
      return std::exp(-0.5 * (x - center) * (x - center) / (sigma * sigma));
    double s = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
      s = s * x + *it;
    return s;
  }
};

/// f_hat(x0, x1) = amplitude * bump(x0) * profile(x1) * components.
struct CoverForcing
{
  TimeBump bump;
  SpaceProfile space;
  double amplitude = 1.0;
  std::vector<cplx> components;  // empty: all ones
  std::string smoothness = "C-infinity bump in x0";

  double t_start() const { return bump.start(); }
  double t_end() const { return bump.end(); }

  CVector value(double t, double x, int N) const
  {
    CVector v(N);
    const double s = amplitude * bump(t) * space(x);
    for (int c = 0; c < N; ++c)
      v(c) = s * (components.empty() ? cplx(1.0) : components.at(c));
    return v;
  }

  CVector slice(const SpectralBasis &b, double t, int N) const
  {
    CVector v(static_cast<Eigen::Index>(b.n_nodes()) * N);
    for (int m = 0; m < b.n_nodes(); ++m)
      v.segment(m * N, N) = value(t, b.nodes()[m], N);
    return v;
  }

  json to_json() const
  {
    json sp;
    if (space.kind == SpaceProfile::Kind::gaussian)
      sp = {{"type", "gaussian"}, {"sigma", space.sigma}, {"center", space.center}};
    else
      sp = {{"type", "polynomial"}, {"coeffs", space.coeffs}};
    json j = {{"time_bump", {{"center", bump.center}, {"width", bump.width}}}, {"space", sp}};
    if (amplitude != 1.0)
      j["amplitude"] = amplitude;
    return j;
  }

  static CoverForcing from_json(const json &j)
  {
    try
    {
      CoverForcing f;
      if (j.contains("time_bump"))
      {
        f.bump.center = j.at("time_bump").value("center", f.bump.center);
        f.bump.width = j.at("time_bump").value("width", f.bump.width);
      }
      if (!(f.bump.width > 0.0))
        throw Error(ErrorKind::schema, "time_bump width must be positive");
      if (j.contains("space"))
      {
        const auto &s = j.at("space");
        const std::string type = s.value("type", "gaussian");
        if (type == "gaussian")
        {
          f.space.kind = SpaceProfile::Kind::gaussian;
          f.space.sigma = s.value("sigma", f.space.sigma);
          f.space.center = s.value("center", f.space.center);
          if (!(f.space.sigma > 0.0))
            throw Error(ErrorKind::schema, "gaussian sigma must be positive");
        }
        else if (type == "polynomial")
        {
          f.space.kind = SpaceProfile::Kind::polynomial;
          f.space.coeffs = s.at("coeffs").get<std::vector<double>>();
        }
        else
          throw Error(ErrorKind::schema, "unknown space profile type '" + type + "'");
      }
      f.amplitude = j.value("amplitude", 1.0);
      return f;
    }
    catch (const json::exception &e)
    {
      throw Error(ErrorKind::schema, std::string("forcing: ") + e.what());
    }
  }
};

inline CoverForcing default_forcing() { return {}; }

// ---------------------------------------------------------------- transform

/// f_z = sum_p (e^{-z x0} f_hat) o T^p sampled on the basis nodes.
inline GridFunction forward_transform(const CoverForcing &f, cplx z, const SpectralBasis &b, int N)
{
  if (!std::isfinite(f.t_start()) || !std::isfinite(f.t_end()))
    throw Error(ErrorKind::invalid_argument, "forcing support must be bounded");
  const long p_lo = static_cast<long>(std::floor(f.t_start() / two_pi)) - 1;
  const long p_hi = static_cast<long>(std::ceil(f.t_end() / two_pi)) + 1;
  return sample(b, N,
                [&](double s, double x)
                {
                  CVector v = CVector::Zero(N);
                  for (long p = p_lo; p <= p_hi; ++p)
                  {
                    const double t = s + two_pi * static_cast<double>(p);
                    if (t <= f.t_start() || t >= f.t_end())
                      continue;
                    v += std::exp(-z * t) * f.value(t, x, N);
                  }
                  return v;
                });
}

/// Number of period translates that meet the support.
inline int translate_count(const CoverForcing &f)
{
  return static_cast<int>(std::ceil(f.t_end() / two_pi) - std::floor(f.t_start() / two_pi));
}

/// Samples f_{c + i t_k}, t_k = k / J, J = 2Q + 1.
struct TransformPair
{
  double c = 0.0;
  std::vector<double> nodes;
  std::vector<GridFunction> samples;
  int translates = 0;
};

inline TransformPair transform_pair(const CoverForcing &f, double c, const SpectralBasis &b, int N)
{
  TransformPair tp;
  tp.c = c;
  const int J = b.n_modes();
  tp.translates = translate_count(f);
  if (tp.translates >= J)
    throw Error(ErrorKind::invalid_argument, "forcing spans too many periods for the Fourier band");
  for (int k = 0; k < J; ++k)
  {
    tp.nodes.push_back(static_cast<double>(k) / J);
    tp.samples.push_back(forward_transform(f, cplx(c, tp.nodes.back()), b, N));
  }
  return tp;
}

/// Uniform sampling of the cover segment [a, b].
struct CoverSegment
{
  double a = 0.0;
  double b = 0.0;
  int samples_per_period = 64;

  double dt() const { return two_pi / samples_per_period; }
  std::size_t count() const { return static_cast<std::size_t>(std::floor((b - a) / dt() + 1e-9)) + 1; }
};

/// (1/J) sum_k e^{z_k x0} u_k(x0) on the segment: trapezoid rule for
/// (1/i) int_{c}^{c+i} dz e^{z x0} u_z.
inline FieldOnCover vertical_integral(std::shared_ptr<const SpectralBasis> basis, int N, double c,
                                      const std::vector<double> &nodes, const std::vector<GridFunction> &u,
                                      const CoverSegment &seg)
{
  FieldOnCover out;
  out.basis = basis;
  out.N = N;
  out.t0 = seg.a;
  out.dt = seg.dt();
  const std::size_t count = seg.count();
  out.slices.resize(count);
  const double J = static_cast<double>(nodes.size());
  parallel_for(count,
               [&](std::size_t i)
               {
                 const double t = seg.a + static_cast<double>(i) * seg.dt();
                 CVector v = CVector::Zero(static_cast<Eigen::Index>(basis->n_nodes()) * N);
                 for (std::size_t k = 0; k < nodes.size(); ++k)
                   v += std::exp(cplx(c, nodes[k]) * t) * slice_at(*basis, u[k], t);
                 out.slices[i] = v / J;
               });
  return out;
}

// ---------------------------------------------------------------- pipeline

struct PoleTerms
{
  cplx lambda;  // contour centre (the discrete pole)
  int order = 1;
  int rank = 1;
  std::vector<GridFunction> G;  // F f_hat = sum_k (x0)^k e^{lambda x0} G_k(x0)
};

struct FiniteRankPart
{
  FieldOnCover loops;     // path (a): loop integrals
  FieldOnCover taylor;    // path (b): projections and derivatives of f_z
  std::vector<PoleTerms> terms;
  double path_difference = 0.0;  // max |a - b| / max |b|
  double kernel_residual = 0.0;  // max |D_hat F f| / max |F f|
  int rank = 0;
  int loop_nodes = 0;
};

struct StabilityDecomposition
{
  FieldOnCover u_ret;       // on [t1, t1 + periods]
  FieldOnCover Ff;
  FieldOnCover difference;  // left-path integral at c_left
  double c_right = 0.0;
  double c_left = 0.0;
  double fitted_rate = 0.0;
  double cauchy_consistency = 0.0;  // |difference - (u_ret - Ff)| relative to |u_ret|, early window
  std::vector<Pole> Lambda;
  int rank_F = 0;
  double z_star_star = 0.0;
  double z_star_star_star = 0.0;

  json to_json() const
  {
    json lam = json::array();
    for (auto &p : Lambda)
      lam.push_back({{"re", p.lambda.real()}, {"im", p.lambda.imag()}, {"order", p.order}, {"rank", p.rank}});
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return {{"Lambda", lam},
            {"rank_F", rank_F},
            {"z_star_star", num(z_star_star)},
            {"z_star_star_star", num(z_star_star_star)},
            {"fitted_rate", num(fitted_rate)},
            {"c_right", c_right},
            {"c_left", c_left},
            {"cauchy_consistency", cauchy_consistency}};
  }
};

/// Operator, basis and pole set shared by the forced-problem computations.
class StabilityPipeline
{
public:
  StabilityPipeline(const OperatorSpec &spec, std::shared_ptr<const SpectralBasis> basis,
                    const PoleSearchOptions &o = default_options())
    : op_(spec, std::move(basis)), options_(o), poles_(find_poles(op_, o))
  {
  }

  static PoleSearchOptions default_options()
  {
    PoleSearchOptions o;
    o.window.re_min = -2.2;
    return o;
  }

  const DiscreteOperator &op() const { return op_; }
  const PoleSet &poles() const { return poles_; }
  int N() const { return op_.N(); }
  std::shared_ptr<const SpectralBasis> basis() const { return op_.basis_ptr(); }

  /// Default vertical path: a quarter unit right of the largest pole.
  double default_c() const
  {
    return std::isfinite(poles_.z_star_star) ? poles_.z_star_star + 0.25 : 0.0;
  }

  /// Left path between z_star_star_star and 0 (midpoint).
  double default_c_left() const
  {
    const double zsss = poles_.z_star_star_star;
    if (!std::isfinite(zsss))
      return -0.5;
    return 0.5 * zsss;
  }

  /// Vertical integral of e^{z x0} D_z^{-1} f_z along Re z = c (any c off the poles).
  FieldOnCover vertical_solution(const CoverForcing &f, double c, const CoverSegment &seg) const
  {
    for (auto &p : poles_.poles)
      if (std::abs(p.lambda.real() - c) < 1e-3)
        throw Error(ErrorKind::near_pole, "vertical path Re z = " + std::to_string(c) + " passes a pole");
    auto tp = transform_pair(f, c, op_.basis(), N());
    std::vector<GridFunction> u(tp.samples.size(), GridFunction(op_.basis(), N()));
    parallel_for(tp.samples.size(),
                 [&](std::size_t k) { u[k] = solve_resolvent(op_, cplx(c, tp.nodes[k]), tp.samples[k]); });
    return vertical_integral(basis(), N(), c, tp.nodes, u, seg);
  }

  /// Retarded solution: the vertical integral with c > z_star_star.
  FieldOnCover retarded_solution(const CoverForcing &f, double c, const CoverSegment &seg) const
  {
    if (!(c > poles_.z_star_star))
      throw Error(ErrorKind::invalid_argument, "retarded path needs c > z_star_star = " +
                                                   std::to_string(poles_.z_star_star));
    return vertical_solution(f, c, seg);
  }

  FiniteRankPart build_F(const CoverForcing &f, const CoverSegment &seg) const
  {
    FiniteRankPart F;
    const int N = this->N();
    const auto &b = op_.basis();
    const std::size_t count = seg.count();
    auto zero_field = [&]
    {
      FieldOnCover z;
      z.basis = basis();
      z.N = N;
      z.t0 = seg.a;
      z.dt = seg.dt();
      z.slices.assign(count, CVector::Zero(static_cast<Eigen::Index>(b.n_nodes()) * N));
      return z;
    };
    F.loops = zero_field();
    F.taylor = zero_field();
    const double tmax = std::max(std::abs(seg.a), std::abs(seg.b));

    for (auto &p : poles_.Lambda)
    {
      PoleTerms term;
      term.lambda = p.discrete;
      term.order = p.order;
      term.rank = p.rank;
      F.rank += p.rank;
      const double rho = p.radius;

      // (a) loop integral (1/i) oint dz e^{z x0} D_z^{-1} f_z; e^{z x0} needs
      // about 2 e rho |x0| extra nodes.
      int nodes = std::max(options_.contour_nodes, 32 + static_cast<int>(std::ceil(2.0 * std::exp(1.0) * rho * tmax)));
      F.loop_nodes = std::max(F.loop_nodes, nodes);
      std::vector<cplx> zs(nodes), w(nodes);
      std::vector<GridFunction> us(nodes, GridFunction(b, N));
      parallel_for(static_cast<std::size_t>(nodes),
                   [&](std::size_t j)
                   {
                     const cplx e = std::exp(I * (two_pi * static_cast<double>(j) / nodes));
                     zs[j] = p.discrete + rho * e;
                     w[j] = two_pi / nodes * rho * e;  // (1/i) dz = rho e^{i theta} d theta
                     us[j] = solve_resolvent(op_, zs[j], forward_transform(f, zs[j], b, N));
                   });
      parallel_for(count,
                   [&](std::size_t i)
                   {
                     const double t = seg.a + static_cast<double>(i) * seg.dt();
                     CVector v = CVector::Zero(F.loops.slices[i].size());
                     for (int j = 0; j < nodes; ++j)
                       v += w[j] * std::exp(zs[j] * t) * slice_at(b, us[j], t);
                     F.loops.slices[i] += v;
                   });

      // (b) 2 pi sum_l (1/l!) P_hat_{lambda l} f^{(l)}(lambda)
      const int order = p.order;
      auto P = projections(op_, {p.discrete, rho, options_.contour_nodes}, order - 1);
      std::vector<GridFunction> deriv(order, GridFunction(b, N));
      const int nc = std::max(options_.contour_nodes, 32);
      for (int j = 0; j < nc; ++j)
      {
        const cplx e = std::exp(I * (two_pi * static_cast<double>(j) / nc));
        auto fz = forward_transform(f, p.discrete + rho * e, b, N);
        // f^{(l)}(lambda) = l! / (2 pi i) oint f_z / (z - lambda)^{l+1} dz
        for (int l = 0; l < order; ++l)
          deriv[l] = deriv[l] + fz * (factorial(l) / nc / std::pow(rho * e, l));
      }
      term.G.assign(order, GridFunction(b, N));
      for (int k = 0; k < order; ++k)
        for (int l = 0; k + l < order; ++l)
        {
          GridFunction g(b, N);
          g.data = P[k + l].matrix.apply(deriv[l].data);
          term.G[k] = term.G[k] + g * (two_pi / (factorial(l) * factorial(k)));
        }
      parallel_for(count,
                   [&](std::size_t i)
                   {
                     const double t = seg.a + static_cast<double>(i) * seg.dt();
                     CVector v = CVector::Zero(F.taylor.slices[i].size());
                     for (int k = 0; k < order; ++k)
                       v += std::pow(t, k) * std::exp(term.lambda * t) * slice_at(b, term.G[k], t);
                     F.taylor.slices[i] += v;
                   });

      F.terms.push_back(std::move(term));
    }

    double diff = 0.0, size = 0.0;
    for (std::size_t i = 0; i < count; ++i)
    {
      diff = std::max(diff, (F.loops.slices[i] - F.taylor.slices[i]).cwiseAbs().maxCoeff());
      size = std::max(size, F.taylor.sup_norm(i));
    }
    F.path_difference = size > 0 ? diff / size : diff;
    F.kernel_residual = kernel_residual(F, seg);
    return F;
  }

  /// max over the segment of |D_hat F f| / max |F f|, with D_hat applied to
  /// sum_k (x0)^k e^{lambda x0} G_k exactly on the grid:
  /// D_hat = e^{lambda x0} sum_k (x0)^k (D_lambda G_k + (k+1) A0 G_{k+1}).
  double kernel_residual(const FiniteRankPart &F, const CoverSegment &seg) const
  {
    if (F.terms.empty())
      return 0.0;
    const auto &b = op_.basis();
    std::vector<std::vector<GridFunction>> R;
    for (auto &term : F.terms)
    {
      auto D = op_.assemble(term.lambda);
      std::vector<GridFunction> r;
      for (int k = 0; k < term.order; ++k)
      {
        GridFunction g = D.apply(term.G[k]);
        if (k + 1 < term.order)
        {
          GridFunction a(b, N());
          a.data = op_.A0().apply(term.G[k + 1].data);
          g = g + a * static_cast<double>(k + 1);
        }
        r.push_back(g);
      }
      R.push_back(std::move(r));
    }
    double res = 0.0, size = 0.0;
    for (std::size_t i = 0; i < seg.count(); ++i)
    {
      const double t = seg.a + static_cast<double>(i) * seg.dt();
      CVector v = CVector::Zero(F.taylor.slices[i].size());
      for (std::size_t m = 0; m < F.terms.size(); ++m)
        for (int k = 0; k < F.terms[m].order; ++k)
          v += std::pow(t, k) * std::exp(F.terms[m].lambda * t) * slice_at(b, R[m][k], t);
      res = std::max(res, v.cwiseAbs().maxCoeff());
      size = std::max(size, F.taylor.sup_norm(i));
    }
    return size > 0 ? res / size : res;
  }

  /// u_ret - F f_hat on [t1, t1 + periods]: taken from the left path (Cauchy),
  /// which avoids the cancellation between two growing fields.
  StabilityDecomposition decompose(const CoverForcing &f, int periods = 6, int samples_per_period = 64) const
  {
    if (periods < 3)
      throw Error(ErrorKind::invalid_argument, "segment too short for a rate fit (< 3 periods past support)");
    StabilityDecomposition d;
    d.Lambda = poles_.Lambda;
    d.z_star_star = poles_.z_star_star;
    d.z_star_star_star = poles_.z_star_star_star;
    d.c_right = default_c();
    d.c_left = default_c_left();
    CoverSegment seg{f.t_end(), f.t_end() + two_pi * periods, samples_per_period};
    d.u_ret = retarded_solution(f, d.c_right, seg);
    auto F = build_F(f, seg);
    d.Ff = F.taylor;
    d.rank_F = F.rank;
    if (poles_.Lambda.empty())
      d.difference = d.u_ret;
    else
      d.difference = vertical_solution(f, d.c_left, seg);

    // consistency where u_ret - F f is not dominated by cancellation: first period
    double err = 0.0, size = 0.0;
    const std::size_t first = std::min(d.u_ret.size(), static_cast<std::size_t>(samples_per_period) + 1);
    for (std::size_t i = 0; i < first; ++i)
    {
      CVector direct = d.u_ret.slices[i] - d.Ff.slices[i];
      err = std::max(err, (direct - d.difference.slices[i]).cwiseAbs().maxCoeff());
      size = std::max(size, d.u_ret.sup_norm(i));
    }
    d.cauchy_consistency = size > 0 ? err / size : err;
    d.fitted_rate = fit_rate(d.difference, 4);
    return d;
  }

  /// Least-squares rate of log slice L2 norm over the last `periods` periods,
  /// skipping slices below 1e3 eps of the window maximum.
  static double fit_rate(const FieldOnCover &u, int periods)
  {
    std::vector<double> t, y;
    double ymax = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k)
    {
      t.push_back(u.time(k));
      y.push_back(u.slice_norm(k));
      ymax = std::max(ymax, y.back());
    }
    return log_slope(t, y, u.t_end() - two_pi * periods - 1e-9, u.t_end() + 1e-9,
                     1e3 * std::numeric_limits<double>::epsilon() * ymax);
  }

private:
  DiscreteOperator op_;
  PoleSearchOptions options_;
  PoleSet poles_;
};

/// Fraction of the energy of F f_hat (sampled on the segment) captured by
/// least squares onto (x0)^k e^{(lambda + iq) x0}, q in the band, k < order.
inline double image_energy_fraction(const FieldOnCover &Ff, const std::vector<Pole> &Lambda, int Q)
{
  if (Lambda.empty())
    return 1.0;
  const Eigen::Index rows = static_cast<Eigen::Index>(Ff.size());
  double grow = -std::numeric_limits<double>::infinity();
  int cols = 0;
  for (auto &p : Lambda)
  {
    grow = std::max(grow, p.discrete.real());
    cols += p.order * (2 * Q + 1);
  }
  // rows weighted by e^{-grow t} and columns scaled to unit max
  CMatrix A(rows, cols);
  Eigen::Index c = 0;
  for (auto &p : Lambda)
    for (int k = 0; k < p.order; ++k)
      for (int q = -Q; q <= Q; ++q, ++c)
      {
        for (Eigen::Index r = 0; r < rows; ++r)
        {
          const double t = Ff.time(r);
          A(r, c) = std::pow(t, k) * std::exp((p.discrete + I * static_cast<double>(q) - grow) * t);
        }
        A.col(c) /= std::max(A.col(c).cwiseAbs().maxCoeff(), 1e-300);
      }
  Eigen::ColPivHouseholderQR<CMatrix> qr(A);
  double total = 0.0, resid = 0.0;
  const Eigen::Index width = Ff.slices.empty() ? 0 : Ff.slices[0].size();
  for (Eigen::Index n = 0; n < width; ++n)
  {
    CVector y(rows);
    for (Eigen::Index r = 0; r < rows; ++r)
      y(r) = Ff.slices[r](n) * std::exp(-grow * Ff.time(r));
    CVector x = qr.solve(y);
    total += y.squaredNorm();
    resid += (A * x - y).squaredNorm();
  }
  return total > 0 ? 1.0 - resid / total : 1.0;
}

/// Relative L2 difference of two cover fields over the common sample times in [a, b].
inline double relative_l2(const FieldOnCover &u, const FieldOnCover &v, double a, double b)
{
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k)
  {
    const double t = v.time(k);
    if (t < a - 1e-9 || t > b + 1e-9)
      continue;
    const std::size_t j = u.index_of(t);
    if (std::abs(u.time(j) - t) > 1e-9 * std::max(1.0, std::abs(t)))
      throw Error(ErrorKind::invalid_argument, "cover fields are not sampled at common times");
    num += (u.slices[j] - v.slices[k]).squaredNorm();
    den += v.slices[k].squaredNorm();
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Band wide enough that the bump's x0 spectrum is resolved to about 1e-7.
inline std::shared_ptr<const SpectralBasis> default_stability_basis() { return build_basis(32, 24); }

/// 8 periods before the support through 8 periods after.
inline CoverSegment default_segment(const CoverForcing &f, int samples_per_period = 64)
{
  return {f.t_start() - 8 * two_pi, f.t_end() + 8 * two_pi, samples_per_period};
}

inline FieldOnCover retarded_solution(const OperatorSpec &spec, std::shared_ptr<const SpectralBasis> basis,
                                      const CoverForcing &f, double c, const CoverSegment &seg)
{
  return StabilityPipeline(spec, std::move(basis)).retarded_solution(f, c, seg);
}

inline FiniteRankPart build_F(const OperatorSpec &spec, std::shared_ptr<const SpectralBasis> basis,
                              const CoverForcing &f, const CoverSegment &seg)
{
  return StabilityPipeline(spec, std::move(basis)).build_F(f, seg);
}

inline StabilityDecomposition stability_decomposition(const OperatorSpec &spec,
                                                      std::shared_ptr<const SpectralBasis> basis,
                                                      const CoverForcing &f)
{
  return StabilityPipeline(spec, std::move(basis)).decompose(f);
}

}  // namespace cylspec
