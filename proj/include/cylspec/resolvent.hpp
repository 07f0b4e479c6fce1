// SPDX-License-Identifier: Apache-2.0
#pragma once

// Resolvent D_z^{-1} on a spectral basis: solves, pole location with a
// resolution-doubling filter, contour-integral projections
//   P_{lambda l} = (1/2 pi i) \oint (z - lambda)^l D_z^{-1} dz,
// and the identity / bound checks built on them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "norms.hpp"
#include "operator_model.hpp"
#include "spectral.hpp"

namespace cylspec
{

// ---------------------------------------------------------------- eigenvalues

/// Distance between a and b with imaginary parts compared modulo 1.
inline double lattice_distance(cplx a, cplx b)
{
  double di = a.imag() - b.imag();
  di -= std::round(di);
  return std::hypot(a.real() - b.real(), di);
}

/// Representative with 0 <= Im < 1.
inline cplx reduce_to_strip(cplx z)
{
  double im = z.imag() - std::floor(z.imag());
  if (im >= 1.0 - 1e-12)
    im = 0.0;
  if (std::abs(im) < 1e-12)
    im = 0.0;
  return {z.real(), im};
}

struct DiscreteEigenpair
{
  cplx lambda;        // as computed (not reduced)
  CVector vector;     // mode-nodal, full basis
  double edge_energy;  // fraction of |v|^2 in modes |q| = Q
  double centroid;     // energy-weighted mean Fourier index
  double tail;         // Chebyshev tail ratio: last quarter / max coefficient
};

namespace detail
{
inline double chebyshev_tail(const SpectralBasis &b, const CVector &v, int N, int Q)
{
  const int P = b.n_nodes();
  double tmax = 0.0, amax = 0.0;
  const int start = (3 * P) / 4;
  for (int q = -Q; q <= Q; ++q)
    for (int c = 0; c < N; ++c)
    {
      CVector vals(P);
      for (int m = 0; m < P; ++m)
        vals(m) = v(((q + Q) * P + m) * N + c);
      RVector re = b.to_coeffs() * vals.real(), im = b.to_coeffs() * vals.imag();
      for (int k = 0; k < P; ++k)
      {
        double a = std::hypot(re(k), im(k));
        amax = std::max(amax, a);
        if (k >= start)
          tmax = std::max(tmax, a);
      }
    }
  return amax > 0.0 ? tmax / amax : 0.0;
}

inline void mode_statistics(const CVector &v, int Q, int blk, double &edge, double &centroid)
{
  double total = 0.0, e = 0.0, c = 0.0;
  for (int q = -Q; q <= Q; ++q)
  {
    double s = v.segment(static_cast<Eigen::Index>(q + Q) * blk, blk).squaredNorm();
    total += s;
    c += q * s;
    if (std::abs(q) == Q && Q > 0)
      e += s;
  }
  edge = total > 0 ? e / total : 0.0;
  centroid = total > 0 ? c / total : 0.0;
}
}  // namespace detail

/// Eigenpairs of the pencil D v = -lambda A0 v. When the operator is
/// x0-independent only the q = 0 block is solved: block q is block 0 shifted
/// by -iq, so the reduced spectrum is the same.
inline std::vector<DiscreteEigenpair> discrete_eigenpairs(const DiscreteOperator &op)
{
  const SpectralBasis &b = op.basis();
  const int Q = b.Q_max();
  const int N = op.N();
  const int blk = b.n_nodes() * N;
  std::vector<DiscreteEigenpair> out;
  auto solve = [&](const CMatrix &D, const CMatrix &A0, int offset_q)
  {
    CMatrix T = -A0.partialPivLu().solve(D);
    Eigen::ComplexEigenSolver<CMatrix> es(T, true);
    if (es.info() != Eigen::Success)
      throw Error(ErrorKind::convergence, "eigensolver did not converge");
    for (Eigen::Index k = 0; k < T.rows(); ++k)
    {
      DiscreteEigenpair e;
      e.lambda = es.eigenvalues()(k);
      CVector v = CVector::Zero(static_cast<Eigen::Index>(2 * Q + 1) * blk);
      if (op.decoupled())
        v.segment(static_cast<Eigen::Index>(offset_q + Q) * blk, blk) = es.eigenvectors().col(k);
      else
        v = es.eigenvectors().col(k);
      v.normalize();
      e.vector = v;
      detail::mode_statistics(v, Q, blk, e.edge_energy, e.centroid);
      if (op.decoupled())
        e.edge_energy = 0.0;  // no truncation coupling between modes
      e.tail = detail::chebyshev_tail(b, v, N, Q);
      out.push_back(std::move(e));
    }
  };
  if (op.decoupled())
    solve(op.D().blocks[Q], op.A0().blocks[Q], 0);
  else
    solve(op.D().full, op.A0().full, 0);
  return out;
}

// ---------------------------------------------------------------- solves

/// LU factorization of D_z, block by block when possible. Near-pole errors
/// carry the nearest eigenvalue of the pencil.
class ResolventSolver
{
public:
  explicit ResolventSolver(const ResolventAssembly &a) : a_(a)
  {
    auto factor = [&](const CMatrix &m)
    {
      lus_.emplace_back(m);
      if (!(lus_.back().rcond() > 1e-13))
        near_pole();
    };
    if (a.matrix.decoupled)
      for (auto &blk : a.matrix.blocks)
        factor(blk);
    else
      factor(a.matrix.full);
  }

  CVector solve(const CVector &f) const
  {
    CVector u(f.size());
    if (a_.matrix.decoupled)
    {
      const int blk = a_.matrix.block;
      for (std::size_t i = 0; i < lus_.size(); ++i)
        u.segment(i * blk, blk) = lus_[i].solve(f.segment(i * blk, blk));
    }
    else
      u = lus_[0].solve(f);
    return u;
  }

  GridFunction solve(const GridFunction &f) const
  {
    GridFunction u = f;
    u.data = solve(f.data);
    double fn = f.data.norm();
    if (fn > 0.0)
    {
      double res = (a_.matrix.apply(u.data) - f.data).norm() / fn;
      if (!(res <= 1e-10))
        near_pole();
    }
    return u;
  }

  /// D_z^{-1} as a block operator.
  BlockOperator inverse() const
  {
    BlockOperator r;
    r.decoupled = a_.matrix.decoupled;
    r.Q = a_.matrix.Q;
    r.block = a_.matrix.block;
    if (r.decoupled)
      for (auto &lu : lus_)
        r.blocks.push_back(lu.inverse());
    else
      r.full = lus_[0].inverse();
    return r;
  }

private:
  [[noreturn]] void near_pole() const
  {
    cplx best = a_.z;
    double dist = std::numeric_limits<double>::infinity();
    auto scan = [&](const CMatrix &Dz, const CMatrix &A0)
    {
      // eigenvalues lambda of D v = -lambda A0 v, with D = D_z - z A0
      CMatrix T = -A0.partialPivLu().solve(Dz) + a_.z * CMatrix::Identity(Dz.rows(), Dz.cols());
      Eigen::ComplexEigenSolver<CMatrix> es(T, false);
      for (Eigen::Index k = 0; k < T.rows(); ++k)
      {
        double d = std::abs(es.eigenvalues()(k) - a_.z);
        if (d < dist)
        {
          dist = d;
          best = es.eigenvalues()(k);
        }
      }
    };
    if (a_.matrix.decoupled)
      for (std::size_t i = 0; i < a_.matrix.blocks.size(); ++i)
        scan(a_.matrix.blocks[i], a_.A0.blocks[i]);
    else
      scan(a_.matrix.full, a_.A0.full);
    throw NearPoleError(a_.z, best);
  }

  ResolventAssembly a_;
  std::vector<Eigen::PartialPivLU<CMatrix>> lus_;
};

/// Solves D_z u = f. Throws NearPoleError when D_z is numerically singular.
inline GridFunction solve_resolvent(const ResolventAssembly &a, const GridFunction &f)
{
  return ResolventSolver(a).solve(f);
}

inline GridFunction solve_resolvent(const DiscreteOperator &op, cplx z, const GridFunction &f)
{
  return ResolventSolver(op.assemble(z)).solve(f);
}

// ---------------------------------------------------------------- projections

struct Contour
{
  cplx center;
  double radius = 0.2;
  int nodes = 32;
};

struct ProjectionMatrix
{
  cplx lambda;
  int ell = 0;
  BlockOperator matrix;
  Contour contour;
  double doubling_change = 0.0;  // max entry change when the node count was doubled
  double noise = 0.0;            // rounding floor: eps * max node |D_z^{-1}| * radius^{l+1}
};

namespace detail
{
inline double max_abs(const BlockOperator &m)
{
  if (!m.decoupled)
    return m.full.cwiseAbs().maxCoeff();
  double r = 0.0;
  for (auto &b : m.blocks)
    r = std::max(r, b.cwiseAbs().maxCoeff());
  return r;
}

inline BlockOperator zero_like(const BlockOperator &m)
{
  BlockOperator r = m;
  if (r.decoupled)
    for (auto &b : r.blocks)
      b.setZero();
  else
    r.full.setZero();
  return r;
}

inline BlockOperator multiply(const BlockOperator &a, const BlockOperator &b)
{
  BlockOperator r = a;
  if (a.decoupled && b.decoupled)
  {
    for (std::size_t i = 0; i < a.blocks.size(); ++i)
      r.blocks[i] = a.blocks[i] * b.blocks[i];
    return r;
  }
  r.decoupled = false;
  r.blocks.clear();
  r.full = a.dense() * b.dense();
  return r;
}

inline cplx frobenius_inner(const BlockOperator &a, const BlockOperator &b)
{
  if (!a.decoupled)
    return (a.full.adjoint() * b.full).trace();
  cplx r = 0.0;
  for (std::size_t i = 0; i < a.blocks.size(); ++i)
    r += a.blocks[i].cwiseProduct(b.blocks[i].conjugate()).sum();
  return std::conj(r);
}

inline BlockOperator difference(const BlockOperator &a, const BlockOperator &b)
{
  return a.axpy(-1.0, b);
}

// Trapezoid samples (z_j - lambda)^{l+1} / N of D_{z_j}^{-1}, for every l in [0, lmax].
inline std::vector<BlockOperator> contour_moments(const DiscreteOperator &op, const Contour &c, int lmax,
                                                  double phase, double *node_max = nullptr)
{
  std::vector<BlockOperator> inv(c.nodes);
  parallel_for(static_cast<std::size_t>(c.nodes),
               [&](std::size_t j)
               {
                 double th = two_pi * (j + phase) / c.nodes;
                 cplx z = c.center + c.radius * std::exp(I * th);
                 inv[j] = ResolventSolver(op.assemble(z)).inverse();
               });
  if (node_max)
    for (auto &m : inv)
      *node_max = std::max(*node_max, max_abs(m));
  std::vector<BlockOperator> out;
  for (int l = 0; l <= lmax; ++l)
  {
    BlockOperator acc = zero_like(inv[0]);
    for (int j = 0; j < c.nodes; ++j)
    {
      double th = two_pi * (j + phase) / c.nodes;
      cplx w = std::pow(c.radius * std::exp(I * th), l + 1) / static_cast<double>(c.nodes);
      acc = acc.axpy(w, inv[j]);
    }
    out.push_back(std::move(acc));
  }
  return out;
}
}  // namespace detail

/// P_{lambda l} for l = 0..lmax by trapezoid quadrature, doubling the node
/// count until entries change by less than 1e-9 (relative to P_{lambda 0}).
inline std::vector<ProjectionMatrix> projections(const DiscreteOperator &op, const Contour &contour, int lmax)
{
  Contour c = contour;
  double node_max = 0.0;
  auto cur = detail::contour_moments(op, c, lmax, 0.0, &node_max);
  for (int attempt = 0; attempt < 4; ++attempt)
  {
    auto offset = detail::contour_moments(op, c, lmax, 0.5, &node_max);
    std::vector<BlockOperator> fine;
    double change = 0.0;
    const double scale = std::max(detail::max_abs(cur[0]), 1e-300);
    for (int l = 0; l <= lmax; ++l)
    {
      BlockOperator f = cur[l].axpy(1.0, offset[l]).scaled(0.5);  // both node sets
      change = std::max(change, detail::max_abs(detail::difference(f, cur[l])) / scale);
      fine.push_back(std::move(f));
    }
    c.nodes *= 2;
    if (change < 1e-9)
    {
      std::vector<ProjectionMatrix> out;
      for (int l = 0; l <= lmax; ++l)
      {
        double noise = 64.0 * std::numeric_limits<double>::epsilon() * node_max * std::pow(c.radius, l + 1);
        out.push_back({c.center, l, fine[l], c, change, noise});
      }
      return out;
    }
    cur = std::move(fine);
  }
  throw Error(ErrorKind::contour, "contour quadrature did not converge at radius " + std::to_string(c.radius));
}

/// max |P_k A0 P_l - P_{k+l}| relative to max(1, |P_0|^2 |A0|), entrywise max
/// norms. Products of large projections lose eps |P_0|^2; moments past the
/// order are rounding noise of that size.
inline double projection_algebra_error(const std::vector<ProjectionMatrix> &P, const BlockOperator &A0, int k, int l)
{
  using detail::max_abs;
  auto lhs = detail::multiply(detail::multiply(P[k].matrix, A0), P[l].matrix);
  double scale = std::max(1.0, max_abs(P[0].matrix) * max_abs(A0) * max_abs(P[0].matrix));
  return max_abs(detail::difference(lhs, P[k + l].matrix)) / scale;
}

/// max |(P_0 A0)^2 - P_0 A0| on the same relative scale.
inline double idempotence_error(const ProjectionMatrix &P0, const BlockOperator &A0)
{
  using detail::max_abs;
  auto PA = detail::multiply(P0.matrix, A0);
  double scale = std::max(1.0, max_abs(PA) * max_abs(PA));
  return max_abs(detail::difference(detail::multiply(PA, PA), PA)) / scale;
}

inline ProjectionMatrix spectral_projection(const DiscreteOperator &op, const Contour &c, int ell)
{
  return projections(op, c, ell).back();
}

/// Numerical rank: singular values above 1e-8 sigma_1.
inline int numerical_rank(const CMatrix &m, double rel = 1e-8)
{
  if (m.size() == 0)
    return 0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto &s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0)
    return 0;
  int r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > rel * s(0))
      ++r;
  return r;
}

inline int numerical_rank(const BlockOperator &m, double rel = 1e-8)
{
  if (!m.decoupled)
    return numerical_rank(m.full, rel);
  double smax = 0.0;
  std::vector<RVector> sv;
  for (auto &b : m.blocks)
  {
    Eigen::JacobiSVD<CMatrix> svd(b);
    sv.push_back(svd.singularValues());
    if (sv.back().size())
      smax = std::max(smax, sv.back()(0));
  }
  if (smax == 0.0)
    return 0;
  int r = 0;
  for (auto &s : sv)
    for (Eigen::Index k = 0; k < s.size(); ++k)
      if (s(k) > rel * smax)
        ++r;
  return r;
}

// ---------------------------------------------------------------- poles

struct Window
{
  double re_min = -2.0;
  double re_max = std::numeric_limits<double>::infinity();
};

struct Pole
{
  cplx lambda;          // reduced to 0 <= Im < 1
  cplx discrete;        // the discrete eigenvalue the contour is centred on
  int order = 1;
  int rank = 1;         // rank of P_{lambda 0} A0
  int multiplicity = 1;  // filtered discrete eigenvalues in the cluster
  double residual = 0.0;
  double radius = 0.2;
};

struct PoleSet
{
  std::vector<Pole> poles;
  Window window;
  double z_star_star = -std::numeric_limits<double>::infinity();
  double z_star_star_star = -std::numeric_limits<double>::infinity();
  std::vector<Pole> Lambda;
  bool band_edge = false;
  int rejected = 0;  // candidates removed by the filter

  std::string to_csv() const
  {
    std::ostringstream os;
    os << std::setprecision(17) << "re,im,order,rank,residual\n";
    for (auto &p : poles)
      os << p.lambda.real() << "," << p.lambda.imag() << "," << p.order << "," << p.rank << "," << p.residual
         << "\n";
    return os.str();
  }

  json to_json() const
  {
    auto enc = [](const std::vector<Pole> &ps)
    {
      json a = json::array();
      for (auto &p : ps)
        a.push_back({{"re", p.lambda.real()},
                     {"im", p.lambda.imag()},
                     {"order", p.order},
                     {"rank", p.rank},
                     {"multiplicity", p.multiplicity},
                     {"residual", p.residual},
                     {"radius", p.radius}});
      return a;
    };
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return {{"window", {{"re_min", window.re_min}, {"re_max", num(window.re_max)}}},
            {"poles", enc(poles)},
            {"Lambda", enc(Lambda)},
            {"z_star_star", num(z_star_star)},
            {"z_star_star_star", num(z_star_star_star)},
            {"band_edge", band_edge},
            {"rejected", rejected}};
  }
};

struct PoleSearchOptions
{
  Window window;
  double persistence_tol = 1e-6;
  double cluster_tol = 1e-5;
  double tail_tol = 1e-8;
  double edge_tol = 1e-6;
  int contour_nodes = 32;
  double max_radius = 0.2;
  bool compute_projections = true;
  int max_order = 4;
  double zero_tol = 1e-9;  // |Re lambda| below this counts as Re lambda = 0
};

namespace detail
{
struct Candidate
{
  cplx reduced;
  cplx discrete;
  double residual;
  int count = 1;
};

// Filtered, clustered, reduced spectrum of one discretization.
inline std::vector<Candidate> reduced_spectrum(const DiscreteOperator &op, const PoleSearchOptions &o,
                                               bool &edge_hit, std::vector<cplx> *all_raw = nullptr,
                                               const std::vector<DiscreteEigenpair> *precomputed = nullptr)
{
  auto pairs = precomputed ? *precomputed : discrete_eigenpairs(op);
  std::vector<Candidate> raw;
  for (auto &e : pairs)
  {
    if (all_raw)
      all_raw->push_back(e.lambda);
    if (!op.decoupled())
    {
      if (e.centroid < -0.5 || e.centroid >= 0.5)
        continue;
    }
    if (e.lambda.real() < o.window.re_min - 0.5 || e.lambda.real() > o.window.re_max + 0.5)
      continue;
    if (e.edge_energy > o.edge_tol)
    {
      if (e.lambda.real() >= o.window.re_min && e.lambda.real() <= o.window.re_max)
        edge_hit = true;
      continue;
    }
    CVector r = op.D().apply(e.vector) + e.lambda * op.A0().apply(e.vector);
    double scale = std::max(1.0, std::abs(e.lambda));
    raw.push_back({reduce_to_strip(e.lambda), e.lambda, r.norm() / scale, 1});
  }
  // Cluster (single linkage) on the reduced values.
  std::vector<Candidate> out;
  std::vector<bool> used(raw.size(), false);
  for (std::size_t i = 0; i < raw.size(); ++i)
  {
    if (used[i])
      continue;
    std::vector<std::size_t> members{i};
    used[i] = true;
    for (std::size_t k = 0; k < members.size(); ++k)
      for (std::size_t j = 0; j < raw.size(); ++j)
        if (!used[j] && lattice_distance(raw[members[k]].reduced, raw[j].reduced) < o.cluster_tol)
        {
          used[j] = true;
          members.push_back(j);
        }
    Candidate c = raw[i];
    cplx sum = 0.0;
    double res = 0.0;
    for (auto m : members)
    {
      cplx d = raw[m].reduced;
      double di = d.imag() - c.reduced.imag();
      d -= I * std::round(di);
      sum += d;
      res = std::max(res, raw[m].residual);
    }
    c.reduced = reduce_to_strip(sum / static_cast<double>(members.size()));
    c.count = static_cast<int>(members.size());
    c.residual = res;
    out.push_back(c);
  }
  return out;
}

inline bool passes_tail(const DiscreteOperator &op, const std::vector<DiscreteEigenpair> &pairs, cplx reduced,
                        double cluster_tol, double tail_tol)
{
  bool any = false;
  for (auto &e : pairs)
    if (lattice_distance(reduce_to_strip(e.lambda), reduced) < cluster_tol)
    {
      any = true;
      if (e.tail > tail_tol)
        return false;
    }
  (void)op;
  return any;
}
}  // namespace detail

/// Poles of z -> D_z^{-1} in the window, reduced to the fundamental strip.
/// A discrete eigenvalue is kept only if it persists within persistence_tol
/// when (M, Q_max) -> (2M, Q_max + 2) and the refined eigenvectors have a
/// Chebyshev tail below tail_tol.
inline PoleSet find_poles(const DiscreteOperator &op, const PoleSearchOptions &o = {})
{
  PoleSet ps;
  ps.window = o.window;
  bool edge = false;
  std::vector<cplx> raw_all;
  auto coarse = detail::reduced_spectrum(op, o, edge, &raw_all);

  DiscreteOperator fine_op(op.spec(), build_basis(op.basis().Q_max() + 2, 2 * op.basis().M()));
  auto fine_pairs = discrete_eigenpairs(fine_op);
  bool edge_fine = false;
  auto fine = detail::reduced_spectrum(fine_op, o, edge_fine, nullptr, &fine_pairs);
  ps.band_edge = edge;

  std::vector<detail::Candidate> kept;
  for (auto &c : coarse)
  {
    if (c.reduced.real() < o.window.re_min || c.reduced.real() > o.window.re_max)
      continue;
    const detail::Candidate *partner = nullptr;
    for (auto &f : fine)
      if (lattice_distance(f.reduced, c.reduced) < o.persistence_tol)
        partner = &f;
    if (!partner || partner->count != c.count ||
        !detail::passes_tail(fine_op, fine_pairs, partner->reduced, o.cluster_tol, o.tail_tol))
    {
      ++ps.rejected;
      continue;
    }
    kept.push_back(c);
  }

  std::sort(kept.begin(), kept.end(),
            [](auto &a, auto &b)
            {
              if (a.reduced.real() != b.reduced.real())
                return a.reduced.real() > b.reduced.real();
              return a.reduced.imag() < b.reduced.imag();
            });

  for (auto &c : kept)
  {
    Pole p;
    p.lambda = c.reduced;
    if (std::abs(p.lambda.real()) < 1e-12)
      p.lambda.real(0.0);
    if (std::abs(p.lambda.imag()) < 1e-12)
      p.lambda.imag(0.0);
    p.multiplicity = c.count;
    p.residual = c.residual;
    p.rank = c.count;
    // Centre on the discrete copy that lies in the strip.
    p.discrete = c.reduced;
    double d = std::numeric_limits<double>::infinity();
    for (auto z : raw_all)
    {
      // other eigenvalues of the full discrete operator, all Fourier copies
      for (int k = -op.basis().Q_max() - 1; k <= op.basis().Q_max() + 1; ++k)
      {
        cplx zz = op.decoupled() ? z - I * static_cast<double>(k) : z;
        double dist = std::abs(zz - p.discrete);
        if (dist > o.cluster_tol)
          d = std::min(d, dist);
        if (!op.decoupled())
          break;
      }
    }
    p.radius = std::min(o.max_radius, 0.5 * d);
    ps.poles.push_back(p);
  }

  if (o.compute_projections)
  {
    for (auto &p : ps.poles)
    {
      if (p.radius < 1e-6)
        throw Error(ErrorKind::contour, "pole at " + NearPoleError::format(p.lambda) +
                                            " is too close to another eigenvalue for a contour");
      auto P = projections(op, {p.discrete, p.radius, o.contour_nodes}, o.max_order);
      // The first moment about a centre c off the pole by d carries d P_0;
      // move the centre by the least-squares d once before reading the order.
      const cplx shift = detail::frobenius_inner(P[0].matrix, P[1].matrix) /
                         detail::frobenius_inner(P[0].matrix, P[0].matrix);
      if (std::abs(shift) > 1e-14 && std::abs(shift) < 0.25 * p.radius)
      {
        p.discrete += shift;
        P = projections(op, {p.discrete, p.radius, o.contour_nodes}, o.max_order);
      }
      const double n0 = detail::max_abs(P[0].matrix);
      p.order = o.max_order + 1;
      for (int m = 1; m <= o.max_order; ++m)
        if (detail::max_abs(P[m].matrix) <= std::max(1e-9 * n0, P[m].noise))
        {
          p.order = m;
          break;
        }
      p.rank = numerical_rank(detail::multiply(P[0].matrix, op.A0()));
    }
  }

  for (auto &p : ps.poles)
  {
    ps.z_star_star = std::max(ps.z_star_star, p.lambda.real());
    if (p.lambda.real() < -o.zero_tol)
      ps.z_star_star_star = std::max(ps.z_star_star_star, p.lambda.real());
    else
      ps.Lambda.push_back(p);
  }
  return ps;
}

inline PoleSet find_poles(const OperatorSpec &spec, std::shared_ptr<const SpectralBasis> basis,
                          const PoleSearchOptions &o = {})
{
  return find_poles(DiscreteOperator(spec, std::move(basis)), o);
}

// ---------------------------------------------------------------- checks

struct IdentityReport
{
  double resolvent_identity = 0.0;  // relative error
  double conjugation = 0.0;         // relative error on interior modes
  bool pass = false;
};

/// First resolvent identity D_w^{-1} - D_w'^{-1} = -(w - w') D_w^{-1} A0 D_w'^{-1}
/// and D_{w+i}^{-1} = e^{-ix0} D_w^{-1} e^{ix0} on interior modes.
inline IdentityReport verify_resolvent_identities(const DiscreteOperator &op, cplx w, cplx wp, double tol = 1e-10)
{
  IdentityReport r;
  auto Rw = ResolventSolver(op.assemble(w)).inverse();
  auto Rwp = ResolventSolver(op.assemble(wp)).inverse();
  CMatrix a = Rw.dense(), b = Rwp.dense(), A0 = op.A0().dense();
  CMatrix lhs = a - b + (w - wp) * a * A0 * b;
  double scale = a.norm() * b.norm() * std::max(1.0, std::abs(w - wp) * A0.norm()) + a.norm() + b.norm();
  r.resolvent_identity = lhs.norm() / scale;

  auto Rs = ResolventSolver(op.assemble(w + I)).inverse();
  const int Q = op.basis().Q_max();
  const int blk = op.A0().block;
  if (Q >= 1)
  {
    // Block (q, q') of R_{w+i} equals block (q+1, q'+1) of R_w; compare on
    // |q|, |q'| <= Q - 1 with the shifted index inside the band.
    CMatrix s = Rs.dense();
    double err = 0.0, nrm = 0.0;
    for (int q = -Q; q <= Q - 1; ++q)
      for (int qp = -Q; qp <= Q - 1; ++qp)
      {
        if (std::abs(q) > Q - 1 || std::abs(qp) > Q - 1)
          continue;
        if (op.decoupled() && q != qp)
          continue;
        CMatrix x = s.block((q + Q) * blk, (qp + Q) * blk, blk, blk);
        CMatrix y = a.block((q + 1 + Q) * blk, (qp + 1 + Q) * blk, blk, blk);
        err = std::max(err, (x - y).cwiseAbs().maxCoeff());
        nrm = std::max(nrm, y.cwiseAbs().maxCoeff());
      }
    r.conjugation = nrm > 0 ? err / nrm : err;
  }
  r.pass = r.resolvent_identity <= tol && r.conjugation <= tol;
  return r;
}

struct BoundReport
{
  double worst_ratio = 0.0;  // max lhs / rhs
  int samples = 0;
  int failures = 0;
  bool pass() const { return failures == 0; }
};

/// |||u|||_0 <= 2 e^{2 r_1 |Im z|} (xi + 1/R + |Xi|_0 r_1) |||D_z u|||_1 on random
/// band-limited u with Re z = z_star + 0.1 and random Im z in [-2, 2].
inline BoundReport resolvent_bound_check(const DiscreteOperator &op, int samples, std::mt19937_64 &rng,
                                       int q_band = -1, int degree = -1, double decay = 0.7)
{
  const auto &s = op.spec();
  if (!s.certificate)
    throw Error(ErrorKind::unverifiable, "bound check needs a certificate");
  auto k = stability_constants(s);
  const double r1 = s.sequence.r(1);
  if (r1 > k.rho_star * (1.0 + 1e-9))
    throw Error(ErrorKind::invalid_argument, "r_1 exceeds rho_star; the bound is not claimed");
  const double xi_norm = certificate_norm(s);
  std::uniform_real_distribution<double> im(-2.0, 2.0);
  BoundReport rep;
  for (int t = 0; t < samples; ++t)
  {
    const cplx z(k.z_star + 0.1, im(rng));
    auto u = random_band_limited(op.basis(), s.N, rng, q_band, degree, decay);
    auto lhs = triple_norm(u, 0, s, op.basis());
    auto du = op.assemble(z).apply(u);
    auto rhs = triple_norm(du, 1, s, op.basis());
    const double C = 2.0 * std::exp(2.0 * r1 * std::abs(z.imag())) * (s.certificate->xi + 1.0 / k.R + xi_norm * r1);
    const double bound = C * (rhs.value + rhs.tail_bound);
    rep.worst_ratio = std::max(rep.worst_ratio, lhs.value / (C * rhs.value));
    if (lhs.value > bound + lhs.tail_bound)
      ++rep.failures;
    ++rep.samples;
  }
  return rep;
}

/// Singular values (descending) of G^{1/2} D_z^{-1} G^{-1/2}, G the L2 Gram
/// matrix of the basis.
inline RVector weighted_resolvent_singular_values(const DiscreteOperator &op, cplx z)
{
  const SpectralBasis &b = op.basis();
  Eigen::SelfAdjointEigenSolver<RMatrix> es(b.gram());
  RVector ev = es.eigenvalues().cwiseMax(0.0);
  RMatrix half = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  RMatrix ihalf = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  const int N = op.N();
  const int P = b.n_nodes();
  CMatrix H = CMatrix::Zero(P * N, P * N), Hi = CMatrix::Zero(P * N, P * N);
  for (int m = 0; m < P; ++m)
    for (int k = 0; k < P; ++k)
      for (int c = 0; c < N; ++c)
      {
        H(m * N + c, k * N + c) = half(m, k);
        Hi(m * N + c, k * N + c) = ihalf(m, k);
      }
  auto R = ResolventSolver(op.assemble(z)).inverse();
  std::vector<double> sv;
  if (R.decoupled)
  {
    for (auto &blk : R.blocks)
    {
      Eigen::JacobiSVD<CMatrix> svd(H * blk * Hi);
      for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k)
        sv.push_back(svd.singularValues()(k));
    }
  }
  else
  {
    const int nb = 2 * b.Q_max() + 1;
    CMatrix Hf = CMatrix::Zero(nb * P * N, nb * P * N), Hif = Hf;
    for (int q = 0; q < nb; ++q)
    {
      Hf.block(q * P * N, q * P * N, P * N, P * N) = H;
      Hif.block(q * P * N, q * P * N, P * N, P * N) = Hi;
    }
    Eigen::JacobiSVD<CMatrix> svd(Hf * R.full * Hif);
    for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k)
      sv.push_back(svd.singularValues()(k));
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return Eigen::Map<RVector>(sv.data(), static_cast<Eigen::Index>(sv.size()));
}

}  // namespace cylspec
