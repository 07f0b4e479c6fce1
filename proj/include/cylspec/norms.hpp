// SPDX-License-Identifier: Apache-2.0
#pragma once

// Sobolev seminorms ||u||_l and truncated triple-bar norms |||u|||_h of grid
// functions on the n = 1 cylinder.

#include <cmath>
#include <limits>
#include <vector>

#include "multi_index.hpp"
#include "operator_model.hpp"
#include "spectral.hpp"

namespace cylspec
{

/// (sum_{|alpha|=l} l!/alpha! ||d^alpha u||^2)^{1/2}.
inline double sobolev_seminorm(const GridFunction &u, int l, const SpectralBasis &b)
{
  if (l < 0)
    throw Error(ErrorKind::invalid_argument, "seminorm order must be nonnegative");
  check_derivative_guard(b, l);
  double s = 0.0;
  // d^alpha with alpha = (a0, a1): take x1 derivatives once per a1 and scale
  // Fourier modes by (iq)^a0, whose norm factor is |q|^a0.
  std::vector<std::vector<double>> energy{mode_energies(b, u)};
  GridFunction v = u;
  for (int a1 = 1; a1 <= l; ++a1)
  {
    v = apply_derivative(v, {0, 1}, b);
    energy.push_back(mode_energies(b, v));
  }
  for (auto &a : multi_indices(2, l))
  {
    const int a0 = a.alpha[0], a1 = a.alpha[1];
    double acc = 0.0;
    for (int q = -u.Q; q <= u.Q; ++q)
    {
      if (a0 > 0 && q == 0)
        continue;
      double f = a0 == 0 ? 1.0 : std::pow(std::abs(static_cast<double>(q)), 2.0 * a0);
      acc += f * energy[a1][q + u.Q];
    }
    s += a.weight.convert_to<double>() * acc;
  }
  return std::sqrt(std::max(0.0, s));
}

struct NormProfile
{
  std::vector<double> seminorms;  // ||u||_0 .. ||u||_Lmax
  double triple0 = 0.0;
  double triple1 = 0.0;
  double tail_bound = 0.0;
  bool tail_flag = false;  // tail bound exceeds 1e-10 of the value

  json to_json() const
  {
    return {{"seminorms", seminorms},
            {"triple0", triple0},
            {"triple1", triple1},
            {"tail_bound", tail_bound},
            {"tail_flag", tail_flag}};
  }
};

struct TripleNorm
{
  double value = 0.0;
  double tail_bound = 0.0;
  bool tail_flag = false;
  std::vector<double> terms;  // r_l ||u||_l / (l+h)!
};

namespace detail
{
inline TripleNorm triple_from_seminorms(const std::vector<double> &semi, int h, const WeightSequence &seq)
{
  TripleNorm t;
  const int L = static_cast<int>(semi.size()) - 1;
  for (int l = 0; l <= L; ++l)
  {
    double term = seq.r(l) * semi[l] / factorial(l + h);
    t.terms.push_back(term);
    t.value += term;
  }
  t.tail_bound = L >= 1 ? series_tail(t.terms[L], t.terms[L - 1]) : 0.0;
  if (!std::isfinite(t.tail_bound))
    throw Error(ErrorKind::convergence, "triple norm terms do not decay at Lmax");
  t.tail_flag = t.tail_bound > 1e-10 * t.value;
  return t;
}
}  // namespace detail

inline std::vector<double> seminorm_profile(const GridFunction &u, int Lmax, const SpectralBasis &b)
{
  std::vector<double> out(Lmax + 1);
  parallel_for(out.size(), [&](std::size_t l) { out[l] = sobolev_seminorm(u, static_cast<int>(l), b); });
  return out;
}

/// sum_{l <= Lmax} r_l ||u||_l / (l+h)! plus a ratio-test tail bound.
inline TripleNorm triple_norm(const GridFunction &u, int h, const WeightSequence &seq, int Lmax,
                              const SpectralBasis &b)
{
  if (h != 0 && h != 1)
    throw Error(ErrorKind::invalid_argument, "h must be 0 or 1");
  return detail::triple_from_seminorms(seminorm_profile(u, Lmax, b), h, seq);
}

inline TripleNorm triple_norm(const GridFunction &u, int h, const OperatorSpec &s, const SpectralBasis &b)
{
  return triple_norm(u, h, s.sequence, s.Lmax, b);
}

inline NormProfile norm_profile(const GridFunction &u, const OperatorSpec &s, const SpectralBasis &b)
{
  NormProfile p;
  p.seminorms = seminorm_profile(u, s.Lmax, b);
  auto t0 = detail::triple_from_seminorms(p.seminorms, 0, s.sequence);
  auto t1 = detail::triple_from_seminorms(p.seminorms, 1, s.sequence);
  p.triple0 = t0.value;
  p.triple1 = t1.value;
  p.tail_bound = std::max(t0.tail_bound, t1.tail_bound);
  p.tail_flag = t0.tail_flag || t1.tail_flag;
  return p;
}

}  // namespace cylspec
