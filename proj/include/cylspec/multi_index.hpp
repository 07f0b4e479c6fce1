// SPDX-License-Identifier: Apache-2.0
#pragma once

// Multi-index enumeration and the two combinatorial identities behind the
// Sobolev-seminorm estimates. Everything here is exact: weights are integers
// and the identities are checked over rationals.

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "core.hpp"

namespace cylspec
{

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

using MultiIndex = std::vector<int>;

struct WeightedIndex
{
  MultiIndex alpha;
  BigInt weight;  // |alpha|! / alpha!
};

inline BigInt big_factorial(int k)
{
  BigInt r = 1;
  for (int i = 2; i <= k; ++i)
    r *= i;
  return r;
}

inline BigInt multi_factorial(const MultiIndex &alpha)
{
  BigInt r = 1;
  for (int a : alpha)
    r *= big_factorial(a);
  return r;
}

inline BigInt big_binomial(int n, int k)
{
  if (k < 0 || k > n)
    return 0;
  return big_factorial(n) / (big_factorial(k) * big_factorial(n - k));
}

/// All alpha in N0^{n_vars} with |alpha| = order, in lexicographically
/// descending order (so (2,0) precedes (1,1) precedes (0,2)).
inline std::vector<MultiIndex> enumerate_indices(int n_vars, int order)
{
  std::vector<MultiIndex> out;
  if (n_vars <= 0 || order < 0)
    return out;
  MultiIndex cur(n_vars, 0);
  std::function<void(int, int)> rec = [&](int pos, int remaining)
  {
    if (pos == n_vars - 1)
    {
      cur[pos] = remaining;
      out.push_back(cur);
      return;
    }
    for (int a = remaining; a >= 0; --a)
    {
      cur[pos] = a;
      rec(pos + 1, remaining - a);
    }
  };
  rec(0, order);
  return out;
}

/// Multi-indices of a given order together with their multinomial weights.
inline std::vector<WeightedIndex> multi_indices(int n_vars, int order)
{
  std::vector<WeightedIndex> out;
  const BigInt top = big_factorial(order);
  for (auto &a : enumerate_indices(n_vars, order))
    out.push_back({a, top / multi_factorial(a)});
  return out;
}

/// Sum of the multinomial weights; equals n_vars^order.
inline BigInt weight_sum(int n_vars, int order)
{
  BigInt s = 0;
  for (auto &w : multi_indices(n_vars, order))
    s += w.weight;
  return s;
}

// Collection c_alpha indexed by multi-index.
template <typename T>
using IndexedCollection = std::map<MultiIndex, T>;

namespace detail
{
template <typename T>
T lookup(const IndexedCollection<T> &c, const MultiIndex &a)
{
  auto it = c.find(a);
  return it == c.end() ? T(0) : it->second;
}
}  // namespace detail

/// Both sides of
///   sum_{|b|=l-1} (l-1)!/b! sum_i c_{b+e_i}  =  sum_{|a|=l} l!/a! c_a.
template <typename T>
std::pair<T, T> combinatorial_sides(int n_vars, int order, const IndexedCollection<T> &c)
{
  T lhs(0), rhs(0);
  for (auto &b : multi_indices(n_vars, order - 1))
  {
    T inner(0);
    for (int i = 0; i < n_vars; ++i)
    {
      MultiIndex a = b.alpha;
      a[i] += 1;
      inner += detail::lookup(c, a);
    }
    lhs += T(b.weight) * inner;
  }
  for (auto &a : multi_indices(n_vars, order))
    rhs += T(a.weight) * detail::lookup(c, a.alpha);
  return {lhs, rhs};
}

/// Exact check over rationals (used for integer/rational collections).
inline bool check_combinatorial_identity(int n_vars, int order,
                                         const IndexedCollection<Rational> &c)
{
  auto [lhs, rhs] = combinatorial_sides(n_vars, order, c);
  return lhs == rhs;
}

/// Floating-point check for complex data, relative tolerance 1e-12.
inline bool check_combinatorial_identity(int n_vars, int order,
                                         const IndexedCollection<cplx> &c)
{
  std::pair<cplx, cplx> sides{0.0, 0.0};
  double scale = 0.0;
  for (auto &b : multi_indices(n_vars, order - 1))
  {
    cplx inner = 0.0;
    for (int i = 0; i < n_vars; ++i)
    {
      MultiIndex a = b.alpha;
      a[i] += 1;
      inner += detail::lookup(c, a);
    }
    sides.first += b.weight.convert_to<double>() * inner;
  }
  for (auto &a : multi_indices(n_vars, order))
  {
    cplx v = a.weight.convert_to<double>() * detail::lookup(c, a.alpha);
    sides.second += v;
    scale += std::abs(v);
  }
  return std::abs(sides.first - sides.second) <= 1e-12 * std::max(1.0, scale);
}

/// Brute-force coefficient c_gamma for |gamma| = l-k+1 (n spatial dimensions,
/// n+1 index slots):
///   gamma!/(l-k+1)! sum_{|a|=l} l!/a! sum_{b<=a,|b|=k} sum_i b!/k! C(a,b)^2 [a-b+e_i = gamma].
inline std::map<MultiIndex, Rational> cgamma_table(int n, int order, int k)
{
  const int n_vars = n + 1;
  std::map<MultiIndex, Rational> table;
  for (auto &g : enumerate_indices(n_vars, order - k + 1))
    table[g] = 0;
  for (auto &a : multi_indices(n_vars, order))
  {
    for (auto &b : enumerate_indices(n_vars, k))
    {
      bool le = true;
      BigInt choose = 1;
      for (int i = 0; i < n_vars && le; ++i)
      {
        if (b[i] > a.alpha[i])
          le = false;
        else
          choose *= big_binomial(a.alpha[i], b[i]);
      }
      if (!le)
        continue;
      const Rational term =
          Rational(a.weight) * Rational(multi_factorial(b), big_factorial(k)) * Rational(choose * choose);
      for (int i = 0; i < n_vars; ++i)
      {
        MultiIndex g(n_vars);
        for (int j = 0; j < n_vars; ++j)
          g[j] = a.alpha[j] - b[j] + (j == i ? 1 : 0);
        table[g] += term;
      }
    }
  }
  for (auto &[g, v] : table)
    v *= Rational(multi_factorial(g), big_factorial(order - k + 1));
  return table;
}

/// True iff every c_gamma equals C(l,k) * C(l+n,k).
inline bool check_cgamma_identity(int n, int order, int k)
{
  if (k < 0 || k > order)
    throw Error(ErrorKind::invalid_argument, "cgamma identity requires 0 <= k <= l");
  const Rational expected = Rational(big_binomial(order, k) * big_binomial(order + n, k));
  for (auto &[g, v] : cgamma_table(n, order, k))
    if (v != expected)
      return false;
  return true;
}

}  // namespace cylspec
