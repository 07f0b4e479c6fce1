// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace cylspec
{

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

// Positive-semidefinite tolerance used by every assumption check.
inline constexpr double tol_psd = 1e-10;

enum class ErrorKind
{
  schema,
  invalid_argument,
  outside_domain,
  unsupported,
  near_pole,
  contour,
  convergence,
  cfl,
  instability,
  unverifiable,
  guard,
  non_affine,
  resonance,
  io
};

inline const char *to_string(ErrorKind kind)
{
  switch (kind)
  {
    case ErrorKind::schema:
      return "schema";
    case ErrorKind::invalid_argument:
      return "invalid_argument";
    case ErrorKind::outside_domain:
      return "outside_domain";
    case ErrorKind::unsupported:
      return "unsupported";
    case ErrorKind::near_pole:
      return "near_pole";
    case ErrorKind::contour:
      return "contour";
    case ErrorKind::convergence:
      return "convergence";
    case ErrorKind::cfl:
      return "cfl";
    case ErrorKind::instability:
      return "instability";
    case ErrorKind::unverifiable:
      return "unverifiable";
    case ErrorKind::guard:
      return "guard";
    case ErrorKind::non_affine:
      return "non_affine";
    case ErrorKind::resonance:
      return "resonance";
    case ErrorKind::io:
      return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

// Raised when D_z is numerically singular; carries the closest discrete eigenvalue.
class NearPoleError : public Error
{
public:
  NearPoleError(cplx z, cplx nearest)
    : Error(ErrorKind::near_pole, "near-pole: z = " + format(z) +
                                      " is within tolerance of eigenvalue " + format(nearest)),
      z_(z), nearest_(nearest)
  {
  }
  cplx z() const noexcept { return z_; }
  cplx nearest_eigenvalue() const noexcept { return nearest_; }

  static std::string format(cplx z)
  {
    return "(" + std::to_string(z.real()) + (z.imag() < 0 ? " - " : " + ") +
           std::to_string(std::abs(z.imag())) + "i)";
  }

private:
  cplx z_;
  cplx nearest_;
};

// Worker count, bounded by CYLSPEC_THREADS when set.
inline unsigned worker_count()
{
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char *env = std::getenv("CYLSPEC_THREADS"))
  {
    int v = std::atoi(env);
    if (v >= 1)
      hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

// Runs fn(i) for i in [0, n). Each index owns its output slot, so results do not
// depend on the number of workers.
template <typename Fn>
void parallel_for(std::size_t n, Fn &&fn)
{
  const unsigned workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1)
  {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
  {
    pool.emplace_back(
        [&, w]
        {
          for (std::size_t i = w; i < n; i += workers)
            fn(i);
        });
  }
}

// Smallest eigenvalue of a Hermitian matrix (Hermitian part is taken first).
inline double min_hermitian_eigenvalue(const CMatrix &m)
{
  CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_hermitian_eigenvalue(const CMatrix &m)
{
  CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double factorial(int k)
{
  double r = 1.0;
  for (int i = 2; i <= k; ++i)
    r *= i;
  return r;
}

inline double binomial(int n, int k)
{
  if (k < 0 || k > n)
    return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i)
    r = r * (n - k + i) / i;
  return r;
}

}  // namespace cylspec
