// SPDX-License-Identifier: Apache-2.0
#pragma once

// Operator D = A^i d_i + B on (R/2piZ) x (closed unit n-ball): fixtures,
// JSON loading, assumption checks (i)-(iv) and the derived constants.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "multi_index.hpp"
#include "polynomial.hpp"

namespace cylspec
{

using json = nlohmann::json;

struct Certificate
{
  double xi = 0.0;
  std::vector<MatrixPolynomial> Xi;  // 1+n entries
};

class WeightSequence
{
public:
  WeightSequence() = default;

  static WeightSequence geometric(double kappa)
  {
    if (!(kappa > 0.0 && kappa <= 1.0))
      throw Error(ErrorKind::schema, "kappa must lie in (0,1]");
    WeightSequence s;
    s.kappa_ = kappa;
    return s;
  }

  static WeightSequence explicit_list(std::vector<double> r)
  {
    if (r.empty() || r[0] != 1.0)
      throw Error(ErrorKind::schema, "sequence requires r_0 = 1");
    for (double v : r)
      if (!(v >= 0.0))
        throw Error(ErrorKind::schema, "sequence entries must be nonnegative");
    for (std::size_t k = 0; k < r.size(); ++k)
      for (std::size_t l = 0; k + l < r.size(); ++l)
        if (r[k + l] > r[k] * r[l] * (1.0 + 1e-15))
          throw Error(ErrorKind::schema, "sequence is not submultiplicative: r_" +
                                             std::to_string(k + l) + " > r_" + std::to_string(k) +
                                             " r_" + std::to_string(l));
    WeightSequence s;
    s.list_ = std::move(r);
    return s;
  }

  /// r_l; explicit lists are zero past their last stored entry.
  double r(int l) const
  {
    if (kappa_)
      return std::pow(*kappa_, l);
    return l < static_cast<int>(list_.size()) ? list_[l] : 0.0;
  }

  /// The sequence (c^l r_l).
  WeightSequence scaled(double c) const
  {
    WeightSequence s = *this;
    if (kappa_)
      s.kappa_ = *kappa_ * c;
    for (std::size_t l = 0; l < s.list_.size(); ++l)
      s.list_[l] *= std::pow(c, static_cast<double>(l));
    return s;
  }

  std::optional<double> kappa() const { return kappa_; }
  const std::vector<double> &list() const { return list_; }

private:
  std::optional<double> kappa_ = 1.0;
  std::vector<double> list_;
};

struct OperatorSpec
{
  std::string name;
  int n = 1;
  int N = 1;
  std::vector<MatrixPolynomial> A;  // A^0..A^n
  MatrixPolynomial B;
  std::optional<Certificate> certificate;
  WeightSequence sequence;
  double Q = 1.0;
  int Lmax = 16;

  bool x0_independent() const
  {
    for (auto &a : A)
      if (!a.x0_independent())
        return false;
    return B.x0_independent();
  }
};

// ---------------------------------------------------------------- fixtures

namespace detail
{
inline MonomialKey key(int n, int fourier = 0, std::vector<int> powers = {})
{
  if (powers.empty())
    powers.assign(n, 0);
  return {fourier, powers};
}

inline CMatrix scalar(cplx v)
{
  CMatrix m(1, 1);
  m(0, 0) = v;
  return m;
}

// A^0 = 1, A^1 = mu (x - xs), B = b; scalar n = 1 model.
inline OperatorSpec scalar_transport(const std::string &name, double mu, double xs, double b)
{
  OperatorSpec s;
  s.name = name;
  s.n = 1;
  s.N = 1;
  MatrixPolynomial a0(1, 1), a1(1, 1), bb(1, 1);
  a0.add_term(key(1), scalar(1.0));
  a1.add_term(key(1, 0, {1}), scalar(mu));
  a1.add_term(key(1), scalar(-mu * xs));
  bb.add_term(key(1), scalar(b));
  s.A = {a0, a1};
  s.B = bb;
  Certificate c;
  c.xi = 6.0;
  c.Xi = {MatrixPolynomial::constant(1, scalar(2.0)), MatrixPolynomial(1, 1)};
  s.certificate = c;
  s.sequence = WeightSequence::geometric(0.024);
  s.Q = 1.0;
  s.Lmax = 16;
  return s;
}

inline OperatorSpec example_two(double mu)
{
  OperatorSpec s;
  s.name = "EX2";
  s.n = 3;
  s.N = 2;
  const CMatrix id = CMatrix::Identity(2, 2);
  CMatrix p1(2, 2), p2(2, 2), p3(2, 2);
  p1 << 0, 1, 1, 0;
  p2 << 0, I, -I, 0;
  p3 << 1, 0, 0, -1;
  std::array<CMatrix, 3> pauli{p1, p2, p3};
  s.A.push_back(MatrixPolynomial::constant(3, id));
  for (int j = 0; j < 3; ++j)
  {
    MatrixPolynomial a(3, 2);
    a.add_term(key(3), mu * pauli[j]);
    std::vector<int> pw(3, 0);
    pw[j] = 1;
    a.add_term(key(3, 0, pw), mu * id);
    s.A.push_back(a);
  }
  s.B = MatrixPolynomial(3, 2);
  Certificate c;
  c.xi = 8.0;
  c.Xi = {MatrixPolynomial::constant(3, 2.0 * id), MatrixPolynomial(3, 2), MatrixPolynomial(3, 2),
          MatrixPolynomial(3, 2)};
  s.certificate = c;
  s.sequence = WeightSequence::geometric(0.006);
  s.Q = 3.0;
  s.Lmax = 16;
  return s;
}

inline OperatorSpec jordan_pair()
{
  OperatorSpec s;
  s.name = "SYN-JORDAN";
  s.n = 1;
  s.N = 2;
  const CMatrix id = CMatrix::Identity(2, 2);
  MatrixPolynomial a0 = MatrixPolynomial::constant(1, id);
  MatrixPolynomial a1(1, 2);
  a1.add_term(key(1, 0, {1}), 0.5 * id);
  CMatrix nil = CMatrix::Zero(2, 2);
  nil(0, 1) = 1.0;
  s.A = {a0, a1};
  s.B = MatrixPolynomial::constant(1, nil);
  Certificate c;
  c.xi = 6.0;
  c.Xi = {MatrixPolynomial::constant(1, 2.0 * id), MatrixPolynomial(1, 2)};
  s.certificate = c;
  s.sequence = WeightSequence::geometric(0.024);
  s.Q = 1.0;
  return s;
}
}  // namespace detail

inline std::vector<std::string> fixture_names()
{
  return {"EX1", "EX1S", "EX2", "CE-BDY", "CE-FLAT", "SYN-JORDAN"};
}

/// Built-in operators. SYN-JORDAN (constant nilpotent B) has order-2 poles.
inline OperatorSpec fixture(const std::string &name)
{
  if (name == "EX1")
    return detail::scalar_transport(name, 0.5, 0.0, 0.0);
  if (name == "EX1S")
    return detail::scalar_transport(name, 0.5, 0.0, -0.75);
  if (name == "CE-BDY")
    return detail::scalar_transport(name, 0.5, -1.5, 0.0);
  if (name == "CE-FLAT")
    return detail::scalar_transport(name, 0.0, 0.0, 0.0);
  if (name == "EX2")
    return detail::example_two(0.5);
  if (name == "SYN-JORDAN")
    return detail::jordan_pair();
  throw Error(ErrorKind::invalid_argument, "unknown fixture '" + name + "'");
}

// ---------------------------------------------------------------- JSON

namespace detail
{
inline cplx parse_entry(const json &e)
{
  if (e.is_number())
    return {e.get<double>(), 0.0};
  if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
    return {e[0].get<double>(), e[1].get<double>()};
  throw Error(ErrorKind::schema, "matrix entry must be a number or [re, im]");
}

inline CMatrix parse_matrix(const json &m, int N)
{
  if (!m.is_array() || static_cast<int>(m.size()) != N)
    throw Error(ErrorKind::schema, "matrix must have N = " + std::to_string(N) + " rows");
  CMatrix out(N, N);
  for (int r = 0; r < N; ++r)
  {
    if (!m[r].is_array() || static_cast<int>(m[r].size()) != N)
      throw Error(ErrorKind::schema, "matrix must be square (N x N)");
    for (int c = 0; c < N; ++c)
      out(r, c) = parse_entry(m[r][c]);
  }
  return out;
}

inline MatrixPolynomial parse_poly(const json &p, int n, int N)
{
  if (!p.is_array())
    throw Error(ErrorKind::schema, "polynomial must be a list of terms");
  MatrixPolynomial out(n, N);
  for (auto &t : p)
  {
    if (!t.is_object() || !t.contains("alpha") || !t.contains("matrix"))
      throw Error(ErrorKind::schema, "term requires 'alpha' and 'matrix'");
    auto alpha = t["alpha"].get<std::vector<int>>();
    if (static_cast<int>(alpha.size()) != n + 1)
      throw Error(ErrorKind::schema, "alpha must have 1+n entries");
    if (alpha[0] != 0)
      throw Error(ErrorKind::schema,
                  "alpha[0] must be 0; express x0-dependence with the 'fourier' index");
    int fourier = t.value("fourier", 0);
    out.add_term({fourier, std::vector<int>(alpha.begin() + 1, alpha.end())},
                 parse_matrix(t["matrix"], N));
  }
  return out;
}

inline json poly_to_json(const MatrixPolynomial &p)
{
  json terms = json::array();
  for (const auto &[k, c] : p.terms())
  {
    json t;
    std::vector<int> alpha{0};
    alpha.insert(alpha.end(), k.powers.begin(), k.powers.end());
    t["alpha"] = alpha;
    if (k.fourier != 0)
      t["fourier"] = k.fourier;
    json m = json::array();
    for (int r = 0; r < c.rows(); ++r)
    {
      json row = json::array();
      for (int col = 0; col < c.cols(); ++col)
        row.push_back({c(r, col).real(), c(r, col).imag()});
      m.push_back(row);
    }
    t["matrix"] = m;
    terms.push_back(t);
  }
  return terms;
}
}  // namespace detail

/// Builds a spec from a config document. {"fixture": NAME} selects a built-in
/// operator; any other keys present override the fixture's fields.
inline OperatorSpec load_spec(const json &doc)
{
  if (!doc.is_object())
    throw Error(ErrorKind::schema, "config must be a JSON object");
  try
  {
    OperatorSpec s;
    const bool from_fixture = doc.contains("fixture");
    if (from_fixture)
      s = fixture(doc["fixture"].get<std::string>());
    else
    {
      for (const char *k : {"n", "N", "A", "B"})
        if (!doc.contains(k))
          throw Error(ErrorKind::schema, std::string("missing key '") + k + "'");
      s.name = doc.value("name", std::string("config"));
      s.n = doc["n"].get<int>();
      s.N = doc["N"].get<int>();
      if (s.n < 1 || s.N < 1)
        throw Error(ErrorKind::schema, "n and N must be positive");
      s.certificate.reset();
      s.sequence = WeightSequence::geometric(1.0);
    }
    if (doc.contains("A"))
    {
      if (!doc["A"].is_array() || static_cast<int>(doc["A"].size()) != s.n + 1)
        throw Error(ErrorKind::schema, "A must list 1+n polynomials");
      s.A.clear();
      for (auto &p : doc["A"])
        s.A.push_back(detail::parse_poly(p, s.n, s.N));
    }
    if (doc.contains("B"))
      s.B = detail::parse_poly(doc["B"], s.n, s.N);
    if (doc.contains("certificate"))
    {
      const json &c = doc["certificate"];
      if (c.is_null())
        s.certificate.reset();
      else
      {
        Certificate cert;
        cert.xi = c.at("xi").get<double>();
        if (!(cert.xi > 0.0))
          throw Error(ErrorKind::schema, "certificate xi must be positive");
        if (!c.contains("Xi") || static_cast<int>(c["Xi"].size()) != s.n + 1)
          throw Error(ErrorKind::schema, "certificate Xi must list 1+n polynomials");
        for (auto &p : c["Xi"])
          cert.Xi.push_back(detail::parse_poly(p, s.n, s.N));
        s.certificate = cert;
      }
    }
    if (doc.contains("sequence"))
    {
      const json &q = doc["sequence"];
      if (q.contains("r"))
        s.sequence = WeightSequence::explicit_list(q["r"].get<std::vector<double>>());
      else if (q.contains("kappa"))
        s.sequence = WeightSequence::geometric(q["kappa"].get<double>());
      s.Lmax = q.value("Lmax", s.Lmax);
    }
    if (doc.contains("Q"))
      s.Q = doc["Q"].get<double>();
    if (!(s.Q > 0.0))
      throw Error(ErrorKind::schema, "Q must be positive");
    if (s.Lmax < 1)
      throw Error(ErrorKind::schema, "Lmax must be at least 1");
    if (s.A.size() != static_cast<std::size_t>(s.n + 1))
      throw Error(ErrorKind::schema, "A must list 1+n polynomials");
    if (s.B.size() == 0)
      s.B = MatrixPolynomial(s.n, s.N);
    return s;
  }
  catch (const json::exception &e)
  {
    throw Error(ErrorKind::schema, std::string("config: ") + e.what());
  }
}

inline json spec_to_json(const OperatorSpec &s)
{
  json j;
  j["name"] = s.name;
  j["n"] = s.n;
  j["N"] = s.N;
  j["A"] = json::array();
  for (auto &a : s.A)
    j["A"].push_back(detail::poly_to_json(a));
  j["B"] = detail::poly_to_json(s.B);
  if (s.certificate)
  {
    j["certificate"]["xi"] = s.certificate->xi;
    j["certificate"]["Xi"] = json::array();
    for (auto &x : s.certificate->Xi)
      j["certificate"]["Xi"].push_back(detail::poly_to_json(x));
  }
  if (s.sequence.kappa())
    j["sequence"]["kappa"] = *s.sequence.kappa();
  else
    j["sequence"]["r"] = s.sequence.list();
  j["sequence"]["Lmax"] = s.Lmax;
  j["Q"] = s.Q;
  return j;
}

// ---------------------------------------------------------------- sampling

struct Coefficients
{
  std::vector<CMatrix> A;
  CMatrix B;
};

inline bool in_domain(const std::vector<double> &x, double tol = 1e-12)
{
  double r2 = 0.0;
  for (double v : x)
    r2 += v * v;
  return r2 <= 1.0 + tol;
}

inline Coefficients eval_coefficients(const OperatorSpec &s, double x0, const std::vector<double> &x)
{
  if (static_cast<int>(x.size()) != s.n)
    throw Error(ErrorKind::invalid_argument, "point must have n spatial coordinates");
  if (!std::isfinite(x0) || !in_domain(x))
    throw Error(ErrorKind::outside_domain, "point lies outside the closed unit ball");
  const double t = std::fmod(std::fmod(x0, two_pi) + two_pi, two_pi);
  Coefficients c;
  for (auto &a : s.A)
    c.A.push_back(a.evaluate(t, x));
  c.B = s.B.evaluate(t, x);
  return c;
}

struct SamplePoint
{
  double x0;
  std::vector<double> x;
};

/// Tensor grid of `density` points per coordinate clipped to the ball, plus
/// boundary points; x0 is sampled only when some polynomial depends on it.
inline std::vector<SamplePoint> interior_samples(int n, int density, bool x0_dependent)
{
  density = std::max(density, 2);
  std::vector<double> line(density);
  for (int i = 0; i < density; ++i)
    line[i] = -1.0 + 2.0 * i / (density - 1);
  std::vector<std::vector<double>> spatial;
  std::vector<int> idx(n, 0);
  while (true)
  {
    std::vector<double> x(n);
    for (int j = 0; j < n; ++j)
      x[j] = line[idx[j]];
    if (in_domain(x, 1e-12))
      spatial.push_back(x);
    int j = 0;
    while (j < n && ++idx[j] == density)
      idx[j++] = 0;
    if (j == n)
      break;
  }
  std::vector<double> times{0.0};
  if (x0_dependent)
  {
    times.clear();
    for (int i = 0; i < density; ++i)
      times.push_back(two_pi * i / density);
  }
  std::vector<SamplePoint> out;
  for (double t : times)
    for (auto &x : spatial)
      out.push_back({t, x});
  return out;
}

/// Points on the boundary sphere with outward normal omega = x.
inline std::vector<SamplePoint> boundary_samples(int n, int density, bool x0_dependent)
{
  std::vector<std::vector<double>> spatial;
  if (n == 1)
    spatial = {{-1.0}, {1.0}};
  else
  {
    // Normalized tensor-grid points on the faces of the cube [-1,1]^n.
    density = std::max(density, 2);
    std::vector<double> line(density);
    for (int i = 0; i < density; ++i)
      line[i] = -1.0 + 2.0 * i / (density - 1);
    std::vector<int> idx(n, 0);
    while (true)
    {
      std::vector<double> x(n);
      bool face = false;
      for (int j = 0; j < n; ++j)
      {
        x[j] = line[idx[j]];
        face = face || idx[j] == 0 || idx[j] == density - 1;
      }
      if (face)
      {
        double r = 0.0;
        for (double v : x)
          r += v * v;
        r = std::sqrt(r);
        for (double &v : x)
          v /= r;
        spatial.push_back(x);
      }
      int j = 0;
      while (j < n && ++idx[j] == density)
        idx[j++] = 0;
      if (j == n)
        break;
    }
  }
  std::vector<double> times{0.0};
  if (x0_dependent)
  {
    times.clear();
    for (int i = 0; i < density; ++i)
      times.push_back(two_pi * i / density);
  }
  std::vector<SamplePoint> out;
  for (double t : times)
    for (auto &x : spatial)
      out.push_back({t, x});
  return out;
}

// ---------------------------------------------------------------- norms

namespace detail
{
// sup_x sqrt(lambda_max(sum_{|alpha|=k} sum_i (k!/alpha!) d^alpha P_i (d^alpha P_i)^*)),
// i.e. the largest singular value of the weighted block row of derivatives.
inline double stacked_derivative_norm(const std::vector<MatrixPolynomial> &polys, int n, int k,
                                      const std::vector<SamplePoint> &pts)
{
  std::vector<std::pair<double, MatrixPolynomial>> terms;
  for (auto &a : multi_indices(n + 1, k))
    for (auto &p : polys)
    {
      MatrixPolynomial d = p.derivative(a.alpha);
      if (!d.empty())
        terms.emplace_back(a.weight.convert_to<double>(), std::move(d));
    }
  if (terms.empty())
    return 0.0;
  std::vector<double> best(pts.size(), 0.0);
  parallel_for(pts.size(),
               [&](std::size_t i)
               {
                 const int N = terms.front().second.size();
                 CMatrix g = CMatrix::Zero(N, N);
                 for (auto &[w, d] : terms)
                 {
                   CMatrix v = d.evaluate(pts[i].x0, pts[i].x);
                   g += w * v * v.adjoint();
                 }
                 best[i] = std::sqrt(std::max(0.0, max_hermitian_eigenvalue(g)));
               });
  return *std::max_element(best.begin(), best.end());
}

inline bool any_x0_dependence(const OperatorSpec &s)
{
  if (!s.x0_independent())
    return true;
  if (s.certificate)
    for (auto &x : s.certificate->Xi)
      if (!x.x0_independent())
        return true;
  return false;
}

inline std::vector<SamplePoint> norm_samples(const OperatorSpec &s, int density)
{
  auto pts = interior_samples(s.n, density, any_x0_dependence(s));
  auto bd = boundary_samples(s.n, density, any_x0_dependence(s));
  pts.insert(pts.end(), bd.begin(), bd.end());
  return pts;
}
}  // namespace detail

struct DerivativeNorms
{
  double A = 0.0;
  double B = 0.0;
  double A0 = 0.0;
};

inline int default_sample_density() { return 64; }

inline DerivativeNorms derivative_norms(const OperatorSpec &s, int k,
                                        int density = default_sample_density())
{
  if (k < 0)
    throw Error(ErrorKind::invalid_argument, "derivative order must be nonnegative");
  const auto pts = detail::norm_samples(s, density);
  DerivativeNorms d;
  d.A = detail::stacked_derivative_norm(s.A, s.n, k, pts);
  d.B = detail::stacked_derivative_norm({s.B}, s.n, k, pts);
  d.A0 = detail::stacked_derivative_norm({s.A[0]}, s.n, k, pts);
  return d;
}

// ---------------------------------------------------------------- report

enum class CheckStatus
{
  pass,
  fail,
  unverifiable
};

inline const char *to_string(CheckStatus s)
{
  switch (s)
  {
    case CheckStatus::pass:
      return "pass";
    case CheckStatus::fail:
      return "fail";
    case CheckStatus::unverifiable:
      return "unverifiable";
  }
  return "unknown";
}

struct Witness
{
  double x0 = 0.0;
  std::vector<double> x;
  double min_eigenvalue = 0.0;
};

struct AssumptionResult
{
  std::string name;
  CheckStatus status = CheckStatus::pass;
  std::string detail;
  double worst = std::numeric_limits<double>::infinity();  // smallest tested eigenvalue / margin
  std::vector<Witness> witnesses;                           // failures, most negative first
};

struct BoundSums
{
  // (iv) sums for K = 0, 1
  std::array<double, 2> A{};
  std::array<double, 2> B{};
  std::array<double, 2> A0{};
  double Q_effective = 0.0;
  double tail_bound = 0.0;
};

struct AssumptionReport
{
  std::string spec_name;
  std::array<AssumptionResult, 4> results;
  std::vector<DerivativeNorms> norm_table;  // k = 0..k_max
  BoundSums sums;

  bool all_pass() const
  {
    return std::all_of(results.begin(), results.end(),
                       [](auto &r) { return r.status == CheckStatus::pass; });
  }

  /// 0 all pass, 2 some failure, 3 nothing failed but something was unverifiable.
  int exit_code() const
  {
    bool unverifiable = false;
    for (auto &r : results)
    {
      if (r.status == CheckStatus::fail)
        return 2;
      unverifiable = unverifiable || r.status == CheckStatus::unverifiable;
    }
    return unverifiable ? 3 : 0;
  }

  json to_json() const
  {
    json j;
    j["spec"] = spec_name;
    for (auto &r : results)
    {
      json e;
      e["status"] = to_string(r.status);
      e["detail"] = r.detail;
      if (std::isfinite(r.worst))
        e["worst"] = r.worst;
      e["witnesses"] = json::array();
      for (auto &w : r.witnesses)
        e["witnesses"].push_back({{"x0", w.x0}, {"x", w.x}, {"min_eigenvalue", w.min_eigenvalue}});
      j["assumptions"][r.name] = e;
    }
    json t = json::array();
    for (std::size_t k = 0; k < norm_table.size(); ++k)
      t.push_back({{"k", k}, {"A", norm_table[k].A}, {"B", norm_table[k].B}, {"A0", norm_table[k].A0}});
    j["derivative_norms"] = t;
    j["bound_sums"] = {{"A", sums.A},
                       {"B", sums.B},
                       {"A0", sums.A0},
                       {"Q_effective", sums.Q_effective},
                       {"tail_bound", sums.tail_bound}};
    j["exit_code"] = exit_code();
    return j;
  }

  std::string to_text() const
  {
    std::ostringstream os;
    os << "operator " << spec_name << "\n";
    for (auto &r : results)
    {
      os << "  (" << r.name << ") " << to_string(r.status);
      if (!r.detail.empty())
        os << ": " << r.detail;
      os << "\n";
      for (auto &w : r.witnesses)
      {
        os << "      witness x0=" << w.x0 << " x=(";
        for (std::size_t i = 0; i < w.x.size(); ++i)
          os << (i ? ", " : "") << w.x[i];
        os << ") min-eig=" << w.min_eigenvalue << "\n";
      }
    }
    os << "  derivative norms (k: |A|_k |B|_k |A0|_k)\n";
    for (std::size_t k = 0; k < norm_table.size(); ++k)
      os << "    " << k << ": " << norm_table[k].A << " " << norm_table[k].B << " "
         << norm_table[k].A0 << "\n";
    os << "  Q_effective = " << sums.Q_effective << " (tail bound " << sums.tail_bound << ")\n";
    return os.str();
  }
};

namespace detail
{
inline void keep_witnesses(AssumptionResult &r, std::vector<Witness> w, std::size_t keep = 5)
{
  std::sort(w.begin(), w.end(),
            [](const Witness &a, const Witness &b)
            {
              if (a.min_eigenvalue != b.min_eigenvalue)
                return a.min_eigenvalue < b.min_eigenvalue;
              if (a.x != b.x)
                return a.x < b.x;
              return a.x0 < b.x0;
            });
  if (w.size() > keep)
    w.resize(keep);
  r.witnesses = std::move(w);
}

// Evaluates fn at every point (in parallel) and collects points where the
// returned eigenvalue falls below -tol.
template <typename Fn>
void scan(AssumptionResult &r, const std::vector<SamplePoint> &pts, Fn &&fn, double tol)
{
  std::vector<double> vals(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) { vals[i] = fn(pts[i]); });
  std::vector<Witness> bad;
  for (std::size_t i = 0; i < pts.size(); ++i)
  {
    r.worst = std::min(r.worst, vals[i]);
    if (vals[i] < -tol)
      bad.push_back({pts[i].x0, pts[i].x, vals[i]});
  }
  if (!bad.empty())
    r.status = CheckStatus::fail;
  keep_witnesses(r, std::move(bad));
}

// Block form M with blocks xi A^{ij} + 1/2 A^i Xi^j + 1/2 (Xi^i)^* A^j.
inline CMatrix deformation_form(const OperatorSpec &s, const std::vector<std::vector<MatrixPolynomial>> &dA,
                                const SamplePoint &p)
{
  const int V = s.n + 1;
  const int N = s.N;
  const auto &c = *s.certificate;
  std::vector<CMatrix> a(V), xi(V);
  std::vector<std::vector<CMatrix>> d(V, std::vector<CMatrix>(V));
  for (int i = 0; i < V; ++i)
  {
    a[i] = s.A[i].evaluate(p.x0, p.x);
    xi[i] = c.Xi[i].evaluate(p.x0, p.x);
    for (int j = 0; j < V; ++j)
      d[i][j] = dA[i][j].evaluate(p.x0, p.x);  // d_j A^i
  }
  CMatrix M(V * N, V * N);
  for (int i = 0; i < V; ++i)
    for (int j = 0; j < V; ++j)
    {
      CMatrix sym = 0.5 * (d[j][i] + d[i][j]);
      M.block(i * N, j * N, N, N) =
          c.xi * sym + 0.5 * a[i] * xi[j] + 0.5 * xi[i].adjoint() * a[j];
    }
  return M;
}

inline double series_tail(double last, double prev)
{
  if (last == 0.0)
    return 0.0;
  if (prev == 0.0)
    return std::numeric_limits<double>::infinity();
  double ratio = last / prev;
  if (ratio >= 1.0)
    return std::numeric_limits<double>::infinity();
  return last * ratio / (1.0 - ratio);
}
}  // namespace detail

inline AssumptionReport check_assumptions(const OperatorSpec &s, int density = default_sample_density())
{
  AssumptionReport rep;
  rep.spec_name = s.name;
  const int V = s.n + 1;
  const bool x0dep = detail::any_x0_dependence(s);
  const auto interior = interior_samples(s.n, density, x0dep);
  const auto boundary = boundary_samples(s.n, density, x0dep);
  std::vector<SamplePoint> all = interior;
  all.insert(all.end(), boundary.begin(), boundary.end());

  // (i)
  auto &r1 = rep.results[0];
  r1.name = "i";
  for (int i = 0; i < V; ++i)
    if (!s.A[i].hermitian())
    {
      r1.status = CheckStatus::fail;
      r1.detail = "A^" + std::to_string(i) + " is not Hermitian";
    }
  detail::scan(
      r1, all,
      [&](const SamplePoint &p) { return min_hermitian_eigenvalue(s.A[0].evaluate(p.x0, p.x)); }, 0.0);
  // A^0 > 0 is strict: a zero minimum eigenvalue is a failure as well.
  if (r1.worst <= 0.0)
  {
    r1.status = CheckStatus::fail;
    if (r1.witnesses.empty())
      r1.detail = "A^0 is singular at some sample";
  }
  if (r1.status == CheckStatus::pass)
    r1.detail = "min eig A^0 = " + std::to_string(r1.worst);

  // (ii)
  auto &r2 = rep.results[1];
  r2.name = "ii";
  detail::scan(
      r2, boundary,
      [&](const SamplePoint &p)
      {
        CMatrix m = CMatrix::Zero(s.N, s.N);
        for (int j = 1; j < V; ++j)
          m += p.x[j - 1] * s.A[j].evaluate(p.x0, p.x);
        return min_hermitian_eigenvalue(m);
      },
      tol_psd);
  r2.detail = "min eig A^i omega_i on boundary = " + std::to_string(r2.worst);

  // (iii)
  auto &r3 = rep.results[2];
  r3.name = "iii";
  if (!s.certificate)
  {
    r3.status = CheckStatus::unverifiable;
    r3.detail = "no certificate (xi, Xi) supplied";
  }
  else
  {
    std::vector<std::vector<MatrixPolynomial>> dA(V, std::vector<MatrixPolynomial>(V));
    for (int i = 0; i < V; ++i)
      for (int j = 0; j < V; ++j)
        dA[i][j] = s.A[i].derivative(j);
    detail::scan(
        r3, interior,
        [&](const SamplePoint &p)
        {
          CMatrix M = detail::deformation_form(s, dA, p);
          return min_hermitian_eigenvalue(M - CMatrix::Identity(M.rows(), M.cols()));
        },
        tol_psd);
    r3.detail = "min eig (M - 1) = " + std::to_string(r3.worst);
  }

  // (iv)
  auto &r4 = rep.results[3];
  r4.name = "iv";
  const auto pts = detail::norm_samples(s, density);
  const int L = s.Lmax;
  rep.norm_table.resize(L + 1);
  for (int k = 0; k <= L; ++k)
  {
    rep.norm_table[k].A = detail::stacked_derivative_norm(s.A, s.n, k, pts);
    rep.norm_table[k].B = detail::stacked_derivative_norm({s.B}, s.n, k, pts);
    rep.norm_table[k].A0 = detail::stacked_derivative_norm({s.A[0]}, s.n, k, pts);
  }
  const auto &seq = s.sequence;
  double tail = 0.0;
  for (int K = 0; K <= 1; ++K)
  {
    std::vector<double> ta, tb, t0;
    for (int k = 0; k <= L; ++k)
    {
      const double g = std::pow(k + 1.0, 0.5 * s.n) / factorial(k);
      ta.push_back(k >= K + 1 ? g * seq.r(k - 1) * rep.norm_table[k].A : 0.0);
      tb.push_back(k >= K ? g * seq.r(k) * rep.norm_table[k].B : 0.0);
      t0.push_back(k >= K ? g * seq.r(k) * rep.norm_table[k].A0 : 0.0);
    }
    double sa = 0, sb = 0, s0 = 0;
    for (int k = 0; k <= L; ++k)
    {
      sa += ta[k];
      sb += tb[k];
      s0 += t0[k];
    }
    rep.sums.A[K] = sa;
    rep.sums.B[K] = sb;
    rep.sums.A0[K] = s0;
    for (auto *t : {&ta, &tb, &t0})
      tail = std::max(tail, detail::series_tail((*t)[L], (*t)[L - 1]));
    const double rK = seq.r(K);
    for (double v : {sa, sb, s0})
    {
      double ratio = v == 0.0 ? 0.0 : (rK > 0.0 ? v / rK : std::numeric_limits<double>::infinity());
      rep.sums.Q_effective = std::max(rep.sums.Q_effective, ratio);
    }
  }
  rep.sums.tail_bound = tail;
  r4.worst = s.Q - rep.sums.Q_effective;
  if (!(rep.sums.Q_effective <= s.Q * (1.0 + 1e-12)))
  {
    r4.status = CheckStatus::fail;
    r4.detail = "smallest admissible Q is " + std::to_string(rep.sums.Q_effective) + " > Q = " +
                std::to_string(s.Q);
  }
  else
    r4.detail = "Q_effective = " + std::to_string(rep.sums.Q_effective) + " <= Q = " + std::to_string(s.Q);
  if (!std::isfinite(tail))
  {
    r4.status = r4.status == CheckStatus::fail ? CheckStatus::fail : CheckStatus::unverifiable;
    r4.detail += "; truncated sums do not converge at Lmax";
  }
  return rep;
}

// ---------------------------------------------------------------- constants

struct StabilityConstants
{
  double z_star = 0.0;
  double R = 0.0;
  double rho_star = 0.0;
  double Q_effective = 0.0;

  json to_json() const
  {
    return {{"z_star", z_star}, {"R", R}, {"rho_star", rho_star}, {"Q_effective", Q_effective}};
  }
};

/// Hermitian part C = 1/2(-d_i A^i + B + B^*) of the zeroth-order term in
/// Re u^* D_z u, pointwise.
inline CMatrix energy_potential(const OperatorSpec &s, const std::vector<MatrixPolynomial> &divA,
                                const SamplePoint &p)
{
  CMatrix div = CMatrix::Zero(s.N, s.N);
  for (auto &d : divA)
    div += d.evaluate(p.x0, p.x);
  CMatrix b = s.B.evaluate(p.x0, p.x);
  return 0.5 * (-div + b + b.adjoint());
}

namespace detail
{
inline std::vector<MatrixPolynomial> divergence_terms(const OperatorSpec &s)
{
  std::vector<MatrixPolynomial> out;
  for (int i = 0; i <= s.n; ++i)
    out.push_back(s.A[i].derivative(i));
  return out;
}

inline CMatrix inverse_sqrt(const CMatrix &h)
{
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (h + h.adjoint()));
  RVector d = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}
}  // namespace detail

/// z_star: smallest Re z with K_z >= A^0/2 on the sample grid.
/// R: inf over Re z >= z_star of min-eig(K_z)/(1+|Re z|). For fixed x the
/// ratio is quasi-concave in Re z on each side of 0, so only Re z = z_star,
/// Re z = 0 (when z_star < 0) and the limit Re z -> infinity are evaluated.
inline StabilityConstants stability_constants(const OperatorSpec &s, int density = default_sample_density())
{
  if (!s.certificate)
    throw Error(ErrorKind::unverifiable, "stability constants need a (iii) certificate");
  const auto pts = detail::norm_samples(s, density);
  const auto divA = detail::divergence_terms(s);
  std::vector<double> shift(pts.size());
  parallel_for(pts.size(),
               [&](std::size_t i)
               {
                 CMatrix a0 = s.A[0].evaluate(pts[i].x0, pts[i].x);
                 CMatrix w = detail::inverse_sqrt(a0);
                 CMatrix c = energy_potential(s, divA, pts[i]);
                 shift[i] = max_hermitian_eigenvalue(-(w * c * w));
               });
  StabilityConstants k;
  k.z_star = 0.5 + *std::max_element(shift.begin(), shift.end());

  std::vector<double> ratio(pts.size());
  parallel_for(pts.size(),
               [&](std::size_t i)
               {
                 CMatrix a0 = s.A[0].evaluate(pts[i].x0, pts[i].x);
                 CMatrix c = energy_potential(s, divA, pts[i]);
                 auto g = [&](double sre) { return min_hermitian_eigenvalue(c + sre * a0) / (1.0 + std::abs(sre)); };
                 double r = std::min(g(k.z_star), min_hermitian_eigenvalue(a0));
                 if (k.z_star < 0.0)
                   r = std::min(r, g(0.0));
                 ratio[i] = r;
               });
  k.R = *std::min_element(ratio.begin(), ratio.end());

  double xi_norm = detail::stacked_derivative_norm(s.certificate->Xi, s.n, 0, pts);
  const double xi = s.certificate->xi;
  k.rho_star = 0.5 / (s.Q * (xi + 3.0 / k.R + xi_norm + 2.0 * xi_norm / (k.R * xi)));
  k.Q_effective = check_assumptions(s, density).sums.Q_effective;
  return k;
}

/// sup-norm |Xi|_0 of the certificate.
inline double certificate_norm(const OperatorSpec &s, int density = default_sample_density())
{
  if (!s.certificate)
    return 0.0;
  return detail::stacked_derivative_norm(s.certificate->Xi, s.n, 0, detail::norm_samples(s, density));
}

}  // namespace cylspec
