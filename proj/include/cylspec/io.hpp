// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run manifests, manifest-stamped CSV/JSON, the binary cover-field dump and
// SVG decay plots.
//
// Binary cover-field layout (little-endian):
//   char[4] "CYLF"
//   u32 version (1)
//   u64 manifest hash
//   f64 t_start, f64 dt
//   u32 slices, u32 nodes, u32 N
//   slices * nodes * N complex values, each two f64 (re, im), row-major
//   (slice, node, component).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "timedomain.hpp"

namespace cylspec
{

inline constexpr const char *tool_version = "1.0.0";

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s)
{
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s)
  {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

struct RunManifest
{
  std::string command;
  std::string source;  // fixture name or config path
  json parameters = json::object();
  std::string version = tool_version;
  std::vector<std::string> outputs;

  json to_json() const
  {
    return {{"command", command},
            {"source", source},
            {"parameters", parameters},
            {"version", version},
            {"outputs", outputs}};
  }

  /// Hash of the canonical (key-sorted, compact) JSON without outputs.
  std::uint64_t hash() const
  {
    json j = to_json();
    j.erase("outputs");
    return fnv1a(j.dump());
  }
  std::string hash_hex() const { return hex64(hash()); }
};

inline std::string manifest_line(const RunManifest &m) { return "# manifest " + m.hash_hex() + "\n"; }

inline void write_text(const std::filesystem::path &p, const std::string &s)
{
  if (p.has_parent_path())
    std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os)
    throw Error(ErrorKind::io, "cannot write " + p.string());
  os << s;
}

inline std::string read_text(const std::filesystem::path &p)
{
  std::ifstream is(p, std::ios::binary);
  if (!is)
    throw Error(ErrorKind::io, "cannot read " + p.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

/// CSV body prefixed by the manifest line.
inline std::string stamped_csv(const RunManifest &m, const std::string &csv) { return manifest_line(m) + csv; }

/// JSON document with the manifest embedded under "manifest".
inline std::string stamped_json(const RunManifest &m, json j)
{
  j["manifest"] = m.to_json();
  j["manifest"]["hash"] = m.hash_hex();
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- binary dump

namespace detail
{
static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");

template <typename T>
void put(std::ostream &os, T v)
{
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T get(std::istream &is)
{
  T v{};
  if (!is.read(reinterpret_cast<char *>(&v), sizeof(T)))
    throw Error(ErrorKind::io, "truncated cover-field dump");
  return v;
}
}  // namespace detail

inline std::string field_to_binary(const FieldOnCover &u, std::uint64_t hash)
{
  std::ostringstream os(std::ios::binary);
  os.write("CYLF", 4);
  detail::put<std::uint32_t>(os, 1);
  detail::put<std::uint64_t>(os, hash);
  detail::put<double>(os, u.t0);
  detail::put<double>(os, u.dt);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(u.size()));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(u.slices.empty() ? 0 : u.nodes()));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(u.N));
  for (auto &s : u.slices)
    for (Eigen::Index i = 0; i < s.size(); ++i)
    {
      detail::put<double>(os, s(i).real());
      detail::put<double>(os, s(i).imag());
    }
  return os.str();
}

struct FieldDump
{
  std::uint64_t hash = 0;
  double t_start = 0.0;
  double dt = 0.0;
  std::uint32_t nodes = 0;
  std::uint32_t N = 0;
  std::vector<CVector> slices;
};

inline FieldDump field_from_binary(const std::string &bytes)
{
  std::istringstream is(bytes, std::ios::binary);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "CYLF", 4) != 0)
    throw Error(ErrorKind::io, "not a cover-field dump");
  if (detail::get<std::uint32_t>(is) != 1)
    throw Error(ErrorKind::io, "unsupported cover-field dump version");
  FieldDump d;
  d.hash = detail::get<std::uint64_t>(is);
  d.t_start = detail::get<double>(is);
  d.dt = detail::get<double>(is);
  const auto slices = detail::get<std::uint32_t>(is);
  d.nodes = detail::get<std::uint32_t>(is);
  d.N = detail::get<std::uint32_t>(is);
  const Eigen::Index w = static_cast<Eigen::Index>(d.nodes) * d.N;
  d.slices.assign(slices, CVector(w));
  for (auto &s : d.slices)
    for (Eigen::Index i = 0; i < w; ++i)
    {
      const double re = detail::get<double>(is);
      s(i) = cplx(re, detail::get<double>(is));
    }
  if (is.peek() != std::char_traits<char>::eof())
    throw Error(ErrorKind::io, "trailing bytes in cover-field dump");
  return d;
}

// ---------------------------------------------------------------- series

/// x0, slice L2 norm and, if rate is finite, the fitted model a e^{rate x0}.
inline std::string norm_series_csv(const FieldOnCover &u, double rate = std::numeric_limits<double>::quiet_NaN())
{
  std::vector<double> t, y;
  for (std::size_t k = 0; k < u.size(); ++k)
  {
    t.push_back(u.time(k));
    y.push_back(u.slice_norm(k));
  }
  // amplitude: least squares of log y - rate t over positive entries
  double la = 0.0, n = 0.0;
  if (std::isfinite(rate))
    for (std::size_t k = 0; k < t.size(); ++k)
      if (y[k] > 0)
      {
        la += std::log(y[k]) - rate * t[k];
        n += 1;
      }
  const bool model = std::isfinite(rate) && n > 0;
  std::ostringstream os;
  os << std::setprecision(17) << (model ? "x0,norm,model\n" : "x0,norm\n");
  for (std::size_t k = 0; k < t.size(); ++k)
  {
    os << t[k] << "," << y[k];
    if (model)
      os << "," << std::exp(la / n + rate * t[k]);
    os << "\n";
  }
  return os.str();
}

/// x0, E_0, ..., E_lmax.
inline std::string energy_csv(const std::vector<EnergySeries> &e)
{
  std::ostringstream os;
  os << std::setprecision(17) << "x0";
  for (auto &s : e)
    os << ",E" << s.ell;
  os << "\n";
  if (e.empty())
    return os.str();
  for (std::size_t k = 0; k < e[0].times.size(); ++k)
  {
    os << e[0].times[k];
    for (auto &s : e)
      os << "," << s.values[k];
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------- plots

struct PlotSeries
{
  std::string label;
  std::vector<double> x, y;  // y > 0, plotted on a log axis
  std::string color = "#1f77b4";
};

/// Semi-log line plot as a standalone SVG; the manifest hash is embedded as a comment.
inline std::string decay_svg(const std::vector<PlotSeries> &series, const std::string &title, const RunManifest &m)
{
  const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (auto &s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (s.y[i] > 0)
      {
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, std::log10(s.y[i]));
        y1 = std::max(y1, std::log10(s.y[i]));
      }
  if (!(x1 > x0))
  {
    x0 = 0;
    x1 = 1;
  }
  if (!(y1 > y0))
  {
    y0 = std::isfinite(y0) ? y0 - 1 : 0;
    y1 = y0 + 2;
  }
  y0 = std::floor(y0);
  y1 = std::ceil(y1);
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double ly) { return H - B - (ly - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<!-- manifest " << m.hash_hex() << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  const int ystep = std::max(1, static_cast<int>(std::ceil((y1 - y0) / 8)));
  for (int e = static_cast<int>(y0); e <= static_cast<int>(y1); e += ystep)
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(e) + 4 << "\" text-anchor=\"end\" font-size=\"11\">1e" << e
       << "</text>\n";
  for (int k = 0; k <= 5; ++k)
  {
    const double x = x0 + (x1 - x0) * k / 5;
    os << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << std::setprecision(1) << x << std::setprecision(2) << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">x0</text>\n";
  int row = 0;
  for (auto &s : series)
  {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (s.y[i] > 0)
        os << px(s.x[i]) << "," << py(std::log10(s.y[i])) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (++row) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
       << s.color << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline PlotSeries norm_series(const FieldOnCover &u, const std::string &label, const std::string &color)
{
  PlotSeries s;
  s.label = label;
  s.color = color;
  for (std::size_t k = 0; k < u.size(); ++k)
  {
    s.x.push_back(u.time(k));
    s.y.push_back(u.slice_norm(k));
  }
  return s;
}

}  // namespace cylspec
