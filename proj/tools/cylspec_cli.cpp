// SPDX-License-Identifier: Apache-2.0
// cylspec: assumption checks, pole spectra, codimension, retarded solutions,
// time-domain runs and cross-engine comparison from the command line.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "cylspec/cylspec.hpp"

namespace fs = std::filesystem;
using namespace cylspec;

namespace
{
struct Options
{
  std::string fixture_name;
  std::string config;
  int qmax = -1;
  int m = -1;
  double re_min = -2.2;
  int contour_nodes = 32;
  int lmax = 2;
  double kappa = 0.0;
  std::string forcing = "default";
  std::string out = "out";
  std::uint64_t seed = 1;
};

OperatorSpec load(const Options &o)
{
  OperatorSpec s;
  if (!o.config.empty())
  {
    json doc;
    try
    {
      doc = json::parse(read_text(o.config));
    }
    catch (const json::parse_error &e)
    {
      throw Error(ErrorKind::schema, std::string("config is not valid JSON: ") + e.what());
    }
    s = load_spec(doc);
  }
  else
    s = fixture(o.fixture_name.empty() ? "EX1" : o.fixture_name);
  if (o.kappa > 0.0)
    s.sequence = WeightSequence::geometric(o.kappa);
  return s;
}

CoverForcing load_forcing(const Options &o)
{
  if (o.forcing.empty() || o.forcing == "default")
    return default_forcing();
  try
  {
    return CoverForcing::from_json(json::parse(read_text(o.forcing)));
  }
  catch (const json::parse_error &e)
  {
    throw Error(ErrorKind::schema, std::string("forcing is not valid JSON: ") + e.what());
  }
}

RunManifest manifest(const std::string &command, const Options &o, int qmax, int m)
{
  RunManifest r;
  r.command = command;
  r.source = o.config.empty() ? (o.fixture_name.empty() ? "EX1" : o.fixture_name) : o.config;
  r.parameters = {{"qmax", qmax},     {"m", m},           {"re_min", o.re_min},  {"contour_nodes", o.contour_nodes},
                  {"lmax", o.lmax},   {"kappa", o.kappa}, {"forcing", o.forcing}, {"seed", o.seed}};
  return r;
}

std::string emit(RunManifest &r, const Options &o, const std::string &name, const std::string &content)
{
  const fs::path p = fs::path(o.out) / name;
  write_text(p, content);
  r.outputs.push_back(p.string());
  return p.string();
}

PoleSearchOptions search_options(const Options &o)
{
  PoleSearchOptions p;
  p.window.re_min = o.re_min;
  p.contour_nodes = o.contour_nodes;
  return p;
}

std::string fmt(double v)
{
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

// ---------------------------------------------------------------- commands

int cmd_check(const Options &o)
{
  auto s = load(o);
  auto rep = check_assumptions(s);
  auto r = manifest("check", o, -1, -1);
  json j = rep.to_json();
  if (rep.exit_code() == 0)
  {
    auto k = stability_constants(s);
    j["constants"] = k.to_json();
    if (s.n == 1)
    {
      std::mt19937_64 rng(o.seed);
      DiscreteOperator op(s, build_basis(2, 16));
      try
      {
        auto b = resolvent_bound_check(op, 100, rng);
        j["bound_check"] = {{"samples", b.samples}, {"failures", b.failures}, {"worst_ratio", b.worst_ratio}};
      }
      catch (const Error &e)
      {
        j["bound_check"] = {{"skipped", e.what()}};
      }
    }
  }
  std::cout << rep.to_text();
  emit(r, o, "check.json", stamped_json(r, j));
  return rep.exit_code();
}

int cmd_spectrum(const Options &o)
{
  auto s = load(o);
  const int Q = o.qmax < 0 ? 4 : o.qmax, M = o.m < 0 ? 32 : o.m;
  auto ps = find_poles(s, build_basis(Q, M), search_options(o));
  auto r = manifest("spectrum", o, Q, M);
  auto csv = emit(r, o, "spectrum.csv", stamped_csv(r, ps.to_csv()));
  emit(r, o, "spectrum.json", stamped_json(r, ps.to_json()));
  std::cout << ps.poles.size() << " poles in Re >= " << o.re_min << " -> " << csv << "\n";
  for (auto &p : ps.poles)
    std::cout << "  " << fmt(p.lambda.real()) << (p.lambda.imag() < 0 ? " - " : " + ") << fmt(std::abs(p.lambda.imag()))
              << "i  order " << p.order << "  rank " << p.rank << "\n";
  if (ps.band_edge)
    std::cout << "warning: poles near the Fourier band edge\n";
  return 0;
}

int cmd_codim(const Options &o)
{
  auto s = load(o);
  const int Q = o.qmax < 0 ? 4 : o.qmax, M = o.m < 0 ? 32 : o.m;
  auto ps = find_poles(s, build_basis(Q, M), search_options(o));
  int rank = 0;
  for (auto &p : ps.Lambda)
    rank += p.rank;
  auto r = manifest("codim", o, Q, M);
  json j = {{"Lambda_size", ps.Lambda.size()}, {"rank_F", rank}, {"poles", ps.to_json()}};
  emit(r, o, "codim.json", stamped_json(r, j));
  auto num = [](double v) { return std::isfinite(v) ? fmt(v) : std::string("none"); };
  std::cout << "|Λ|=" << ps.Lambda.size() << ", rank F=" << rank << ", z★★=" << num(ps.z_star_star)
            << ", z★★★=" << num(ps.z_star_star_star) << "\n";
  return 0;
}

int cmd_green(const Options &o)
{
  auto s = load(o);
  const int Q = o.qmax < 0 ? 32 : o.qmax, M = o.m < 0 ? 24 : o.m;
  auto f = load_forcing(o);
  StabilityPipeline P(s, build_basis(Q, M), search_options(o));
  auto d = P.decompose(f);
  auto seg = default_segment(f);
  auto u = P.retarded_solution(f, P.default_c(), seg);
  auto r = manifest("green", o, Q, M);
  emit(r, o, "retarded.cylf", field_to_binary(u, r.hash()));
  emit(r, o, "retarded_norms.csv", stamped_csv(r, norm_series_csv(u)));
  emit(r, o, "difference_norms.csv", stamped_csv(r, norm_series_csv(d.difference, d.fitted_rate)));
  emit(r, o, "decay.svg",
       decay_svg({norm_series(d.u_ret, "u_ret", "#1f77b4"), norm_series(d.difference, "u_ret - F f", "#d62728")},
                 "slice L2 norms past the forcing", r));
  json j = d.to_json();
  j["forcing"] = f.to_json();
  emit(r, o, "decomposition.json", stamped_json(r, j));
  std::cout << "|Λ|=" << d.Lambda.size() << ", rank F=" << d.rank_F << ", decay rate of u_ret - F f = "
            << fmt(d.fitted_rate) << " (z★★★=" << fmt(d.z_star_star_star) << ")\n";
  return 0;
}

int cmd_evolve(const Options &o)
{
  auto s = load(o);
  const int M = o.m < 0 ? 24 : o.m;
  auto f = load_forcing(o);
  auto basis = build_basis(0, M);
  SliceForcing sf = [&](double t) { return f.slice(*basis, t, s.N); };
  EvolveOptions eo;
  eo.steps_per_period_multiple = 64;
  const double a = f.t_start() - two_pi, b = f.t_end() + 4 * two_pi;
  auto run = evolve(s, basis, CVector(), sf, 0.0, a, b, eo);
  std::vector<EnergySeries> e;
  for (int l = 0; l <= o.lmax; ++l)
    e.push_back(energy_series(run, l, s));
  auto r = manifest("evolve", o, 0, M);
  emit(r, o, "evolve.cylf", field_to_binary(run, r.hash()));
  emit(r, o, "energy.csv", stamped_csv(r, energy_csv(e)));
  emit(r, o, "evolve_norms.csv", stamped_csv(r, norm_series_csv(run)));
  PlotSeries en{"E0", e[0].times, e[0].values};
  emit(r, o, "energy.svg", decay_svg({en}, "energy E0", r));
  std::cout << run.size() << " slices on [" << fmt(a) << ", " << fmt(b) << "], dt = " << fmt(run.dt) << "\n";
  return 0;
}

int cmd_compare(const Options &o)
{
  auto s = load(o);
  const int Q = o.qmax < 0 ? 32 : o.qmax, M = o.m < 0 ? 24 : o.m;
  auto f = load_forcing(o);
  StabilityPipeline P(s, build_basis(Q, M), search_options(o));

  CoverSegment seg{f.t_start() - two_pi, f.t_end() + 4 * two_pi, 64};
  auto u = P.retarded_solution(f, P.default_c(), seg);
  SliceForcing sf = [&](double t) { return f.slice(P.op().basis(), t, s.N); };
  EvolveOptions eo;
  eo.steps_per_period_multiple = seg.samples_per_period;
  auto run = evolve(s, P.basis(), CVector(), sf, 0.0, seg.a, seg.b, eo);
  const double d_evolve = relative_l2(run, u, f.t_end(), seg.b);

  std::mt19937_64 rng(o.seed);
  auto small = build_basis(2, 16);
  auto g = random_band_limited(*small, s.N, rng, 2, 8, 0.6);
  const cplx z(P.default_c(), 0.3);
  auto per = periodize(s, small, g, z);
  auto direct = solve_resolvent(DiscreteOperator(s, small), z, g);
  const double d_periodize = (per.u - direct).data.norm() / direct.data.norm();

  const bool ok = d_evolve <= 1e-3 && d_periodize <= 1e-5;
  auto r = manifest("compare", o, Q, M);
  json j = {{"evolve_vs_retarded", {{"delta", d_evolve}, {"threshold", 1e-3}}},
            {"periodize_vs_solve", {{"delta", d_periodize}, {"threshold", 1e-5}}},
            {"pass", ok}};
  emit(r, o, "compare.json", stamped_json(r, j));
  std::cout << "evolve vs retarded   " << fmt(d_evolve) << " (<= 1e-3) " << (d_evolve <= 1e-3 ? "pass" : "FAIL") << "\n"
            << "periodize vs solve   " << fmt(d_periodize) << " (<= 1e-5) " << (d_periodize <= 1e-5 ? "pass" : "FAIL")
            << "\n";
  return ok ? 0 : 4;
}

void add_common(CLI::App *c, Options &o)
{
  auto *fx = c->add_option("--fixture", o.fixture_name, "built-in operator (EX1, EX1S, EX2, CE-BDY, CE-FLAT, SYN-JORDAN)");
  auto *cf = c->add_option("--config", o.config, "operator config JSON");
  fx->excludes(cf);
  c->add_option("--qmax", o.qmax, "Fourier band Q_max");
  c->add_option("--m", o.m, "Chebyshev degree M");
  c->add_option("--re-min", o.re_min, "left edge of the pole window");
  c->add_option("--contour-nodes", o.contour_nodes, "trapezoid nodes on projection contours");
  c->add_option("--lmax", o.lmax, "highest energy order");
  c->add_option("--kappa", o.kappa, "geometric weight sequence r_k = kappa^k");
  c->add_option("--forcing", o.forcing, "forcing JSON path or 'default'");
  c->add_option("--out", o.out, "output directory");
  c->add_option("--seed", o.seed, "random seed");
}
}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"cylspec: spectra and stability of periodic hyperbolic operators on a cylinder"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version);
  Options o;
  struct Cmd
  {
    const char *name, *help;
    int (*run)(const Options &);
  };
  const Cmd cmds[] = {
      {"check", "check the structural assumptions (exit 0 pass, 2 fail, 3 unverifiable)", cmd_check},
      {"spectrum", "locate poles and write spectrum.csv / spectrum.json", cmd_spectrum},
      {"codim", "print |Λ|, rank F, z★★, z★★★", cmd_codim},
      {"green", "retarded solution and decaying decomposition for a forcing", cmd_green},
      {"evolve", "forced time-domain run with energy series", cmd_evolve},
      {"compare", "cross-engine deltas (exit 0 when all under threshold)", cmd_compare},
  };
  int (*selected)(const Options &) = nullptr;
  for (auto &c : cmds)
  {
    auto *sub = app.add_subcommand(c.name, c.help);
    add_common(sub, o);
    auto run = c.run;
    sub->callback([&selected, run] { selected = run; });
  }
  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    return app.exit(e);
  }
  try
  {
    return selected(o);
  }
  catch (const Error &e)
  {
    json err;
    err["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
    std::cout << err.dump() << "\n";
    return 1;
  }
  catch (const std::exception &e)
  {
    json err;
    err["error"] = {{"kind", "internal"}, {"message", e.what()}};
    std::cout << err.dump() << "\n";
    return 1;
  }
}
