// tunnel-time: command-line front end for the traversal-time library.
//
//   tunnel-time <subcommand> [--scenario file.json] [--set /ptr=value ...]
//               [--out path] [--format csv|json] [--tol rel]
//
// Exit codes: 0 success, 1 computation error, 2 configuration error.

#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tunnel_time/io.hpp"
#include "tunnel_time/kinematics.hpp"
#include "tunnel_time/numerics.hpp"
#include "tunnel_time/phases.hpp"
#include "tunnel_time/scenario.hpp"
#include "tunnel_time/tdse.hpp"

using namespace tunnel_time;

namespace {

struct Options {
  std::string scenario_path;
  std::vector<std::string> overrides;
  std::string out;
  std::string format = "csv";
  double tol = 1e-9;
  // subcommand extras
  std::string snapshot;
  std::string records;
};

struct Context {
  Scenario sc;
  Tolerance tol;
  std::string format;
};

Context load(const Options& o) {
  json doc = default_scenario();
  if (!o.scenario_path.empty()) merge_into(doc, load_scenario_file(o.scenario_path));
  for (const auto& s : o.overrides) apply_override(doc, s);
  if (!(o.tol > 0.0 && o.tol < 1.0)) throw ConfigError("--tol must lie in (0, 1)");
  Tolerance tol;
  tol.rel = o.tol;
  return {parse_scenario(doc), tol, o.format};
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(o.out, std::ios::binary);
  if (!os.good()) throw ConfigError("cannot write " + o.out);
  os << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

Interval region_of(const Scenario& sc) {
  if (sc.perturbation) return {sc.perturbation->spatial().a(), sc.perturbation->spatial().b()};
  return sc.potential.support();
}

// ---------------------------------------------------------------------------

std::string cmd_turning_points(const Context& c) {
  const TurningPoints& tp = c.sc.turning;
  std::ostringstream os;
  const bool has = tp.regime == Regime::Forbidden;
  if (c.format == "json") {
    json j{{"regime", to_string(tp.regime)}};
    j["x_lower"] = has ? jnum(tp.lower) : json();
    j["x_upper"] = has ? jnum(tp.upper) : json();
    return dump(j);
  }
  CsvWriter w(os);
  w.header({"x_lower", "x_upper", "regime"});
  w.row_strings({has ? fmt(tp.lower) : "", has ? fmt(tp.upper) : "", to_string(tp.regime)});
  return os.str();
}

std::string cmd_times(const Context& c) {
  const Scenario& sc = c.sc;
  TraversalTime t;
  double a, b;
  if (sc.turning.regime == Regime::Forbidden) {
    t = traversal_time_forbidden(sc.setup, c.tol);
    a = sc.turning.lower;
    b = sc.turning.upper;
  } else {
    const Interval r = region_of(sc);
    a = r.lo;
    b = r.hi;
    if (!std::isfinite(a) || !std::isfinite(b)) throw ConfigError("allowed times need a finite region");
    t = traversal_time_allowed(sc.setup, a, b, c.tol);
  }
  if (c.format == "json") {
    return dump({{"regime", to_string(sc.turning.regime)},
                 {"a", jnum(a)},
                 {"b", jnum(b)},
                 {"time", jcplx(t.value)},
                 {"error_estimate", jnum(t.error_estimate)}});
  }
  std::ostringstream os;
  CsvWriter w(os);
  w.header({"regime", "a", "b", "re_time", "im_time", "error_estimate"});
  w.row_strings({to_string(sc.turning.regime), fmt(a), fmt(b), fmt(t.value.real()), fmt(t.value.imag()),
                 fmt(t.error_estimate)});
  return os.str();
}

std::string cmd_table1(const Context& c) {
  const auto allowed = c.sc.table_allowed();
  const auto forbidden = c.sc.table_forbidden();
  const auto rows = pulse_ratio_table(allowed, forbidden, c.tol);
  if (c.format == "json") {
    return dump({{"period_allowed", jnum(allowed.period)},
                 {"width_allowed", jnum(allowed.width)},
                 {"period_forbidden", jnum(forbidden.period)},
                 {"width_forbidden", jnum(forbidden.width)},
                 {"rows", table_json(rows)}});
  }
  std::ostringstream os;
  write_table_csv(os, rows);
  return os.str();
}

std::string cmd_trajectory(const Context& c) {
  const Trajectory tr = trajectory(c.sc.setup);
  const int samples = c.sc.doc.value("trajectory", json::object()).value("samples", 100);
  if (samples < 2) throw ConfigError("trajectory samples must be >= 2");
  if (c.format == "json") {
    json segs = json::array();
    for (const auto& s : tr.contour().segments) {
      segs.push_back({{"kind", to_string(s.kind)},
                      {"start", jcplx(s.start)},
                      {"end", jcplx(s.end)},
                      {"x_range", {jnum(s.x_range.lo), jnum(s.x_range.hi)}}});
    }
    return dump({{"regime", to_string(tr.regime())}, {"segments", segs}});
  }
  std::ostringstream os;
  write_trajectory_csv(os, tr, samples);
  return os.str();
}

std::string cmd_adiabatic(const Context& c) {
  const Scenario& sc = c.sc;
  if (!sc.perturbation) throw ConfigError("adiabatic sweep needs a perturbation profile");
  const Trajectory tr = trajectory(sc.setup);
  const auto& w = sc.perturbation->spatial();
  const auto times = tr.region_times(w.a(), w.b());
  const double T = std::abs(times.duration());
  const json cfg = sc.doc.value("adiabatic", json::object());
  const auto grid = cfg.value("omega_T", std::vector<double>{});
  const double phase0 = cfg.value("phase", 0.0);
  if (grid.empty()) throw ConfigError("adiabatic.omega_T is empty");

  // One point per omega, run concurrently and collected in input order.
  std::vector<std::future<AdiabaticResult>> jobs;
  for (double wt : grid) {
    if (!(wt > 0.0)) throw ConfigError("adiabatic.omega_T entries must be > 0");
    const double om = wt / T;
    const Perturbation p = sc.perturbation->with_envelope(HarmonicEnvelope{om, phase0 - om * times.tau_b.real()});
    jobs.push_back(std::async(std::launch::async, [&tr, p, &c] { return adiabatic_expansion(tr, p, c.tol); }));
  }
  std::vector<double> om, err;
  std::vector<AdiabaticResult> res;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    res.push_back(jobs[i].get());
    om.push_back(grid[i] / T);
    err.push_back(res.back().first_term_error());
  }
  const double slope = om.size() >= 2 ? loglog_slope(om, err) : std::nan("");
  if (c.format == "json") {
    json pts = json::array();
    for (std::size_t i = 0; i < res.size(); ++i) {
      pts.push_back({{"omega", jnum(om[i])},
                     {"omega_T", jnum(grid[i])},
                     {"relative_error", jnum(err[i])},
                     {"exact", jcplx(res[i].exact)},
                     {"first", jcplx(res[i].first)},
                     {"second", jcplx(res[i].second)},
                     {"rate_term", jcplx(res[i].rate_term)}});
    }
    return dump({{"regime", to_string(tr.regime())}, {"duration", jnum(T)}, {"slope", jnum(slope)}, {"points", pts}});
  }
  std::ostringstream os;
  CsvWriter wr(os);
  wr.header({"omega", "relative_error"});
  for (std::size_t i = 0; i < om.size(); ++i) wr.row({om[i], err[i]});
  return os.str();
}

std::string cmd_current(const Context& c) {
  if (!c.sc.perturbation) throw ConfigError("current needs a perturbation");
  const Trajectory tr = trajectory(c.sc.setup);
  const CurrentResult r = current_correction(tr, *c.sc.perturbation, c.tol);
  if (c.format == "json") {
    return dump({{"delta_j", jnum(r.delta_j)},
                 {"boundary_term", jnum(r.boundary_term)},
                 {"work_term", jnum(r.work_term)},
                 {"j0", jnum(r.j0)},
                 {"relative", jnum(r.relative())}});
  }
  std::ostringstream os;
  CsvWriter w(os);
  w.header({"delta_j", "boundary_term", "work_term", "j0", "relative"});
  w.row({r.delta_j, r.boundary_term, r.work_term, r.j0, r.relative()});
  return os.str();
}

std::string cmd_density(const Context& c) {
  const Trajectory tr = trajectory(c.sc.setup);
  const Perturbation zero(SpatialProfile::step(0.0, tr.domain().lo, tr.domain().hi), ConstantEnvelope{0.0});
  const Perturbation& p = c.sc.perturbation ? *c.sc.perturbation : zero;
  const DensityResult r = density(tr, p, c.tol);
  if (c.format == "json") return dump({{"rho0", jnum(r.rho0)}, {"rho", jnum(r.rho)}, {"ratio", jnum(r.ratio)}});
  std::ostringstream os;
  CsvWriter w(os);
  w.header({"rho0", "rho", "ratio"});
  w.row({r.rho0, r.rho, r.ratio});
  return os.str();
}

std::string cmd_validity(const Context& c) {
  if (!c.sc.perturbation) throw ConfigError("validity needs a perturbation");
  const ValidityReport r = validity_report(trajectory(c.sc.setup), *c.sc.perturbation, c.tol);
  if (c.format == "json") return dump(validity_json(r));
  std::ostringstream os;
  CsvWriter w(os);
  w.header({"name", "ratio", "limit", "ok"});
  for (const auto& ch : r.checks) w.row_strings({ch.name, fmt(ch.ratio), fmt(ch.limit), ch.ok ? "1" : "0"});
  return os.str();
}

std::string cmd_tdse(const Context& c, const Options& o) {
  const Scenario& sc = c.sc;
  const TdseSettings ts = sc.tdse();
  TdseRun base;
  base.grid = ts.grid;
  base.packet = ts.packet;
  base.potential = sc.potential;
  base.mass = sc.mass;
  base.x_probe = ts.x_probe;
  base.x_cut = ts.x_cut;
  base.record_stride = ts.record_stride;
  validate(base);
  TdseRun pert = base;
  pert.perturbation = ts.perturbation;
  if (pert.perturbation) validate(pert);

  // The pair runs concurrently; each run owns its arrays.
  auto fa = std::async(std::launch::async, [base] { return propagate(base); });
  auto fb = std::async(std::launch::async, [pert] { return propagate(pert); });
  const TdseRun a = fa.get();
  const TdseRun b = fb.get();

  if (!o.snapshot.empty()) write_snapshot(o.snapshot, b);
  if (!o.records.empty()) {
    std::ofstream os(o.records, std::ios::binary);
    if (!os.good()) throw ConfigError("cannot write " + o.records);
    write_records_csv(os, b);
  }

  std::optional<double> im_s1;
  if (ts.perturbation) {
    ScatterSetup s = sc.setup;
    s.arrival.x = std::max(s.arrival.x, ts.perturbation->spatial().b());
    im_s1 = s1(trajectory(s), *ts.perturbation, Route::Contour, c.tol).s1.imag();
  }
  const TdseComparison cmp = compare_semiclassical(a, b, im_s1.value_or(0.0));

  if (c.format == "json") {
    json j{{"norm_unperturbed", jnum(cmp.norm_unperturbed)},
           {"norm_perturbed", jnum(cmp.norm_perturbed)},
           {"log_ratio", jnum(cmp.log_ratio)},
           {"predicted", jnum(cmp.predicted)},
           {"abs_error", jnum(cmp.abs_error)},
           {"rel_error", jnum(cmp.rel_error)},
           {"t_final", jnum(b.t_final)}};
    j["current_modulation"] = cmp.current_modulation ? jnum(*cmp.current_modulation) : json();
    return dump(j);
  }
  std::ostringstream os;
  CsvWriter w(os);
  w.header({"norm_unperturbed", "norm_perturbed", "log_ratio", "predicted", "abs_error", "rel_error"});
  w.row({cmp.norm_unperturbed, cmp.norm_perturbed, cmp.log_ratio, cmp.predicted, cmp.abs_error, cmp.rel_error});
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traversal times and time-dependent perturbations of tunnelling"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario_path, "scenario JSON file (merged over the built-in defaults)");
    sub->add_option("--set", o.overrides, "override a field, e.g. --set /energy=25")->take_all();
    sub->add_option("--out", o.out, "write output to this path instead of stdout");
    sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--tol", o.tol, "relative quadrature tolerance");
  };

  using Handler = std::function<std::string(const Context&)>;
  std::map<std::string, Handler> handlers{
      {"turning-points", cmd_turning_points},
      {"times", cmd_times},
      {"table1", cmd_table1},
      {"trajectory", cmd_trajectory},
      {"adiabatic", cmd_adiabatic},
      {"current", cmd_current},
      {"density", cmd_density},
      {"validity", cmd_validity},
      {"tdse", [&o](const Context& c) { return cmd_tdse(c, o); }},
  };
  const std::map<std::string, std::string> help{
      {"turning-points", "entrance and exit points and the regime"},
      {"times", "traversal time T_ab or i|T| with its error estimate"},
      {"table1", "pulse-train ratios |S1_n|/|S1_0| for both regimes"},
      {"trajectory", "sampled complex-time contour (re_tau, im_tau, x)"},
      {"adiabatic", "omega sweep of the first-term error of the slow-envelope expansion"},
      {"current", "first-order current correction at the arrival point"},
      {"density", "density ratio rho/rho0 at the arrival point"},
      {"validity", "first-order validity checks"},
      {"tdse", "wave-packet comparison of perturbed and unperturbed transmission"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, text] : help) {
    auto* sub = app.add_subcommand(name, text);
    common(sub);
    subs[name] = sub;
  }
  subs["tdse"]->add_option("--snapshot", o.snapshot, "write the final perturbed state here");
  subs["tdse"]->add_option("--records", o.records, "write the perturbed run's probe records as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      const Context c = load(o);
      emit(o, handlers.at(name)(c));
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
