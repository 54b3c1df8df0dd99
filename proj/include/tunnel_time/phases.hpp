#ifndef TUNNEL_TIME_PHASES_HPP
#define TUNNEL_TIME_PHASES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tunnel_time/error.hpp"
#include "tunnel_time/kinematics.hpp"
#include "tunnel_time/numerics.hpp"
#include "tunnel_time/perturbation.hpp"
#include "tunnel_time/potential.hpp"

namespace tunnel_time {

/// mantissa * exp(log_scale); keeps Gaussian-pulse phases representable when
/// exp(z^2/dt^2) would overflow.
struct ScaledComplex {
  cplx mantissa{};
  double log_scale = 0.0;

  cplx value() const { return mantissa == cplx{} ? cplx{} : mantissa * std::exp(log_scale); }

  /// log|value|; -inf for zero.
  double log_abs() const {
    const double a = std::abs(mantissa);
    return a == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(a) + log_scale;
  }

  ScaledComplex& operator+=(const ScaledComplex& o) {
    if (o.mantissa == cplx{}) return *this;
    if (mantissa == cplx{}) return *this = o;
    const double l = std::max(log_scale, o.log_scale);
    mantissa = mantissa * std::exp(log_scale - l) + o.mantissa * std::exp(o.log_scale - l);
    log_scale = l;
    return *this;
  }
};

/// |a| / |b| evaluated through logarithms.
inline double abs_ratio(const ScaledComplex& a, const ScaledComplex& b) {
  if (a.mantissa == cplx{}) return 0.0;
  return std::exp(a.log_abs() - b.log_abs());
}

struct PulseTerm {
  int n;
  ScaledComplex s1;
};

struct PhaseResult {
  Regime regime = Regime::Allowed;
  cplx s0{};
  cplx s1{};
  ScaledComplex s1_scaled;
  double s1_error = 0.0;
  std::optional<std::vector<PulseTerm>> per_pulse;
};

enum class Route {
  Contour,         // integrate over tau along the contour, x from the inverted table
  HamiltonJacobi,  // integrate over y with dtau = m dy / p
};

struct ActionResult {
  cplx value;
  cplx prefactor;  // p(x,E)^(-1/2)
  double error_estimate = 0.0;
};

/// Zero-order action at the arrival point. The path starts at x_ref, by
/// default the upstream edge of the support (allowed) or the entrance point
/// (forbidden).
inline ActionResult s0(const ScatterSetup& s, std::optional<double> x_ref = std::nullopt, const Tolerance& tol = {}) {
  s.validate();
  const TurningPoints tp = turning_points(s.potential, s.energy, s.mass);
  const double x = s.arrival.x;
  auto p_real = [&](double y) { return std::sqrt(2.0 * s.mass * std::max(0.0, s.energy - s.potential.evaluate_or_zero(y))); };
  // Jump locations are split out so each panel sees a smooth integrand.
  auto real_part = [&](double lo, double hi, Endpoints ends) -> QuadratureResult {
    QuadratureResult out;
    if (!(hi > lo)) return out;
    std::vector<double> cuts{lo};
    for (double b : detail::breakpoints(s.potential, lo, hi)) cuts.push_back(b);
    cuts.push_back(hi);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      Endpoints e = Endpoints::Regular;
      if (ends == Endpoints::InvSqrtLower && i == 0) e = Endpoints::InvSqrtLower;
      if (ends == Endpoints::InvSqrtUpper && i + 2 == cuts.size()) e = Endpoints::InvSqrtUpper;
      auto r = integrate(p_real, cuts[i], cuts[i + 1], tol, e);
      out.value += r.value;
      out.error_estimate += r.error_estimate;
    }
    return out;
  };

  ActionResult out;
  const cplx px = momentum(s, x);
  out.prefactor = px == cplx{} ? cplx(std::numeric_limits<double>::infinity()) : 1.0 / std::sqrt(px);
  if (tp.regime == Regime::Allowed) {
    const double ref = x_ref.value_or(std::min(s.potential.support().lo, x));
    require(ref <= x, Errc::InvalidArgument, "action reference point lies downstream of the arrival");
    auto r = real_part(ref, x, Endpoints::Regular);
    out.value = cplx(r.value - s.energy * s.arrival.t, 0.0);
    out.error_estimate = r.error_estimate;
    return out;
  }
  require(x >= tp.upper, Errc::InvalidArgument, "arrival is not downstream of the exit point");
  const double ref = x_ref.value_or(tp.lower);
  require(ref <= tp.lower, Errc::InvalidArgument, "action reference point must not lie inside the barrier");
  const EndpointMap map(tp.lower, tp.upper, Endpoints::InvSqrtBoth);
  auto inside = integrate(
      [&](double u) {
        const double g = detail::kinetic_gap(s, -1.0, map, u, tp.lower, tp.upper);
        return std::sqrt(2.0 * s.mass * g) * map.jacobian(u);
      },
      0.0, 1.0, tol);
  auto down = real_part(tp.upper, x, Endpoints::InvSqrtLower);
  auto up = real_part(ref, tp.lower, Endpoints::InvSqrtUpper);
  out.value = cplx(up.value + down.value - s.energy * s.arrival.t, inside.value);
  out.error_estimate = inside.error_estimate + down.error_estimate + up.error_estimate;
  return out;
}

namespace detail {

// Part of one trajectory piece lying inside the perturbation region.
struct Leg {
  std::size_t piece;
  double u_lo, u_hi;
  double s_lo, s_hi;  // elapsed time from the piece's lower end
  cplx tau_lo, tau_hi;
};

inline std::vector<Leg> legs(const Trajectory& tr, double a, double b) {
  const Interval dom = tr.domain();
  if (a < dom.lo || b > dom.hi) {
    throw Error(Errc::RegionOutsideDomain, "perturbation region [" + std::to_string(a) + ", " + std::to_string(b) +
                                               "] is not covered by the trajectory");
  }
  std::vector<Leg> out;
  const auto& ps = tr.pieces();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& pc = ps[i];
    const double lo = std::max(a, pc.map.lo());
    const double hi = std::min(b, pc.map.hi());
    if (!(hi > lo)) continue;
    Leg g{i, pc.map.u(lo), pc.map.u(hi), 0.0, 0.0, {}, {}};
    if (lo == pc.map.lo()) g.u_lo = 0.0;
    if (hi == pc.map.hi()) g.u_hi = 1.0;
    g.s_lo = lobatto_interp(pc.u, pc.cum, g.u_lo);
    g.s_hi = lobatto_interp(pc.u, pc.cum, g.u_hi);
    g.tau_lo = pc.tau_hi - pc.dir * (pc.total - g.s_lo);
    g.tau_hi = pc.tau_hi - pc.dir * (pc.total - g.s_hi);
    out.push_back(g);
  }
  return out;
}

// max over a straight leg of Re[-(tau-c)^2]/dt^2.
inline double pulse_log_scale(const GaussianPulse& p, cplx t0, cplx t1) {
  const double w2 = p.width * p.width;
  if (t0.imag() == t1.imag()) {
    const double r = std::clamp(p.center, std::min(t0.real(), t1.real()), std::max(t0.real(), t1.real()));
    const double h = t0.imag();
    return (h * h - (r - p.center) * (r - p.center)) / w2;
  }
  const double q = std::max(std::abs(t0.imag()), std::abs(t1.imag()));
  const double r = t0.real() - p.center;
  return (q * q - r * r) / w2;
}

// -integral of w(x) * [envelope term] dtau over one leg, scaled by exp(-L).
template <class Term>
ScaledComplex leg_integral(const Trajectory& tr, const SpatialProfile& w, const Leg& g, Route route, double log_scale,
                           Term&& term, const Tolerance& tol, double& error) {
  const auto& pc = tr.pieces()[g.piece];
  const ScatterSetup& s = tr.setup();
  ComplexQuadratureResult r;
  if (route == Route::Contour) {
    auto f = [&](double el) -> cplx {
      const cplx tau = pc.tau_hi - pc.dir * (pc.total - el);
      const double x = tr.position_in_piece(g.piece, el);
      return -w.value(x) * term(tau, log_scale) * pc.dir;
    };
    r = integrate_complex(f, g.s_lo, g.s_hi, tol);
  } else {
    const Trajectory::Piece* p = &pc;
    const std::optional<double> tlo = tr.regime() == Regime::Forbidden ? std::optional<double>(tr.turning().lower) : std::nullopt;
    const std::optional<double> thi = tr.regime() == Regime::Forbidden ? std::optional<double>(tr.turning().upper) : std::nullopt;
    const double sign = p->dir.real() != 0.0 ? 1.0 : -1.0;
    auto f = [&](double u) -> cplx {
      const double x = p->map.x(u);
      const cplx tau = tr.time_at(x);
      const double dt = time_density(s, sign, p->map, u, tlo, thi);
      return -w.value(x) * term(tau, log_scale) * p->dir * dt;
    };
    r = integrate_complex(f, g.u_lo, g.u_hi, tol);
  }
  error += r.error_estimate * std::exp(log_scale);
  return {r.value, log_scale};
}

inline ScaledComplex pulse_phase(const Trajectory& tr, const SpatialProfile& w, const std::vector<Leg>& ls,
                                 const GaussianPulse& p, Route route, const Tolerance& tol, double& error) {
  ScaledComplex total;
  auto term = [&](cplx tau, double l) {
    const cplx z = (tau - p.center) / p.width;
    return p.amplitude * std::exp(-z * z - l);
  };
  for (const Leg& g : ls) {
    total += leg_integral(tr, w, g, route, pulse_log_scale(p, g.tau_lo, g.tau_hi), term, tol, error);
  }
  return total;
}

}  // namespace detail

/// First-order phase S1 = -integral of W(x(tau), tau) dtau along the contour.
/// Gaussian trains are summed pulse by pulse in scaled form.
inline PhaseResult s1(const Trajectory& tr, const Perturbation& pert, Route route = Route::Contour,
                      const Tolerance& tol = {}) {
  PhaseResult out;
  out.regime = tr.regime();
  const auto& w = pert.spatial();
  const auto ls = detail::legs(tr, w.a(), w.b());
  if (const auto* train = std::get_if<GaussianTrain>(&pert.temporal())) {
    std::vector<PulseTerm> terms;
    for (const auto& p : train->pulses) {
      terms.push_back({p.label, detail::pulse_phase(tr, w, ls, p, route, tol, out.s1_error)});
      out.s1_scaled += terms.back().s1;
    }
    out.per_pulse = std::move(terms);
  } else {
    const Envelope& env = pert.temporal();
    auto term = [&](cplx tau, double) { return omega(env, tau); };
    for (const auto& g : ls) out.s1_scaled += detail::leg_integral(tr, w, g, route, 0.0, term, tol, out.s1_error);
  }
  out.s1 = out.s1_scaled.value();
  out.s0 = s0(tr.setup()).value;
  return out;
}

inline PhaseResult s1(const ScatterSetup& setup, const Perturbation& pert, Route route = Route::Contour,
                      const Tolerance& tol = {}) {
  return s1(trajectory(setup), pert, route, tol);
}

/// Per-pulse phases S1_n of a Gaussian train.
inline std::vector<PulseTerm> s1_per_pulse(const Trajectory& tr, const Perturbation& pert, const Tolerance& tol = {}) {
  require(std::holds_alternative<GaussianTrain>(pert.temporal()), Errc::InvalidArgument,
          "per-pulse phases need a Gaussian train envelope");
  return *s1(tr, pert, Route::Contour, tol).per_pulse;
}

// ---------------------------------------------------------------------------
// Pulse-train ratio table

struct PulseScenario {
  ScatterSetup setup;
  Perturbation perturbation;
  double period;  // T
  double width;   // dt
};

/// Step w0 on [x<, x>], arrival (x>, 0), T = |T| and dt = T/3.
inline PulseScenario forbidden_pulse_scenario(const Potential& pot, double energy, double mass, double w0, int n_first,
                                              int n_last, double width_ratio = 3.0) {
  const TurningPoints tp = turning_points(pot, energy, mass);
  if (tp.regime != Regime::Forbidden) throw Error(Errc::NotForbidden, "pulse scenario needs a tunnelling energy");
  ScatterSetup s{pot, energy, mass, {tp.upper, 0.0}, std::nullopt};
  const double T = traversal_time_forbidden(s).value.imag();
  const double dt = T / width_ratio;
  Perturbation pert(SpatialProfile::step(w0, tp.lower, tp.upper), GaussianTrain::uniform(n_first, n_last, 1.0, T, dt));
  return {s, pert, T, dt};
}

/// Step w0 on [a, b], arrival (b, 0), T = T_ab and dt = T/3.
inline PulseScenario allowed_pulse_scenario(const Potential& pot, double energy, double mass, double a, double b,
                                            double w0, int n_first, int n_last, double width_ratio = 3.0) {
  ScatterSetup s{pot, energy, mass, {b, 0.0}, std::nullopt};
  const double T = traversal_time_allowed(s, a, b).value.real();
  const double dt = T / width_ratio;
  Perturbation pert(SpatialProfile::step(w0, a, b), GaussianTrain::uniform(n_first, n_last, 1.0, T, dt));
  return {s, pert, T, dt};
}

struct PulseRatioRow {
  int n;
  double ratio_allowed;
  double ratio_forbidden;
  ScaledComplex s1_allowed;
  ScaledComplex s1_forbidden;
};

/// |S1_n| / |S1_0| for each schedule; n = 0 must be present.
inline std::vector<double> pulse_ratios(const std::vector<PulseTerm>& terms) {
  const auto zero = std::find_if(terms.begin(), terms.end(), [](const PulseTerm& t) { return t.n == 0; });
  require(zero != terms.end(), Errc::InvalidArgument, "pulse train has no n = 0 pulse");
  std::vector<double> out;
  for (const auto& t : terms) out.push_back(t.n == 0 ? 1.0 : abs_ratio(t.s1, zero->s1));
  return out;
}

inline std::vector<PulseRatioRow> pulse_ratio_table(const PulseScenario& allowed, const PulseScenario& forbidden,
                                                    const Tolerance& tol = {}) {
  const auto ta = s1_per_pulse(trajectory(allowed.setup), allowed.perturbation, tol);
  const auto tf = s1_per_pulse(trajectory(forbidden.setup), forbidden.perturbation, tol);
  require(ta.size() == tf.size(), Errc::InvalidArgument, "allowed and forbidden trains differ in length");
  const auto ra = pulse_ratios(ta);
  const auto rf = pulse_ratios(tf);
  std::vector<PulseRatioRow> rows;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    require(ta[i].n == tf[i].n, Errc::InvalidArgument, "allowed and forbidden trains use different labels");
    rows.push_back({ta[i].n, ra[i], rf[i], ta[i].s1, tf[i].s1});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Observables

struct DensityResult {
  double rho0;
  double rho;
  double ratio;  // rho / rho0
};

/// rho0 = |p|^-1 exp(-2 Im S0), rho = rho0 exp(-2 Im S1).
inline DensityResult density(const Trajectory& tr, const Perturbation& pert, const Tolerance& tol = {}) {
  const ScatterSetup& s = tr.setup();
  const ActionResult a0 = s0(s, std::nullopt, tol);
  const double p = std::abs(momentum(s, s.arrival.x));
  const double rho0 = std::exp(-2.0 * a0.value.imag()) / p;
  if (tr.regime() == Regime::Allowed && !std::holds_alternative<CustomEnvelope>(pert.temporal())) {
    return {rho0, rho0, 1.0};
  }
  const PhaseResult r = s1(tr, pert, Route::Contour, tol);
  const ScaledComplex& v = r.s1_scaled;
  const double im = v.mantissa.imag() == 0.0 ? 0.0 : v.mantissa.imag() * std::exp(v.log_scale);
  const double ratio = std::exp(-2.0 * im);
  return {rho0, rho0 * ratio, ratio};
}

struct CurrentResult {
  double delta_j;
  double boundary_term;  // jolts on entering and leaving the region
  double work_term;      // minus the work of the extra force
  double j0;             // unperturbed current 1/m
  double relative() const { return delta_j / j0; }
};

/// First-order change of the probability current at the arrival point.
inline CurrentResult current_correction(const Trajectory& tr, const Perturbation& pert, const Tolerance& tol = {}) {
  if (tr.regime() != Regime::Allowed) {
    throw Error(Errc::InvalidArgument, "current correction is defined for the allowed regime");
  }
  const ScatterSetup& s = tr.setup();
  const auto& w = pert.spatial();
  const auto times = tr.region_times(w.a(), w.b());
  const double p = momentum(s, s.arrival.x).real();
  const double p2 = p * p;
  const Envelope& env = pert.temporal();
  const double wa = w.value(w.a()), wb = w.value(w.b());
  const double bracket = wa == wb ? wb * omega_difference(env, times.tau_b, times.tau_a).real()
                                  : wb * omega(env, times.tau_b).real() - wa * omega(env, times.tau_a).real();
  double work = 0.0;
  if (!w.is_step()) {
    // dx/dtau dtau = dx: the work integral is taken over position.
    auto f = [&](double y) { return w.slope(y) * omega(env, tr.time_at(y)).real(); };
    work = integrate(f, w.a(), w.b(), tol).value;
  }
  CurrentResult out;
  out.boundary_term = bracket / p2;
  out.work_term = -work / p2;
  out.delta_j = out.boundary_term + out.work_term;
  out.j0 = 1.0 / s.mass;
  return out;
}

struct AdiabaticResult {
  Regime regime;
  cplx exact;
  cplx first;      // -w0 Omega(tau_b) T_ab, or i w0 Omega(tau_b) |T|
  cplx second;     // w0 dOmega T_ab^2 / 2, or -i w0 d2Omega |T|^3 / 6
  cplx rate_term;  // forbidden only: the real -w0 dOmega |T|^2 / 2
  double duration; // T_ab or |T|

  /// Relative error of the first term on the part that carries the effect:
  /// the whole S1 (allowed) or Im S1 (forbidden).
  double first_term_error() const {
    if (regime == Regime::Allowed) return std::abs(exact - first) / std::abs(exact);
    return std::abs(exact.imag() - first.imag()) / std::abs(exact.imag());
  }
};

/// Slow-envelope expansion of S1 about the exit time tau_b for a step.
inline AdiabaticResult adiabatic_expansion(const Trajectory& tr, const Perturbation& pert, const Tolerance& tol = {}) {
  const auto& w = pert.spatial();
  require(w.is_step(), Errc::InvalidArgument, "adiabatic expansion needs a step perturbation");
  const double w0 = w.value(w.a());
  const auto times = tr.region_times(w.a(), w.b());
  const Envelope& env = pert.temporal();
  const cplx tb = times.tau_b;
  AdiabaticResult out{tr.regime(), {}, {}, {}, {}, 0.0};
  const PhaseResult r = s1(tr, pert, Route::Contour, tol);
  out.exact = r.s1;
  const cplx d = times.duration();
  const auto& c = tr.contour();
  if (tr.regime() == Regime::Forbidden) {
    const TurningPoints& tp = tr.turning();
    require(w.a() >= tp.lower && w.b() <= tp.upper, Errc::InvalidArgument,
            "forbidden expansion needs the region inside the barrier");
    (void)c;
    const double T = -d.imag();
    out.duration = T;
    out.first = cplx(0.0, w0 * omega(env, tb).real() * T);
    out.rate_term = cplx(-w0 * omega_derivative(env, tb, 1).real() * T * T / 2.0, 0.0);
    out.second = cplx(0.0, -w0 * omega_derivative(env, tb, 2).real() * T * T * T / 6.0);
    return out;
  }
  const double T = d.real();
  out.duration = T;
  out.first = cplx(-w0 * omega(env, tb).real() * T, 0.0);
  out.second = cplx(w0 * omega_derivative(env, tb, 1).real() * T * T / 2.0, 0.0);
  out.rate_term = out.second;
  return out;
}

// ---------------------------------------------------------------------------
// Validity of the first-order treatment

struct ValidityCheck {
  std::string name;
  double ratio;  // small when the condition holds
  double limit;
  bool ok;
  double margin() const { return limit - ratio; }
};

struct ValidityReport {
  Regime regime;
  double action;      // integral of |p| across the region
  double s1_modulus;  // |S1|
  double s2_estimate;
  double adiabatic_ratio;  // informational, never flagged
  std::vector<ValidityCheck> checks;
  std::vector<std::string> flags;

  const ValidityCheck* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

/// A "much less than" holds here when the small side is at most half of the
/// large side.
inline constexpr double kStrongInequality = 0.5;

inline ValidityReport validity_report(const Trajectory& tr, const Perturbation& pert, const Tolerance& tol = {}) {
  const ScatterSetup& s = tr.setup();
  const auto& w = pert.spatial();
  ValidityReport rep{};
  rep.regime = tr.regime();
  const double a = w.a(), b = w.b();

  auto abs_p = [&](double y) { return std::abs(momentum(s, y)); };
  double action = 0.0;
  {
    std::vector<double> cuts{a};
    for (double x : detail::breakpoints(s.potential, a, b)) cuts.push_back(x);
    if (tr.regime() == Regime::Forbidden) {
      for (double x : {tr.turning().lower, tr.turning().upper}) {
        if (x > a && x < b) cuts.push_back(x);
      }
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      if (cuts[i + 1] > cuts[i]) action += integrate(abs_p, cuts[i], cuts[i + 1], tol, Endpoints::InvSqrtBoth).value;
    }
  }
  rep.action = action;

  double s1_mod = std::numeric_limits<double>::infinity();
  try {
    const PhaseResult r = s1(tr, pert, Route::Contour, tol);
    s1_mod = std::exp(r.s1_scaled.log_abs());
  } catch (const Error&) {
  }
  rep.s1_modulus = s1_mod;
  rep.s2_estimate = s1_mod * s1_mod / (2.0 * action);

  const double p_typ = action / (b - a);
  const double kinetic = p_typ * p_typ / (2.0 * s.mass);
  double amp = amplitude_bound(pert.temporal());
  if (!std::isfinite(amp)) amp = 1.0;
  const double tscale = time_scale(pert.temporal());
  const auto times = tr.region_times(a, b);
  const double T = std::abs(times.duration());

  auto add = [&](std::string name, double ratio) {
    const bool ok = ratio <= kStrongInequality;
    rep.checks.push_back({name, ratio, kStrongInequality, ok});
    if (!ok) rep.flags.push_back(name);
  };
  add("S0_large", 1.0 / action);
  add("S1_order", s1_mod);
  add("S2_estimate", s1_mod == 0.0 ? 0.0 : rep.s2_estimate / s1_mod);
  add("magnitude_ok", w.max_abs() * amp / kinetic);
  const double rate = std::isfinite(tscale) ? 1.0 / tscale : 0.0;
  add("rate_ok", rate / (tr.regime() == Regime::Forbidden ? s.energy : kinetic));
  if (tr.regime() == Regime::Forbidden) {
    add("pulse_width_ok", std::isfinite(tscale) ? (2.0 / action) / (tscale / T) : 0.0);
  }
  const TurningPoints& tp = tr.turning();
  if (tp.regime == Regime::Forbidden) {
    const bool straddles = (a < tp.lower && b > tp.lower) || (a < tp.upper && b > tp.upper);
    if (straddles) {
      rep.checks.push_back({"region_inside_segment", 1.0, 0.0, false});
      rep.flags.push_back("region_inside_segment");
    }
  }
  rep.adiabatic_ratio = std::isfinite(tscale) ? (T / tscale) * std::abs(w.max_abs()) * amp * T : 0.0;
  return rep;
}

}  // namespace tunnel_time

#endif  // TUNNEL_TIME_PHASES_HPP
