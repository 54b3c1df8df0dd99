#ifndef TUNNEL_TIME_KINEMATICS_HPP
#define TUNNEL_TIME_KINEMATICS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include "tunnel_time/error.hpp"
#include "tunnel_time/numerics.hpp"
#include "tunnel_time/potential.hpp"

namespace tunnel_time {

using cplx = std::complex<double>;

struct Arrival {
  double x = 0.0;
  double t = 0.0;
};

struct ScatterSetup {
  Potential potential;
  double energy = 20.0;
  double mass = 1.0;
  Arrival arrival;
  // Upstream end of the trajectory table; picked from the potential support
  // when empty.
  std::optional<double> x_min;

  void validate() const {
    require(energy > 0.0 && std::isfinite(energy), Errc::InvalidArgument, "energy must be positive");
    require(mass > 0.0 && std::isfinite(mass), Errc::InvalidArgument, "mass must be positive");
    require(std::isfinite(arrival.x) && std::isfinite(arrival.t), Errc::InvalidArgument, "arrival must be finite");
    if (x_min) require(*x_min < arrival.x, Errc::InvalidArgument, "x_min must lie upstream of the arrival point");
  }
};

/// sqrt(2m(E-V)) on the real branch, +i sqrt(2m(V-E)) under the barrier.
inline cplx momentum(const Potential& pot, double energy, double mass, double x) {
  require(mass > 0.0, Errc::InvalidArgument, "mass must be positive");
  const double gap = energy - pot.evaluate_or_zero(x);
  if (gap >= 0.0) return {std::sqrt(2.0 * mass * gap), 0.0};
  return {0.0, std::sqrt(-2.0 * mass * gap)};
}

inline cplx momentum(const ScatterSetup& s, double x) { return momentum(s.potential, s.energy, s.mass, x); }

struct TraversalTime {
  cplx value;
  double error_estimate = 0.0;
};

namespace detail {

// |E - V| at x(u), measured from whichever end of the map is a turning point
// so the difference keeps its relative precision there.
inline double kinetic_gap(const ScatterSetup& s, double sign, const EndpointMap& map, double u,
                          std::optional<double> tp_lo, std::optional<double> tp_hi) {
  auto is_tp = [&](double x) { return (tp_lo && *tp_lo == x) || (tp_hi && *tp_hi == x); };
  const bool at_lo = is_tp(map.lo());
  const bool at_hi = is_tp(map.hi());
  double g;
  if (at_lo && (!at_hi || map.from_lo(u) <= map.from_hi(u))) {
    g = -sign * excess_near(s.potential, s.energy, map.lo(), map.from_lo(u));
  } else if (at_hi) {
    g = -sign * excess_near(s.potential, s.energy, map.hi(), -map.from_hi(u));
  } else {
    g = sign * (s.energy - s.potential.evaluate_or_zero(map.x(u)));
  }
  return g > 0.0 ? g : std::numeric_limits<double>::min();
}

// m/|p| dx/du.
inline double time_density(const ScatterSetup& s, double sign, const EndpointMap& map, double u,
                           std::optional<double> tp_lo, std::optional<double> tp_hi) {
  return s.mass / std::sqrt(2.0 * s.mass * kinetic_gap(s, sign, map, u, tp_lo, tp_hi)) * map.jacobian(u);
}

// Interior points where V or its low derivatives are not smooth: rectangular
// edges and the knots of a tabulated barrier.
inline std::vector<double> quadrature_cuts(const Potential& pot, double lo, double hi) {
  std::vector<double> out;
  auto add = [&](double x) {
    if (x > lo && x < hi) out.push_back(x);
  };
  if (const auto* r = std::get_if<RectangularShape>(&pot.shape())) {
    add(r->left);
    add(r->right);
  } else if (const auto* t = std::get_if<TabulatedShape>(&pot.shape())) {
    for (double x : t->x) add(x);
  }
  return out;
}

}  // namespace detail

inline TraversalTime traversal_time_allowed(const ScatterSetup& s, double a, double b, const Tolerance& tol = {}) {
  s.validate();
  require(a < b, Errc::InvalidArgument, "region needs a < b");
  if (s.potential.max_on(a, b) >= s.energy) {
    throw Error(Errc::ClassicallyForbiddenInside, "V >= E somewhere inside the region");
  }
  auto f = [&](double y) { return s.mass / std::sqrt(2.0 * s.mass * (s.energy - s.potential.evaluate_or_zero(y))); };
  std::vector<double> cuts{a};
  for (double x : detail::quadrature_cuts(s.potential, a, b)) cuts.push_back(x);
  cuts.push_back(b);
  TraversalTime out{};
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const auto r = integrate(f, cuts[i], cuts[i + 1], tol);
    out.value += r.value;
    out.error_estimate += r.error_estimate;
  }
  return out;
}

/// i|T| with |T| the integral of m/|p| between the turning points.
inline TraversalTime traversal_time_forbidden(const ScatterSetup& s, const Tolerance& tol = {}) {
  s.validate();
  const TurningPoints tp = turning_points(s.potential, s.energy, s.mass);
  if (tp.regime != Regime::Forbidden) throw Error(Errc::NotForbidden, "energy is above the barrier");
  const EndpointMap map(tp.lower, tp.upper, Endpoints::InvSqrtBoth);
  auto f = [&](double u) { return detail::time_density(s, -1.0, map, u, tp.lower, tp.upper); };
  std::vector<double> cuts{0.0};
  for (double x : detail::quadrature_cuts(s.potential, tp.lower, tp.upper)) cuts.push_back(map.u(x));
  cuts.push_back(1.0);
  double value = 0.0, err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const auto r = integrate(f, cuts[i], cuts[i + 1], tol);
    value += r.value;
    err += r.error_estimate;
  }
  return {cplx(0.0, value), err};
}

enum class SegmentKind { RealForward, ImaginaryDescent };

constexpr const char* to_string(SegmentKind k) {
  return k == SegmentKind::RealForward ? "RealForward" : "ImaginaryDescent";
}

struct ContourSegment {
  SegmentKind kind;
  cplx start;
  cplx end;
  Interval x_range;
};

/// Path in the complex tau plane, ordered from upstream to the arrival time.
struct Contour {
  Regime regime = Regime::Allowed;
  std::vector<ContourSegment> segments;

  cplx start() const { return segments.front().start; }
  cplx end() const { return segments.back().end; }
};

namespace detail {

// Barycentric interpolation on Chebyshev-Lobatto nodes.
inline double lobatto_interp(const std::vector<double>& nodes, const std::vector<double>& vals, double u) {
  const std::size_t n = nodes.size();
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = u - nodes[j];
    if (d == 0.0) return vals[j];
    double w = (j % 2 == 0) ? 1.0 : -1.0;
    if (j == 0 || j + 1 == n) w *= 0.5;
    w /= d;
    num += w * vals[j];
    den += w;
  }
  return num / den;
}

}  // namespace detail

class Trajectory;
Trajectory trajectory(const ScatterSetup& setup);

/// tau(x) and its inverse x(tau) along the contour. Each contour segment is
/// split into pieces; a piece tabulates the elapsed time as a Chebyshev
/// interpolant in the endpoint-regularising variable u of EndpointMap.
class Trajectory {
 public:
  struct Piece {
    int segment;
    EndpointMap map;
    std::vector<double> u;    // Chebyshev-Lobatto nodes on [0,1]
    std::vector<double> cum;  // integral of m/|p| from map.lo() to x(u)
    double total;
    cplx tau_hi;  // tau at map.hi()
    cplx dir;     // dtau = dir * m/|p| dx
  };

  /// Entry and exit moments of a region.
  struct RegionTimes {
    cplx tau_a;
    cplx tau_b;
    cplx duration() const { return tau_b - tau_a; }
  };

  const ScatterSetup& setup() const { return setup_; }
  const Contour& contour() const { return contour_; }
  const TurningPoints& turning() const { return tp_; }
  Regime regime() const { return tp_.regime; }
  Interval domain() const { return domain_; }
  const std::vector<Piece>& pieces() const { return pieces_; }

  cplx time_at(double x) const {
    if (!(x >= domain_.lo && x <= domain_.hi)) {
      throw Error(Errc::RegionOutsideDomain, "x = " + std::to_string(x) + " outside trajectory domain");
    }
    if (x == domain_.hi) return {setup_.arrival.t, 0.0};
    const Piece& pc = piece_for(x);
    return pc.tau_hi - pc.dir * (pc.total - interp(pc, pc.map.u(x)));
  }

  /// Real position at a point of the contour.
  double position_at(cplx tau) const {
    const double scale = 1.0 + std::abs(contour_.start()) + std::abs(contour_.end());
    for (const Piece& pc : pieces_) {
      const cplx s = (pc.tau_hi - tau) / pc.dir;
      const double slack = 1e-12 * scale;
      if (std::abs(s.imag()) > slack || s.real() < -slack || s.real() > pc.total + slack) continue;
      const double target = std::clamp(pc.total - s.real(), 0.0, pc.total);
      const double u = invert_monotone([&](double v) { return interp(pc, v); }, target, 0.0, 1.0, kInvertTol);
      return pc.map.x(u);
    }
    throw Error(Errc::TargetOutOfRange, "tau not on the contour");
  }

  /// Local parameter of a piece: x as a function of the elapsed time s from
  /// the piece's lower end, s in [0, total].
  double position_in_piece(std::size_t index, double elapsed) const {
    const Piece& pc = pieces_.at(index);
    const double target = std::clamp(elapsed, 0.0, pc.total);
    const double u = invert_monotone([&](double v) { return interp(pc, v); }, target, 0.0, 1.0, kInvertTol);
    return pc.map.x(u);
  }

  RegionTimes region_times(double a, double b) const {
    require(a < b, Errc::InvalidArgument, "region needs a < b");
    if (a < domain_.lo || b > domain_.hi) {
      throw Error(Errc::RegionOutsideDomain, "region [" + std::to_string(a) + ", " + std::to_string(b) +
                                                 "] not crossed by the trajectory");
    }
    return {time_at(a), time_at(b)};
  }

  /// Ordinary velocity dx/dtau = p/m on real segments, |p|/m along the descent
  /// parameter.
  double speed_at(double x) const { return std::abs(momentum(setup_, x)) / setup_.mass; }

 private:
  friend Trajectory trajectory(const ScatterSetup& setup);

  static constexpr Tolerance kInvertTol{4.0 * std::numeric_limits<double>::epsilon(), 1e-16, 1};

  const Piece& piece_for(double x) const {
    for (const Piece& pc : pieces_) {
      if (x >= pc.map.lo() && x <= pc.map.hi()) return pc;
    }
    return pieces_.back();
  }

  static double interp(const Piece& pc, double u) { return detail::lobatto_interp(pc.u, pc.cum, u); }

  ScatterSetup setup_;
  TurningPoints tp_;
  Contour contour_;
  Interval domain_;
  std::vector<Piece> pieces_;
};

namespace detail {

inline std::vector<double> lobatto_nodes(std::size_t n) {
  std::vector<double> u(n);
  for (std::size_t j = 0; j < n; ++j) u[j] = 0.5 * (1.0 - std::cos(std::numbers::pi * double(j) / double(n - 1)));
  u.front() = 0.0;
  u.back() = 1.0;
  return u;
}

struct PieceBuilder {
  const ScatterSetup& s;
  double sign;  // +1 where E > V, -1 under the barrier
  std::optional<double> x_t_lo, x_t_hi;

  double integrand(const EndpointMap& map, double u) const { return time_density(s, sign, map, u, x_t_lo, x_t_hi); }

  // Cumulative integral at Lobatto nodes; doubles the node count until the
  // coarse interpolant reproduces the fine values.
  bool tabulate(const EndpointMap& map, std::vector<double>& u, std::vector<double>& cum) const {
    const Tolerance tol{1e-12, 1e-15, 200};
    auto f = [&](double v) { return integrand(map, v); };
    std::vector<double> prev_u, prev_cum;
    for (std::size_t n = 17; n <= 513; n = 2 * n - 1) {
      u = lobatto_nodes(n);
      cum.assign(n, 0.0);
      for (std::size_t j = 1; j < n; ++j) cum[j] = cum[j - 1] + integrate(f, u[j - 1], u[j], tol).value;
      if (!prev_u.empty()) {
        double worst = 0.0;
        for (std::size_t j = 1; j < n; j += 2) {
          worst = std::max(worst, std::abs(lobatto_interp(prev_u, prev_cum, u[j]) - cum[j]));
        }
        if (worst <= 1e-12 * cum.back() + 1e-15) return true;
      }
      prev_u = u;
      prev_cum = cum;
    }
    return false;
  }

  // Builds pieces covering [lo, hi] in increasing x, splitting where the
  // table will not converge. Returns them with tau_hi left unset.
  void build(double lo, double hi, Endpoints kind, int segment, cplx dir, std::vector<Trajectory::Piece>& out,
             int depth = 0) const {
    EndpointMap map(lo, hi, kind);
    std::vector<double> u, cum;
    if (tabulate(map, u, cum)) {
      out.push_back({segment, map, std::move(u), cum, cum.back(), 0.0, dir});
      return;
    }
    require(depth < 8, Errc::NonConvergence, "trajectory table did not converge");
    const double mid = 0.5 * (lo + hi);
    const bool sing_lo = kind == Endpoints::InvSqrtLower || kind == Endpoints::InvSqrtBoth;
    const bool sing_hi = kind == Endpoints::InvSqrtUpper || kind == Endpoints::InvSqrtBoth;
    build(lo, mid, sing_lo ? Endpoints::InvSqrtLower : Endpoints::Regular, segment, dir, out, depth + 1);
    build(mid, hi, sing_hi ? Endpoints::InvSqrtUpper : Endpoints::Regular, segment, dir, out, depth + 1);
  }
};

// Piece boundaries: jumps of V and the knots of a tabulated barrier.
inline std::vector<double> breakpoints(const Potential& pot, double lo, double hi) {
  std::vector<double> out = quadrature_cuts(pot, lo, hi);
  std::sort(out.begin(), out.end());
  return out;
}

// Pieces covering [lo, hi], cut at the breakpoints; singular flags apply to
// the outer ends only.
inline void stretch_pieces(const PieceBuilder& pb, double lo, double hi, bool sing_lo, bool sing_hi, int segment,
                           cplx dir, std::vector<Trajectory::Piece>& out) {
  std::vector<double> cuts{lo};
  for (double b : breakpoints(pb.s.potential, lo, hi)) cuts.push_back(b);
  cuts.push_back(hi);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const bool l = sing_lo && i == 0;
    const bool h = sing_hi && i + 2 == cuts.size();
    const Endpoints kind = l && h ? Endpoints::InvSqrtBoth
                           : l    ? Endpoints::InvSqrtLower
                           : h    ? Endpoints::InvSqrtUpper
                                  : Endpoints::Regular;
    pb.build(cuts[i], cuts[i + 1], kind, segment, dir, out);
  }
}

// Lays a real stretch [lo, hi] ending at time tau_hi.
inline void real_stretch(const PieceBuilder& pb, double lo, double hi, bool sing_lo, bool sing_hi, int segment,
                         cplx tau_hi, std::vector<Trajectory::Piece>& out) {
  if (!(hi > lo)) return;
  std::vector<Trajectory::Piece> local;
  stretch_pieces(pb, lo, hi, sing_lo, sing_hi, segment, 1.0, local);
  cplx t = tau_hi;
  for (auto it = local.rbegin(); it != local.rend(); ++it) {
    it->tau_hi = t;
    t -= it->total;
  }
  out.insert(out.end(), local.begin(), local.end());
}

}  // namespace detail

/// Tabulates tau(x) for the trajectory that reaches setup.arrival at energy E.
inline Trajectory trajectory(const ScatterSetup& setup) {
  setup.validate();
  Trajectory tr;
  tr.setup_ = setup;
  tr.tp_ = turning_points(setup.potential, setup.energy, setup.mass);
  const double x = setup.arrival.x;
  const cplx t(setup.arrival.t, 0.0);
  const Interval sup = setup.potential.support();

  if (tr.tp_.regime == Regime::Allowed) {
    const double lo = setup.x_min.value_or(std::min(sup.lo, x) - 1.0);
    require(lo < x, Errc::InvalidArgument, "x_min must lie upstream of the arrival point");
    tr.domain_ = {lo, x};
    detail::PieceBuilder pb{setup, 1.0, std::nullopt, std::nullopt};
    detail::real_stretch(pb, lo, x, false, false, 0, t, tr.pieces_);
    const cplx start = tr.pieces_.front().tau_hi - tr.pieces_.front().total;
    tr.contour_.regime = Regime::Allowed;
    tr.contour_.segments.push_back({SegmentKind::RealForward, start, t, tr.domain_});
    return tr;
  }

  const double xl = tr.tp_.lower, xg = tr.tp_.upper;
  if (x < xg) {
    throw Error(Errc::InvalidArgument, "arrival x = " + std::to_string(x) + " is not downstream of the exit point " +
                                           std::to_string(xg));
  }
  const double lo = setup.x_min.value_or(std::min(sup.lo, xl) - 1.0);
  require(lo < xl, Errc::InvalidArgument, "x_min must lie upstream of the entrance point");
  tr.domain_ = {lo, x};
  tr.contour_.regime = Regime::Forbidden;

  std::vector<Trajectory::Piece> down, descent, up;
  detail::PieceBuilder pb_down{setup, 1.0, xg, std::nullopt};
  detail::real_stretch(pb_down, xg, x, true, false, 2, t, down);
  cplx tau_b = t;
  for (const auto& pc : down) tau_b -= pc.total;

  detail::PieceBuilder pb_in{setup, -1.0, xl, xg};
  detail::stretch_pieces(pb_in, xl, xg, true, true, 1, cplx(0.0, -1.0), descent);
  cplx tq = tau_b;
  for (auto it = descent.rbegin(); it != descent.rend(); ++it) {
    it->tau_hi = tq;
    tq -= it->dir * it->total;
  }
  const cplx tau_a = tq;

  detail::PieceBuilder pb_up{setup, 1.0, std::nullopt, xl};
  detail::real_stretch(pb_up, lo, xl, false, true, 0, tau_a, up);
  cplx start = tau_a;
  for (const auto& pc : up) start -= pc.total;

  tr.pieces_ = up;
  tr.pieces_.insert(tr.pieces_.end(), descent.begin(), descent.end());
  tr.pieces_.insert(tr.pieces_.end(), down.begin(), down.end());
  tr.contour_.segments = {
      {SegmentKind::RealForward, start, tau_a, {lo, xl}},
      {SegmentKind::ImaginaryDescent, tau_a, tau_b, {xl, xg}},
      {SegmentKind::RealForward, tau_b, t, {xg, x}},
  };
  return tr;
}

/// The contour alone.
inline Contour build_contour(const ScatterSetup& setup) { return trajectory(setup).contour(); }

}  // namespace tunnel_time

#endif  // TUNNEL_TIME_KINEMATICS_HPP
