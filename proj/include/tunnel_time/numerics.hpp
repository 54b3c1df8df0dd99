#ifndef TUNNEL_TIME_NUMERICS_HPP
#define TUNNEL_TIME_NUMERICS_HPP

// Quadrature, bracketing root finding and monotone inversion shared by the
// physics modules. Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <queue>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "tunnel_time/error.hpp"

namespace tunnel_time {

struct Tolerance {
  double rel = 1e-9;
  double abs = 1e-12;
  int max_subdivisions = 60;

  void validate() const {
    require(rel > 0.0 && std::isfinite(rel), Errc::InvalidArgument, "tolerance rel must be > 0");
    require(abs >= 0.0 && std::isfinite(abs), Errc::InvalidArgument, "tolerance abs must be >= 0");
    require(max_subdivisions >= 1, Errc::InvalidArgument, "max_subdivisions must be >= 1");
  }
};

template <class T>
struct BasicQuadratureResult {
  T value{};
  double error_estimate = 0.0;
  int evaluations = 0;
};

using QuadratureResult = BasicQuadratureResult<double>;
using ComplexQuadratureResult = BasicQuadratureResult<std::complex<double>>;

/// Integrable endpoint behaviour of the integrand. Flagged ends are treated
/// as O(|x - end|^(-1/2)) and removed by a change of variables.
enum class Endpoints { Regular, InvSqrtLower, InvSqrtUpper, InvSqrtBoth };

/// The map u in [0,1] -> x in [lo,hi] that removes inverse-square-root
/// endpoint behaviour. Also used by the trajectory tables.
class EndpointMap {
 public:
  EndpointMap(double lo, double hi, Endpoints kind) : lo_(lo), hi_(hi), w_(hi - lo), kind_(kind) {}

  double x(double u) const {
    switch (kind_) {
      case Endpoints::Regular: return lo_ + w_ * u;
      case Endpoints::InvSqrtLower: return lo_ + w_ * u * u;
      case Endpoints::InvSqrtUpper: return hi_ - w_ * (1.0 - u) * (1.0 - u);
      case Endpoints::InvSqrtBoth: {
        const double s = std::sin(0.5 * std::numbers::pi * u);
        return lo_ + w_ * s * s;
      }
    }
    return lo_;
  }

  double jacobian(double u) const {
    switch (kind_) {
      case Endpoints::Regular: return w_;
      case Endpoints::InvSqrtLower: return 2.0 * w_ * u;
      case Endpoints::InvSqrtUpper: return 2.0 * w_ * (1.0 - u);
      case Endpoints::InvSqrtBoth: return 0.5 * std::numbers::pi * w_ * std::sin(std::numbers::pi * u);
    }
    return w_;
  }

  double u(double x) const {
    if (w_ == 0.0) return 0.0;
    const double f = std::clamp((x - lo_) / w_, 0.0, 1.0);
    switch (kind_) {
      case Endpoints::Regular: return f;
      case Endpoints::InvSqrtLower: return std::sqrt(f);
      case Endpoints::InvSqrtUpper: return 1.0 - std::sqrt(std::clamp((hi_ - x) / w_, 0.0, 1.0));
      case Endpoints::InvSqrtBoth: return 2.0 / std::numbers::pi * std::asin(std::sqrt(f));
    }
    return f;
  }

  /// x(u) - lo and hi - x(u) without cancellation.
  double from_lo(double u) const {
    switch (kind_) {
      case Endpoints::Regular: return w_ * u;
      case Endpoints::InvSqrtLower: return w_ * u * u;
      case Endpoints::InvSqrtUpper: return w_ - w_ * (1.0 - u) * (1.0 - u);
      case Endpoints::InvSqrtBoth: {
        const double s = std::sin(0.5 * std::numbers::pi * u);
        return w_ * s * s;
      }
    }
    return 0.0;
  }

  double from_hi(double u) const {
    switch (kind_) {
      case Endpoints::Regular: return w_ * (1.0 - u);
      case Endpoints::InvSqrtLower: return w_ - w_ * u * u;
      case Endpoints::InvSqrtUpper: return w_ * (1.0 - u) * (1.0 - u);
      case Endpoints::InvSqrtBoth: {
        const double c = std::cos(0.5 * std::numbers::pi * u);
        return w_ * c * c;
      }
    }
    return 0.0;
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  Endpoints kind() const { return kind_; }

 private:
  double lo_, hi_, w_;
  Endpoints kind_;
};

namespace detail {

template <class T>
double magnitude(const T& v) {
  return std::abs(v);
}

template <class T>
bool all_finite(const T& v) {
  if constexpr (std::is_floating_point_v<T>) {
    return std::isfinite(v);
  } else {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  }
}

template <class T>
struct Panel {
  double lo, hi;
  T value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

// Non-adaptive 21-point Gauss-Kronrod panel with its embedded 10-point Gauss
// estimate. Nodes are always interior, so endpoint singularities are never
// sampled.
template <class T, class F>
Panel<T> kronrod_panel(F& f, double lo, double hi, int& evaluations) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
  using G = boost::math::quadrature::gauss<double, 10>;
  const auto& xk = GK::abscissa();
  const auto& wk = GK::weights();
  const auto& wg = G::weights();
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);

  auto eval = [&](double x) -> T {
    T v = f(x);
    ++evaluations;
    if (!all_finite(v)) throw Error(Errc::NonFinite, "integrand is not finite at x = " + std::to_string(x));
    return v;
  };

  // Gauss order 10 is even: the centre node belongs to Kronrod only, and the
  // Gauss nodes sit at odd indices of the Kronrod abscissa table.
  T f0 = eval(mid);
  T kronrod = f0 * wk[0];
  T gauss{};
  double roundoff = magnitude(f0) * wk[0];
  for (std::size_t i = 1; i < xk.size(); ++i) {
    const T fp = eval(mid + half * xk[i]);
    const T fm = eval(mid - half * xk[i]);
    kronrod += (fp + fm) * wk[i];
    roundoff += (magnitude(fp) + magnitude(fm)) * wk[i];
    if (i % 2 == 1) gauss += (fp + fm) * wg[i / 2];
  }
  const double err = std::max(magnitude(kronrod - gauss) * std::abs(half),
                              50.0 * std::numeric_limits<double>::epsilon() * roundoff * std::abs(half));
  return Panel<T>{lo, hi, kronrod * half, err};
}

template <class T, class F>
BasicQuadratureResult<T> adaptive(F& g, double lo, double hi, const Tolerance& tol) {
  BasicQuadratureResult<T> out;
  if (lo == hi) return out;
  std::priority_queue<Panel<T>> heap;
  heap.push(kronrod_panel<T>(g, lo, hi, out.evaluations));
  T total = heap.top().value;
  double error = heap.top().error;
  int panels = 1;
  while (error > std::max(tol.abs, tol.rel * magnitude(total))) {
    if (panels >= tol.max_subdivisions) {
      throw Error(Errc::NonConvergence, "quadrature error " + std::to_string(error) + " above tolerance after " +
                                             std::to_string(panels) + " subdivisions");
    }
    Panel<T> worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    Panel<T> left = kronrod_panel<T>(g, worst.lo, mid, out.evaluations);
    Panel<T> right = kronrod_panel<T>(g, mid, worst.hi, out.evaluations);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++panels;
  }
  // Re-sum to shed the drift of the running updates.
  total = T{};
  error = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  out.value = total;
  out.error_estimate = error;
  return out;
}

template <class T, class F>
BasicQuadratureResult<T> integrate_any(F&& f, double lo, double hi, const Tolerance& tol, Endpoints ends) {
  tol.validate();
  require(std::isfinite(lo) && std::isfinite(hi), Errc::InvalidArgument, "integration limits must be finite");
  require(lo <= hi, Errc::InvalidArgument, "integration requires lo <= hi");
  if (ends == Endpoints::Regular) {
    auto g = [&](double x) -> T { return T(f(x)); };
    return adaptive<T>(g, lo, hi, tol);
  }
  EndpointMap map(lo, hi, ends);
  auto g = [&](double u) -> T { return T(f(map.x(u))) * map.jacobian(u); };
  return adaptive<T>(g, 0.0, 1.0, tol);
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (21 point) integration of a real integrand.
template <class F>
QuadratureResult integrate(F&& f, double lo, double hi, const Tolerance& tol = {},
                           Endpoints ends = Endpoints::Regular) {
  return detail::integrate_any<double>(std::forward<F>(f), lo, hi, tol, ends);
}

/// Same as integrate() for complex-valued integrands; the tolerance applies to
/// the modulus of the result.
template <class F>
ComplexQuadratureResult integrate_complex(F&& f, double lo, double hi, const Tolerance& tol = {},
                                          Endpoints ends = Endpoints::Regular) {
  return detail::integrate_any<std::complex<double>>(std::forward<F>(f), lo, hi, tol, ends);
}

/// Bracketing root finder (TOMS 748: inverse cubic / quadratic interpolation
/// with bisection safeguard). Returns x with bracket width <= rel*|x| + abs.
template <class F>
double find_root(F&& f, double lo, double hi, const Tolerance& tol = {}) {
  tol.validate();
  require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi, Errc::InvalidArgument, "invalid root bracket");
  const double flo = f(lo);
  const double fhi = f(hi);
  require(std::isfinite(flo) && std::isfinite(fhi), Errc::NonFinite, "function not finite at bracket ends");
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0.0) == (fhi < 0.0)) throw Error(Errc::NoSignChange, "f(lo) and f(hi) have the same sign");

  auto width_ok = [&](double a, double b) {
    const double scale = std::min(std::abs(a), std::abs(b));
    return std::abs(b - a) <= tol.rel * scale + tol.abs;
  };
  std::uintmax_t iterations = 200;
  std::pair<double, double> bracket;
  try {
    bracket = boost::math::tools::toms748_solve(
        [&](double x) {
          const double v = f(x);
          if (!std::isfinite(v)) throw Error(Errc::NonFinite, "function not finite inside bracket");
          return v;
        },
        lo, hi, flo, fhi, width_ok, iterations);
  } catch (const boost::math::evaluation_error& e) {
    throw Error(Errc::NonConvergence, e.what());
  }
  if (!width_ok(bracket.first, bracket.second)) {
    throw Error(Errc::NonConvergence, "root bracket did not shrink to tolerance");
  }
  const double fa = f(bracket.first);
  const double fb = f(bracket.second);
  return std::abs(fa) <= std::abs(fb) ? bracket.first : bracket.second;
}

/// Solves g(x) = target for strictly monotone g on [lo, hi].
template <class G>
double invert_monotone(G&& g, double target, double lo, double hi, const Tolerance& tol = {}) {
  const double glo = g(lo);
  const double ghi = g(hi);
  const double gmin = std::min(glo, ghi);
  const double gmax = std::max(glo, ghi);
  if (!(target >= gmin && target <= gmax)) {
    throw Error(Errc::TargetOutOfRange, "target " + std::to_string(target) + " outside [" + std::to_string(gmin) +
                                            ", " + std::to_string(gmax) + "]");
  }
  if (target == glo) return lo;
  if (target == ghi) return hi;
  return find_root([&](double x) { return g(x) - target; }, lo, hi, tol);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, Errc::InvalidArgument, "slope fit needs two or more points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, Errc::InvalidArgument, "slope fit needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace tunnel_time

#endif  // TUNNEL_TIME_NUMERICS_HPP
