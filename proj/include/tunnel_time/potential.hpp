#ifndef TUNNEL_TIME_POTENTIAL_HPP
#define TUNNEL_TIME_POTENTIAL_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/interpolators/makima.hpp>

#include "tunnel_time/error.hpp"
#include "tunnel_time/numerics.hpp"

namespace tunnel_time {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return x >= lo && x <= hi; }
  double width() const { return hi - lo; }
};

/// V(x) = 0 everywhere.
struct FreeShape {};

/// Symmetric Eckart barrier V(x) = V0 sech^2(x/d).
struct EckartShape {
  double height;
  double width;
};

/// V(x) = V0 for a <= x <= b, else 0.
struct RectangularShape {
  double height;
  double left;
  double right;
};

/// Samples interpolated by a modified Akima spline (C1, no overshoot on
/// plateaus). Evaluation outside the sample range is an error.
struct TabulatedShape {
  std::vector<double> x;
  std::vector<double> v;
};

using PotentialShape = std::variant<FreeShape, EckartShape, RectangularShape, TabulatedShape>;

enum class Regime { Allowed, Forbidden };

constexpr const char* to_string(Regime r) { return r == Regime::Allowed ? "Allowed" : "Forbidden"; }

struct TurningPoints {
  Regime regime = Regime::Allowed;
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
};

/// Immutable static barrier.
class Potential {
 public:
  Potential() : shape_(FreeShape{}) {}

  static Potential free() { return Potential(FreeShape{}); }

  static Potential eckart(double height, double width) {
    require(height > 0.0 && width > 0.0, Errc::InvalidArgument, "Eckart barrier needs V0 > 0 and d > 0");
    return Potential(EckartShape{height, width});
  }

  static Potential rectangular(double height, double left, double right) {
    require(height > 0.0, Errc::InvalidArgument, "rectangular barrier needs V0 > 0");
    require(left < right, Errc::InvalidArgument, "rectangular barrier needs a < b");
    return Potential(RectangularShape{height, left, right});
  }

  static Potential tabulated(std::vector<double> x, std::vector<double> v) {
    require(x.size() == v.size(), Errc::InvalidArgument, "tabulated potential: x and V sizes differ");
    require(x.size() >= 4, Errc::InvalidArgument, "tabulated potential needs at least 4 samples");
    for (std::size_t i = 0; i < x.size(); ++i) {
      require(std::isfinite(x[i]) && std::isfinite(v[i]), Errc::InvalidArgument, "tabulated potential: non-finite sample");
      if (i > 0) require(x[i] > x[i - 1], Errc::InvalidArgument, "tabulated potential: x must be strictly increasing");
    }
    Potential p(TabulatedShape{x, v});
    p.spline_ = std::make_shared<Spline>(std::move(x), std::move(v));
    return p;
  }

  const PotentialShape& shape() const { return shape_; }

  double evaluate(double x) const {
    return std::visit(
        [&](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, FreeShape>) {
            return 0.0;
          } else if constexpr (std::is_same_v<S, EckartShape>) {
            const double c = std::cosh(x / s.width);
            return s.height / (c * c);
          } else if constexpr (std::is_same_v<S, RectangularShape>) {
            return (x >= s.left && x <= s.right) ? s.height : 0.0;
          } else {
            check_table(s, x);
            return (*spline_)(x);
          }
        },
        shape_);
  }

  double operator()(double x) const { return evaluate(x); }

  double derivative(double x) const {
    return std::visit(
        [&](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, FreeShape>) {
            return 0.0;
          } else if constexpr (std::is_same_v<S, EckartShape>) {
            const double c = std::cosh(x / s.width);
            return -2.0 * s.height / s.width * std::tanh(x / s.width) / (c * c);
          } else if constexpr (std::is_same_v<S, RectangularShape>) {
            if (x == s.left || x == s.right) {
              throw Error(Errc::DiscontinuityPoint, "rectangular barrier derivative undefined at its edges");
            }
            return 0.0;
          } else {
            check_table(s, x);
            return spline_->prime(x);
          }
        },
        shape_);
  }

  /// V(x) outside support() is zero (Eckart: below 1e-16 V0).
  Interval support() const {
    return std::visit(
        [](const auto& s) -> Interval {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, FreeShape>) {
            return Interval{0.0, 0.0};
          } else if constexpr (std::is_same_v<S, EckartShape>) {
            const double reach = s.width * std::acosh(1e8);
            return Interval{-reach, reach};
          } else if constexpr (std::is_same_v<S, RectangularShape>) {
            return Interval{s.left, s.right};
          } else {
            return Interval{s.x.front(), s.x.back()};
          }
        },
        shape_);
  }

  /// V(x), or 0 outside the support for shapes that refuse to extrapolate.
  double evaluate_or_zero(double x) const {
    if (std::holds_alternative<TabulatedShape>(shape_) && !support().contains(x)) return 0.0;
    return evaluate(x);
  }

  double peak_position() const {
    return std::visit(
        [](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, FreeShape> || std::is_same_v<S, EckartShape>) {
            return 0.0;
          } else if constexpr (std::is_same_v<S, RectangularShape>) {
            return 0.5 * (s.left + s.right);
          } else {
            return s.x[static_cast<std::size_t>(std::max_element(s.v.begin(), s.v.end()) - s.v.begin())];
          }
        },
        shape_);
  }

  double max_value() const { return evaluate(peak_position()); }

  /// max V on [a,b].
  double max_on(double a, double b) const {
    return std::visit(
        [&](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, FreeShape>) {
            return 0.0;
          } else if constexpr (std::is_same_v<S, EckartShape>) {
            return evaluate(std::clamp(0.0, a, b));
          } else if constexpr (std::is_same_v<S, RectangularShape>) {
            return (b >= s.left && a <= s.right) ? s.height : 0.0;
          } else {
            double m = std::max(evaluate(a), evaluate(b));
            for (std::size_t i = 0; i < s.x.size(); ++i) {
              if (s.x[i] > a && s.x[i] < b) m = std::max(m, s.v[i]);
            }
            // Dense scan catches spline bumps between samples.
            constexpr int n = 256;
            for (int i = 1; i < n; ++i) m = std::max(m, evaluate(a + (b - a) * i / n));
            return m;
          }
        },
        shape_);
  }

 private:
  using Spline = boost::math::interpolators::makima<std::vector<double>>;

  explicit Potential(PotentialShape s) : shape_(std::move(s)) {}

  static void check_table(const TabulatedShape& s, double x) {
    if (!(x >= s.x.front() && x <= s.x.back())) {
      throw Error(Errc::ExtrapolationOutsideTable, "x = " + std::to_string(x) + " outside tabulated range");
    }
  }

  PotentialShape shape_;
  std::shared_ptr<const Spline> spline_;
};

/// Relative width of the band around max V in which the energy counts as
/// grazing the barrier top.
inline constexpr double kDegenerateEnergyBand = 1e-8;

/// Roots of V(x) = E around the barrier maximum.
inline TurningPoints turning_points(const Potential& pot, double energy, double mass) {
  require(energy > 0.0, Errc::InvalidArgument, "energy must be positive");
  require(mass > 0.0, Errc::InvalidArgument, "mass must be positive");
  const double vmax = pot.max_value();
  if (std::abs(energy - vmax) < kDegenerateEnergyBand * std::abs(vmax)) {
    throw Error(Errc::DegenerateEnergy, "energy grazes the barrier top");
  }
  TurningPoints tp;
  if (energy > vmax) return tp;
  tp.regime = Regime::Forbidden;

  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, EckartShape>) {
          const double x = s.width * std::acosh(std::sqrt(s.height / energy));
          tp.lower = -x;
          tp.upper = x;
        } else if constexpr (std::is_same_v<S, RectangularShape>) {
          tp.lower = s.left;
          tp.upper = s.right;
        } else if constexpr (std::is_same_v<S, TabulatedShape>) {
          const Tolerance root_tol{4.0 * std::numeric_limits<double>::epsilon(), 1e-15 * (s.x.back() - s.x.front()), 1};
          const auto peak = static_cast<std::size_t>(std::max_element(s.v.begin(), s.v.end()) - s.v.begin());
          auto g = [&](double x) { return pot.evaluate(x) - energy; };
          std::size_t i = peak;
          while (i > 0 && s.v[i - 1] >= energy) --i;
          require(i > 0, Errc::InvalidArgument, "tabulated barrier does not drop below E on the left");
          tp.lower = find_root(g, s.x[i - 1], s.x[i], root_tol);
          std::size_t j = peak;
          while (j + 1 < s.x.size() && s.v[j + 1] >= energy) ++j;
          require(j + 1 < s.x.size(), Errc::InvalidArgument, "tabulated barrier does not drop below E on the right");
          tp.upper = find_root(g, s.x[j], s.x[j + 1], root_tol);
        }
      },
      pot.shape());
  return tp;
}

/// V(x_t + dx) - E for a turning point x_t of energy E. The Eckart form is
/// evaluated without the cancellation of the direct difference; so is the
/// tabulated one while x_t + dx stays in the knot interval of x_t, where the
/// spline is a single cubic and x_t is taken as its exact root.
inline double excess_near(const Potential& pot, double energy, double x_t, double dx) {
  if (const auto* e = std::get_if<EckartShape>(&pot.shape())) {
    const double yt = x_t / e->width;
    const double h = dx / e->width;
    const double c = std::cosh(yt + h);
    return -energy * std::sinh(h) * std::sinh(2.0 * yt + h) / (c * c);
  }
  if (const auto* t = std::get_if<TabulatedShape>(&pot.shape())) {
    const auto it = std::upper_bound(t->x.begin(), t->x.end(), x_t);
    if (it != t->x.begin() && it != t->x.end()) {
      const std::size_t i = std::size_t(it - t->x.begin()) - 1;
      const double x0 = t->x[i], x1 = t->x[i + 1], h = x1 - x0;
      const double x = x_t + dx;
      if (x >= x0 && x <= x1) {
        const double y0 = t->v[i], y1 = t->v[i + 1];
        const double m0 = h * pot.derivative(x0), m1 = h * pot.derivative(x1);
        const double a = 3.0 * (y1 - y0) - 2.0 * m0 - m1;
        const double b = 2.0 * (y0 - y1) + m0 + m1;
        const double u = (x_t - x0) / h;
        const double d1 = (m0 + u * (2.0 * a + 3.0 * b * u)) / h;
        const double d2 = (2.0 * a + 6.0 * b * u) / (h * h);
        const double d3 = 6.0 * b / (h * h * h);
        return dx * (d1 + dx * (0.5 * d2 + dx * d3 / 6.0));
      }
    }
  }
  return pot.evaluate_or_zero(x_t + dx) - energy;
}

/// Reads a two-column CSV "x,V" with a one-line header.
inline Potential load_tabulated_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::InvalidArgument, "tabulated CSV is empty");
  std::vector<double> xs, vs;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double x = 0.0, v = 0.0;
    if (!(fields >> x >> v)) {
      throw Error(Errc::InvalidArgument, "tabulated CSV: cannot parse row " + std::to_string(row));
    }
    xs.push_back(x);
    vs.push_back(v);
  }
  return Potential::tabulated(std::move(xs), std::move(vs));
}

inline Potential load_tabulated_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::InvalidArgument, "cannot open tabulated potential " + path);
  return load_tabulated_csv(in);
}

}  // namespace tunnel_time

#endif  // TUNNEL_TIME_POTENTIAL_HPP
